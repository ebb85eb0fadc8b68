//! Distribution comparison for validating a reduced model against the
//! full one: two-sample Kolmogorov-Smirnov, the classic (mean-centered)
//! Levene variance test, per-time relative-error series, and ECDF /
//! histogram summaries for plotting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{f_sf, kolmogorov_sf};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

fn check_sample(name: &str, xs: &[f64]) -> Result<()> {
    if xs.len() < 10 {
        return Err(Error::config(format!(
            "{name} needs at least 10 values, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::config(format!("{name} contains a non-finite value")));
    }
    Ok(())
}

/// Two-sample K-S test. The statistic is the exact supremum distance
/// between the two empirical CDFs (ties handled by advancing both sides
/// past each merged value); the p-value uses the asymptotic Kolmogorov
/// distribution at effective size n1*n2/(n1+n2).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_sample("first sample", a)?;
    check_sample("second sample", b)?;
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n1, n2) = (sa.len(), sb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let v = sa[i].min(sb[j]);
        while i < n1 && sa[i] <= v {
            i += 1;
        }
        while j < n2 && sb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    // Once one sample is exhausted the gap only shrinks back to 0, except
    // for the far side already accounted: remaining prefix differences are
    // bounded by the last recorded one, so the sweep above is complete.
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let p = kolmogorov_sf(ne.sqrt() * d);
    Ok(TestResult { statistic: d, p_value: p, n1, n2 })
}

/// Classic two-group Levene test on mean-centered absolute deviations,
/// with the p-value from F(1, n1+n2-2).
pub fn levene(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_sample("first sample", a)?;
    check_sample("second sample", b)?;
    let za = abs_deviations(a);
    let zb = abs_deviations(b);
    let (n1, n2) = (za.len() as f64, zb.len() as f64);
    let m1 = za.iter().sum::<f64>() / n1;
    let m2 = zb.iter().sum::<f64>() / n2;
    let grand = (n1 * m1 + n2 * m2) / (n1 + n2);
    let within: f64 = za.iter().map(|z| (z - m1) * (z - m1)).sum::<f64>()
        + zb.iter().map(|z| (z - m2) * (z - m2)).sum::<f64>();
    if !(within > 0.0) {
        return Err(Error::degenerate(
            "zero within-group deviation in both groups; Levene statistic undefined",
        ));
    }
    let between = n1 * (m1 - grand) * (m1 - grand) + n2 * (m2 - grand) * (m2 - grand);
    let dof = n1 + n2 - 2.0;
    let w = dof * between / within;
    let p = f_sf(w, 1.0, dof);
    Ok(TestResult { statistic: w, p_value: p, n1: a.len(), n2: b.len() })
}

fn abs_deviations(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).abs()).collect()
}

/// Output samples collected at a strictly increasing set of times, with
/// the same count at every time (at least 30 so the per-time standard
/// deviations mean something).
#[derive(Debug, Clone)]
pub struct SampleSeries {
    times: Vec<f64>,
    samples: Vec<Vec<f64>>,
}

impl SampleSeries {
    pub fn new(times: Vec<f64>, samples: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != samples.len() {
            return Err(Error::config("series needs one sample set per time"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("series times must be strictly increasing"));
        }
        let count = samples[0].len();
        if count < 30 {
            return Err(Error::config(format!(
                "series needs at least 30 samples per time, got {count}"
            )));
        }
        if samples.iter().any(|s| s.len() != count) {
            return Err(Error::config("series sample counts differ across times"));
        }
        Ok(SampleSeries { times, samples })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.samples[k]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesRow {
    pub time: f64,
    pub mean_full: f64,
    pub std_full: f64,
    pub mean_reduced: f64,
    pub std_reduced: f64,
    pub rel_err_mean: f64,
    pub rel_err_std: f64,
    /// Set when a full-model denominator was below 1e-12, making the
    /// relative error unreliable.
    pub flagged: bool,
}

/// Per-time mean/std comparison between full and reduced runs. Relative
/// errors are |full - reduced| / |full| with the denominator floored at
/// 1e-12; rows where the floor fired are flagged instead of silently huge.
pub fn compare_series(full: &SampleSeries, reduced: &SampleSeries) -> Result<Vec<SeriesRow>> {
    if full.times != reduced.times {
        return Err(Error::config("full and reduced series have different time grids"));
    }
    const FLOOR: f64 = 1e-12;
    let rows = full
        .times
        .iter()
        .enumerate()
        .map(|(k, &time)| {
            let (mean_full, std_full) = mean_std(&full.samples[k]);
            let (mean_reduced, std_reduced) = mean_std(&reduced.samples[k]);
            let flagged = mean_full.abs() < FLOOR || std_full.abs() < FLOOR;
            SeriesRow {
                time,
                mean_full,
                std_full,
                mean_reduced,
                std_reduced,
                rel_err_mean: (mean_full - mean_reduced).abs() / mean_full.abs().max(FLOOR),
                rel_err_std: (std_full - std_reduced).abs() / std_full.abs().max(FLOOR),
                flagged,
            }
        })
        .collect();
    Ok(rows)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs
        .iter()
        .map(|x| {
            let d = x - mean;
            d * d
        })
        .sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct EcdfPdf {
    /// Exact ECDF as (value, cumulative) pairs, one per distinct value.
    pub ecdf: Vec<(f64, f64)>,
    /// bins + 1 edges spanning [min, max]; empty when degenerate.
    pub edges: Vec<f64>,
    /// Density per bin, count / (n * width); empty when degenerate.
    pub density: Vec<f64>,
    /// All values equal: a point mass has an ECDF but no density.
    pub degenerate: bool,
}

/// Exact ECDF plus an equal-width density histogram over [min, max].
pub fn ecdf_and_pdf(xs: &[f64], bins: usize) -> Result<EcdfPdf> {
    if xs.is_empty() {
        return Err(Error::config("ecdf needs a nonempty sample"));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("sample contains a non-finite value"));
    }
    if bins < 2 {
        return Err(Error::config(format!("need at least 2 bins, got {bins}")));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = sorted.len();
    let mut ecdf = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        if i + 1 == n || sorted[i + 1] > v {
            ecdf.push((v, (i + 1) as f64 / n as f64));
        }
    }
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    if lo == hi {
        return Ok(EcdfPdf { ecdf, edges: Vec::new(), density: Vec::new(), degenerate: true });
    }
    let density = histogram_density(&sorted, lo, hi, bins);
    let edges = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
    Ok(EcdfPdf { ecdf, edges, density, degenerate: false })
}

/// Density histogram over the explicit range [lo, hi]; values outside the
/// range are counted into the end bins so mass is never dropped.
pub fn histogram_density(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        let k = (((x - lo) / width) as isize).clamp(0, bins as isize - 1) as usize;
        counts[k] += 1;
    }
    let n = xs.len() as f64;
    counts.iter().map(|&c| c as f64 / (n * width)).collect()
}

/// Fraction of the sorted sample at or below x.
pub fn ecdf_at(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
}
