//! Total-order sensitivity indices on a pick-freeze design.
//!
//! The design holds two independent sample matrices A and B of the same
//! shape. For input i the cross matrix takes A with column i swapped in
//! from B, so the full design costs n*(d+2) model evaluations. Total
//! indices use the Jansen form
//!
//!   S_T(i) = sum_j (g(A_j) - g(AB_i_j))^2 / (2 n var)
//!
//! with the variance pooled over the A and B evaluations. Confidence
//! intervals come from a percentile bootstrap that resamples row indices
//! jointly across all matrices, so the estimator is applied to resampled
//! rows exactly as it was to the originals.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::input::{InputSpace, SampleMatrix};
use crate::model::{evaluate_rows, ModelFunction};
use crate::rng::Stream;

pub const BOOTSTRAP_RESAMPLES: usize = 500;
const CI_LEVEL: f64 = 0.95;

pub struct SaltelliDesign {
    space: InputSpace,
    n: usize,
    seed: u64,
    a: SampleMatrix,
    b: SampleMatrix,
}

impl SaltelliDesign {
    /// Builds the design from one seed; A and B come from disjoint
    /// substreams so they stay independent at any n.
    pub fn build(space: &InputSpace, n: usize, seed: u64) -> Result<Self> {
        if n < 16 {
            return Err(Error::config(format!("design size must be at least 16, got {n}")));
        }
        let a = space.sample_stream(n, Stream::new(seed, "design-a"));
        let b = space.sample_stream(n, Stream::new(seed, "design-b"));
        Ok(SaltelliDesign { space: space.clone(), n, seed, a, b })
    }

    /// Builds A and B from two caller-chosen seeds. Reusing the same seed
    /// would make A == B and silently zero every index, so it is rejected.
    pub fn from_seeds(space: &InputSpace, n: usize, seed_a: u64, seed_b: u64) -> Result<Self> {
        if seed_a == seed_b {
            return Err(Error::config("design seeds must differ"));
        }
        if n < 16 {
            return Err(Error::config(format!("design size must be at least 16, got {n}")));
        }
        let a = space.sample_stream(n, Stream::new(seed_a, "design-a"));
        let b = space.sample_stream(n, Stream::new(seed_b, "design-b"));
        Ok(SaltelliDesign { space: space.clone(), n, seed: seed_a, a, b })
    }

    pub fn space(&self) -> &InputSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix_a(&self) -> &SampleMatrix {
        &self.a
    }

    pub fn matrix_b(&self) -> &SampleMatrix {
        &self.b
    }

    /// A with column i replaced from B.
    pub fn cross(&self, i: usize) -> SampleMatrix {
        self.a.with_column_from(&self.b, i)
    }

    pub fn total_evals(&self) -> usize {
        self.n * (self.space.dim() + 2)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputSensitivity {
    pub name: String,
    pub s_total: f64,
    pub ci: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityResult {
    pub inputs: Vec<InputSensitivity>,
    pub variance: f64,
    pub mean: f64,
    pub n: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SensitivityResult {
    pub fn get(&self, name: &str) -> Option<&InputSensitivity> {
        self.inputs.iter().find(|s| s.name == name)
    }
}

/// Estimates all total indices for the model on the given design.
pub fn estimate_total_si<M: ModelFunction>(
    model: &M,
    design: &SaltelliDesign,
) -> Result<SensitivityResult> {
    let n = design.n;
    let d = design.space.dim();
    let ga = evaluate_rows(model, &design.a)?;
    let gb = evaluate_rows(model, &design.b)?;
    let gab: Vec<Vec<f64>> = (0..d)
        .map(|i| evaluate_rows(model, &design.cross(i)))
        .collect::<Result<_>>()?;

    let (mean, variance) = pooled_mean_var(&ga, &gb);
    if !(variance > 0.0) {
        return Err(Error::degenerate(
            "model output has zero variance (constant model); total indices are undefined",
        ));
    }

    let point: Vec<f64> = (0..d).map(|i| jansen(&ga, &gab[i], variance)).collect();

    // Each resample draws n row indices with replacement and recomputes
    // every index from the resampled rows, pooled variance included.
    let boot = Stream::new(design.seed, "bootstrap");
    let resamples: Vec<Option<Vec<f64>>> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|r| {
            let idx: Vec<usize> = (0..n)
                .map(|j| {
                    let u = boot.unit((r * n + j) as u64);
                    ((u * n as f64) as usize).min(n - 1)
                })
                .collect();
            let ra: Vec<f64> = idx.iter().map(|&j| ga[j]).collect();
            let rb: Vec<f64> = idx.iter().map(|&j| gb[j]).collect();
            let (_, var_r) = pooled_mean_var(&ra, &rb);
            if !(var_r > 0.0) {
                return None;
            }
            Some(
                (0..d)
                    .map(|i| {
                        let rab: Vec<f64> = idx.iter().map(|&j| gab[i][j]).collect();
                        jansen(&ra, &rab, var_r)
                    })
                    .collect(),
            )
        })
        .collect();
    let valid: Vec<&Vec<f64>> = resamples.iter().flatten().collect();
    if valid.len() < 2 {
        return Err(Error::degenerate(
            "bootstrap collapsed: nearly all resamples had zero variance",
        ));
    }

    let alpha = (1.0 - CI_LEVEL) / 2.0;
    let mut inputs = Vec::with_capacity(d);
    let mut warnings = Vec::new();
    for (i, def) in design.space.inputs().iter().enumerate() {
        let mut draws: Vec<f64> = valid.iter().map(|s| s[i]).collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Percentile intervals can exclude the point estimate in pathological
        // resampling; widen so ci[0] <= s_total <= ci[1] always holds.
        let ci = [
            percentile(&draws, alpha).min(point[i]),
            percentile(&draws, 1.0 - alpha).max(point[i]),
        ];
        if point[i] < -0.05 || point[i] > 1.05 {
            warnings.push(format!(
                "total index for '{}' is {:.4}, outside [0, 1] beyond estimator noise",
                def.name, point[i]
            ));
        }
        inputs.push(InputSensitivity { name: def.name.clone(), s_total: point[i], ci });
    }

    Ok(SensitivityResult { inputs, variance, mean, n, seed: design.seed, warnings })
}

fn jansen(ga: &[f64], gab: &[f64], variance: f64) -> f64 {
    let n = ga.len();
    let num: f64 = ga.iter().zip(gab).map(|(a, c)| (a - c) * (a - c)).sum();
    num / (2.0 * n as f64 * variance)
}

/// Mean and unbiased variance over the concatenation of two equal-length
/// slices.
fn pooled_mean_var(a: &[f64], b: &[f64]) -> (f64, f64) {
    let m = (a.len() + b.len()) as f64;
    let mean = (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / m;
    let ss: f64 = a
        .iter()
        .chain(b)
        .map(|x| {
            let d = x - mean;
            d * d
        })
        .sum();
    (mean, ss / (m - 1.0))
}

/// Linear-interpolated quantile of an already sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub n: usize,
}

/// Plain Monte Carlo moments of the model over a sample. The variance is
/// second_moment - mean^2 clamped at zero, so the triple always satisfies
/// the Cauchy-Schwarz relation the coupling factors rely on.
pub fn estimate_moments<M: ModelFunction>(
    model: &M,
    sample: &SampleMatrix,
) -> Result<MomentEstimate> {
    let values = evaluate_rows(model, sample)?;
    moments_of_values(&values)
}

/// Same moment triple computed from already evaluated outputs.
pub fn moments_of_values(values: &[f64]) -> Result<MomentEstimate> {
    let n = values.len();
    if n == 0 {
        return Err(Error::config("moments need at least one value"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let second_moment = values.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let variance = (second_moment - mean * mean).max(0.0);
    Ok(MomentEstimate { mean, second_moment, variance, n })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CovEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

impl CovEstimate {
    /// An analytically known covariance: zero standard error, so sign
    /// conditions built on it certify even at zero margin.
    pub fn exact(value: f64) -> Self {
        CovEstimate { value, std_error: 0.0, n: 0 }
    }
}

/// Sample covariance of paired values, with the standard error of the mean
/// of the centered products; callers use the error to decide whether a sign
/// condition is resolved or drowned in noise.
pub fn estimate_covariance(xs: &[f64], ys: &[f64]) -> Result<CovEstimate> {
    if xs.len() != ys.len() {
        return Err(Error::config(format!(
            "covariance needs paired samples, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::config(format!("need at least 2 pairs for covariance, got {n}")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let products: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let sum: f64 = products.iter().sum();
    let value = sum / (n - 1) as f64;
    let pm = sum / n as f64;
    let pvar: f64 = products
        .iter()
        .map(|p| {
            let d = p - pm;
            d * d
        })
        .sum::<f64>()
        / (n - 1) as f64;
    let std_error = (pvar / n as f64).sqrt();
    Ok(CovEstimate { value, std_error, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::{Distribution, InputDef, InputSpace, Scale};
    use crate::model::FnModel;
    use std::f64::consts::PI;

    fn unit_space(names: &[&str]) -> InputSpace {
        InputSpace::new(
            names
                .iter()
                .map(|n| InputDef::new(*n, Distribution::Uniform { lo: 0.0, hi: 1.0 }, Scale::Macro))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn linear_model_matches_analytic_totals() {
        // g = 2 x1 + x2: S_T1 = 4/5, S_T2 = 1/5.
        let space = unit_space(&["x1", "x2"]);
        let design = SaltelliDesign::build(&space, 4096, 7).unwrap();
        let m = FnModel::new(2, |x: &[f64]| 2.0 * x[0] + x[1]);
        let r = estimate_total_si(&m, &design).unwrap();
        assert!((r.inputs[0].s_total - 0.8).abs() < 0.03, "{}", r.inputs[0].s_total);
        assert!((r.inputs[1].s_total - 0.2).abs() < 0.03, "{}", r.inputs[1].s_total);
        assert!((r.variance - 5.0 / 12.0).abs() < 0.02);
        assert!((r.mean - 1.5).abs() < 0.02);
        for s in &r.inputs {
            assert!(s.ci[0] <= s.s_total && s.s_total <= s.ci[1]);
            assert!(s.ci[1] - s.ci[0] < 0.2);
        }
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn ishigami_totals_within_tolerance() {
        let space = InputSpace::new(
            ["x1", "x2", "x3"]
                .iter()
                .map(|n| InputDef::new(*n, Distribution::Uniform { lo: -PI, hi: PI }, Scale::Macro))
                .collect(),
        )
        .unwrap();
        let (a, b) = (7.0, 0.1);
        let m = FnModel::new(3, move |x: &[f64]| {
            x[0].sin() + a * x[1].sin().powi(2) + b * x[2].powi(4) * x[0].sin()
        });
        let p4 = PI.powi(4);
        let p8 = PI.powi(8);
        let var = a * a / 8.0 + b * p4 / 5.0 + b * b * p8 / 18.0 + 0.5;
        let v1 = 0.5 * (1.0 + b * p4 / 5.0).powi(2);
        let v13 = 8.0 * b * b * p8 / 225.0;
        let st = [(v1 + v13) / var, (a * a / 8.0) / var, v13 / var];

        let design = SaltelliDesign::build(&space, 1 << 14, 42).unwrap();
        let r = estimate_total_si(&m, &design).unwrap();
        for (est, exact) in r.inputs.iter().zip(st) {
            assert!(
                (est.s_total - exact).abs() < 0.035,
                "{}: {} vs {}",
                est.name,
                est.s_total,
                exact
            );
        }
    }

    #[test]
    fn estimates_are_deterministic_in_the_seed() {
        let space = unit_space(&["a", "b", "c"]);
        let m = FnModel::new(3, |x: &[f64]| x[0].exp() + x[1] * x[2]);
        let d1 = SaltelliDesign::build(&space, 256, 99).unwrap();
        let d2 = SaltelliDesign::build(&space, 256, 99).unwrap();
        let r1 = estimate_total_si(&m, &d1).unwrap();
        let r2 = estimate_total_si(&m, &d2).unwrap();
        for (a, b) in r1.inputs.iter().zip(&r2.inputs) {
            assert_eq!(a.s_total.to_bits(), b.s_total.to_bits());
            assert_eq!(a.ci[0].to_bits(), b.ci[0].to_bits());
            assert_eq!(a.ci[1].to_bits(), b.ci[1].to_bits());
        }
        let d3 = SaltelliDesign::build(&space, 256, 100).unwrap();
        let r3 = estimate_total_si(&m, &d3).unwrap();
        assert_ne!(r1.inputs[0].s_total.to_bits(), r3.inputs[0].s_total.to_bits());
    }

    #[test]
    fn equal_design_seeds_are_rejected() {
        let space = unit_space(&["a"]);
        assert!(SaltelliDesign::from_seeds(&space, 64, 5, 5).is_err());
        assert!(SaltelliDesign::from_seeds(&space, 64, 5, 6).is_ok());
    }

    #[test]
    fn constant_model_is_degenerate() {
        let space = unit_space(&["a", "b"]);
        let design = SaltelliDesign::build(&space, 64, 1).unwrap();
        let m = FnModel::new(2, |_: &[f64]| 3.25);
        assert!(matches!(estimate_total_si(&m, &design), Err(Error::Degenerate(_))));
    }

    #[test]
    fn moment_and_covariance_estimates_match_hand_values() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 5.0, 4.0];
        let m = moments_of_values(&xs).unwrap();
        assert_eq!(m.mean, 2.5);
        assert_eq!(m.second_moment, 7.5);
        assert_eq!(m.variance, 1.25);

        let c = estimate_covariance(&xs, &ys).unwrap();
        assert!((c.value - 3.5 / 3.0).abs() < 1e-15);
        assert!((c.std_error - 0.6038073644245595).abs() < 1e-12);

        assert!(moments_of_values(&[]).is_err());
        assert!(estimate_covariance(&xs, &ys[..3]).is_err());
    }

    #[test]
    fn moments_over_a_sample_match_the_distribution() {
        let space = unit_space(&["x"]);
        let s = space.sample(100_000, 17).unwrap();
        let m = estimate_moments(&FnModel::new(1, |x: &[f64]| x[0]), &s).unwrap();
        assert!((m.mean - 0.5).abs() < 0.01);
        assert!((m.second_moment - 1.0 / 3.0).abs() < 0.01);
        assert!((m.variance - 1.0 / 12.0).abs() < 0.002);

        let c = estimate_moments(&FnModel::new(1, |_: &[f64]| 2.0), &s).unwrap();
        assert_eq!(c.variance, 0.0);
    }

    #[test]
    fn cross_matrix_swaps_exactly_one_column() {
        let space = unit_space(&["a", "b", "c"]);
        let d = SaltelliDesign::build(&space, 32, 3).unwrap();
        let ab1 = d.cross(1);
        for i in 0..32 {
            assert_eq!(ab1.value(i, 0), d.matrix_a().value(i, 0));
            assert_eq!(ab1.value(i, 1), d.matrix_b().value(i, 1));
            assert_eq!(ab1.value(i, 2), d.matrix_a().value(i, 2));
        }
        assert_eq!(d.total_evals(), 32 * 5);
    }
}
