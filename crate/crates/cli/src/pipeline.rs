//! The pipeline behind the subcommands: sensitivity estimation, coupling
//! bounds, reduction plans, and the gated full-vs-reduced comparison.
//! Every random quantity is keyed off the run seed through named
//! substreams, so identical settings produce identical files.

use senscale::rng::{subseed, Stream};
use senscale::sobol::moments_of_values;
use senscale::stats::ecdf_at;
use senscale::*;
use std::result::Result;

use crate::config::Settings;
use crate::registry::{Coupled, ModelKind, OU_T_END, REACTION_H_TIME};
use crate::CliError;

/// Inner sample size of each delta estimate in the probabilistic bound
/// check; trials multiply this, so it stays moderate.
const BOUND_CHECK_N: usize = 1024;

pub fn estimate_sensitivity(
    model: &dyn ModelFunction,
    space: &InputSpace,
    n: usize,
    seed: u64,
) -> Result<SensitivityResult, CliError> {
    let design = SaltelliDesign::build(space, n, seed)?;
    Ok(estimate_total_si(&model, &design)?)
}

/// Certified coupling bounds for a coupled model, using the supplied
/// component sensitivities. The counterexample has no certified form.
pub fn compute_bounds(
    coupled: &Coupled,
    sens: &SensitivityResult,
    settings: &Settings,
) -> Result<CouplingBoundReport, CliError> {
    let n = settings.n;
    let seed = settings.seed;
    match coupled.kind {
        ModelKind::Reaction => {
            let fs = coupled.f_space.sample(n, subseed(seed, "bound-f"))?;
            let f_cm = ComponentMoments::from_estimate(&estimate_moments(&&*coupled.f, &fs)?);
            // The micro factor at the final output time; the certificate
            // make_plan consumes is time-uniform regardless.
            let h = ReactionH { t: REACTION_H_TIME };
            let hs = reaction_h_space().sample(n, subseed(seed, "bound-h"))?;
            let h_cm = ComponentMoments::from_estimate(&estimate_moments(&h, &hs)?);
            Ok(bound_multiplicative(&f_cm, &h_cm, sens)?)
        }
        ModelKind::Ou => {
            // z(T) = [z0 + T f(x)] + [integrated fast noise]: an exact
            // additive split with disjoint inputs, since the fast variable
            // evolves without reference to x.
            let ou = OUModel::new(OU_T_END)?;
            let t = ou.t_end();
            let z0 = ou.z0;
            let drift_part = FnModel::new(4, move |x: &[f64]| z0 + t * OUDrift.eval(x));
            let fs = coupled.f_space.sample(n, subseed(seed, "bound-f"))?;
            let f_cm = ComponentMoments::from_estimate(&estimate_moments(&drift_part, &fs)?);

            let noise_stream = Stream::new(seed, "bound-h");
            let mut values = Vec::with_capacity(n);
            for i in 0..n {
                let row = [0.0, 0.0, 0.0, 0.0, noise_stream.unit(i as u64)];
                let z = ModelFunction::eval(&ou, &row);
                values.push(z - ou.z0);
            }
            if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                return Err(CliError::Core(Error::NonFinite { row: bad }));
            }
            let h_cm = ComponentMoments::from_estimate(&moments_of_values(&values)?);
            Ok(bound_additive(&f_cm, &h_cm, sens)?)
        }
        ModelKind::Counterexample => Err(CliError::Config(
            "no certified coupling form exists for model 'counterexample'; its reduction \
             can only be naive"
                .into(),
        )),
        _ => unreachable!("coupled() rejects bare components"),
    }
}

/// Everything a validation run produces.
pub struct PipelineOut {
    pub sensitivity: SensitivityResult,
    pub bounds: Option<CouplingBoundReport>,
    pub plan: ReductionPlan,
    pub series: Vec<SeriesRow>,
    pub ks: TestResult,
    pub levene: TestResult,
    pub bound_check: Option<BoundCheck>,
    pub pdf: PdfTable,
    pub gates: Gates,
}

#[derive(Debug, serde::Serialize)]
pub struct Gates {
    pub max_rel_err_std: ValueGate,
    pub min_p_value: PValueGate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_check: Option<FlagGate>,
    pub passed: bool,
}

#[derive(Debug, serde::Serialize)]
pub struct ValueGate {
    pub limit: f64,
    pub observed: f64,
    pub passed: bool,
}

#[derive(Debug, serde::Serialize)]
pub struct PValueGate {
    pub limit: f64,
    pub ks: f64,
    pub levene: f64,
    pub passed: bool,
}

#[derive(Debug, serde::Serialize)]
pub struct FlagGate {
    pub passed: bool,
}

/// The pdf/cdf comparison table at the final output time, on shared bins
/// spanning the pooled range of both samples.
pub struct PdfTable {
    pub centers: Vec<f64>,
    pub ecdf_full: Vec<f64>,
    pub ecdf_reduced: Vec<f64>,
    pub pdf_full: Vec<f64>,
    pub pdf_reduced: Vec<f64>,
}

pub fn run_pipeline(coupled: &Coupled, settings: &Settings) -> Result<PipelineOut, CliError> {
    let sensitivity =
        estimate_sensitivity(&*coupled.f, &coupled.f_space, settings.n, settings.seed)?;

    let bounds = match coupled.kind {
        ModelKind::Counterexample => None,
        _ => Some(compute_bounds(coupled, &sensitivity, settings)?),
    };

    let plan = match &bounds {
        Some(report) => make_plan(&coupled.full_space, report, settings.threshold)?,
        None => naive_plan(&coupled.full_space, &sensitivity, settings.threshold)?,
    };

    let (full, reduced) = sample_series(coupled, &plan, settings)?;
    let series = compare_series(&full, &reduced)?;
    let last = full.len() - 1;
    let ks = ks_two_sample(full.at(last), reduced.at(last))?;
    let levene = levene(full.at(last), reduced.at(last))?;
    let pdf = pdf_table(full.at(last), reduced.at(last), settings.bins);

    let bound_check = match &settings.delta_input {
        None => None,
        Some(name) => {
            let idx = coupled.f_space.index_of(name).ok_or_else(|| {
                CliError::Config(format!(
                    "delta input '{name}' is not an input of the macro component"
                ))
            })?;
            let s = sensitivity
                .get(name)
                .map(|i| i.s_total)
                .expect("index estimated for every component input");
            let eps = settings.eps.unwrap_or(0.1);
            let trials = settings.trials.unwrap_or(100);
            Some(check_probabilistic_bound(
                &&*coupled.f,
                &coupled.f_space,
                idx,
                s,
                eps,
                trials,
                BOUND_CHECK_N,
                subseed(settings.seed, "bound-check"),
            )?)
        }
    };

    let worst_rel = series
        .iter()
        .filter(|r| !r.flagged)
        .map(|r| r.rel_err_std)
        .fold(0.0f64, f64::max);
    let rel_gate = ValueGate {
        limit: settings.max_rel_err_std,
        observed: worst_rel,
        passed: worst_rel <= settings.max_rel_err_std,
    };
    let p_gate = PValueGate {
        limit: settings.min_p_value,
        ks: ks.p_value,
        levene: levene.p_value,
        passed: ks.p_value > settings.min_p_value && levene.p_value > settings.min_p_value,
    };
    let bc_gate = bound_check.as_ref().map(|b| FlagGate { passed: b.passed });
    let passed = rel_gate.passed && p_gate.passed && bc_gate.as_ref().is_none_or(|g| g.passed);
    let gates = Gates { max_rel_err_std: rel_gate, min_p_value: p_gate, bound_check: bc_gate, passed };

    Ok(PipelineOut { sensitivity, bounds, plan, series, ks, levene, bound_check, pdf, gates })
}

/// Draws the full-space and reduced samples (independent streams) and
/// evaluates the series view on both; the reduced rows get the plan's
/// constants written over the fixed coordinates.
fn sample_series(
    coupled: &Coupled,
    plan: &ReductionPlan,
    settings: &Settings,
) -> Result<(SampleSeries, SampleSeries), CliError> {
    let n = settings.validate_n;
    let space = &coupled.full_space;
    let times = coupled.series.times();
    let fixed: Vec<(usize, f64)> = plan
        .fixed
        .iter()
        .map(|f| (space.index_of(&f.name).expect("plan names come from this space"), f.value))
        .collect();

    let full_rows = space.sample(n, subseed(settings.seed, "validate-full"))?;
    let reduced_rows = space.sample(n, subseed(settings.seed, "validate-reduced"))?;

    let mut full = vec![Vec::with_capacity(n); times.len()];
    let mut reduced = vec![Vec::with_capacity(n); times.len()];
    let mut point = vec![0.0; space.dim()];
    for i in 0..n {
        let z = coupled.series.eval(full_rows.row(i))?;
        for (k, v) in z.iter().enumerate() {
            full[k].push(*v);
        }
        point.copy_from_slice(reduced_rows.row(i));
        for &(j, v) in &fixed {
            point[j] = v;
        }
        let z = coupled.series.eval(&point)?;
        for (k, v) in z.iter().enumerate() {
            reduced[k].push(*v);
        }
    }
    Ok((SampleSeries::new(times.clone(), full)?, SampleSeries::new(times, reduced)?))
}

fn pdf_table(full: &[f64], reduced: &[f64], bins: usize) -> PdfTable {
    let lo = full.iter().chain(reduced).copied().fold(f64::INFINITY, f64::min);
    let hi = full.iter().chain(reduced).copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) || bins == 0 {
        return PdfTable {
            centers: Vec::new(),
            ecdf_full: Vec::new(),
            ecdf_reduced: Vec::new(),
            pdf_full: Vec::new(),
            pdf_reduced: Vec::new(),
        };
    }
    let pdf_full = senscale::stats::histogram_density(full, lo, hi, bins);
    let pdf_reduced = senscale::stats::histogram_density(reduced, lo, hi, bins);
    let mut sf = full.to_vec();
    sf.sort_by(f64::total_cmp);
    let mut sr = reduced.to_vec();
    sr.sort_by(f64::total_cmp);
    let width = (hi - lo) / bins as f64;
    let centers: Vec<f64> = (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
    let ecdf_full = centers.iter().map(|&c| ecdf_at(&sf, c)).collect();
    let ecdf_reduced = centers.iter().map(|&c| ecdf_at(&sr, c)).collect();
    PdfTable { centers, ecdf_full, ecdf_reduced, pdf_full, pdf_reduced }
}

pub fn gate_failure_message(out: &PipelineOut, settings: &Settings) -> String {
    let mut parts = Vec::new();
    if !out.gates.max_rel_err_std.passed {
        parts.push(format!(
            "rel_err_std {:.4} exceeds {}",
            out.gates.max_rel_err_std.observed, settings.max_rel_err_std
        ));
    }
    if !out.gates.min_p_value.passed {
        parts.push(format!(
            "distribution tests rejected (ks p {:.3e}, levene p {:.3e}, floor {})",
            out.ks.p_value, out.levene.p_value, settings.min_p_value
        ));
    }
    if let Some(g) = &out.gates.bound_check {
        if !g.passed {
            parts.push("probabilistic bound check failed".to_string());
        }
    }
    let mut msg = format!("validation gates failed: {}", parts.join("; "));
    if !out.plan.certified {
        msg.push_str(" [plan was not certified: no coupling bound backs these fixes]");
    }
    msg
}
