//! Dimension reduction: planning which inputs to fix, applying the plan,
//! and quantifying the error the fixing introduces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::CouplingBoundReport;
use crate::error::{Error, Result};
use crate::input::{InputSpace, Scale};
use crate::model::{evaluate_rows, FixedInputModel, ModelFunction};
use crate::rng::{subseed, Stream};
use crate::sobol::SensitivityResult;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedInput {
    pub name: String,
    /// The constant the input is pinned to; always the distribution mean.
    pub value: f64,
    /// The coupled-index value the decision was made against.
    pub s_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionPlan {
    pub threshold: f64,
    pub fixed: Vec<FixedInput>,
    pub kept: Vec<String>,
    /// True when every fixed input is backed by a certified coupling
    /// bound; false for plans built from component indices alone.
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Builds a plan from a coupling-bound report: every macro input whose
/// certified coupled-index bound falls below the threshold is fixed at its
/// distribution mean. Micro inputs and inputs without a certificate are
/// always kept.
pub fn make_plan(
    space: &InputSpace,
    bounds: &CouplingBoundReport,
    threshold: f64,
) -> Result<ReductionPlan> {
    check_threshold(threshold)?;
    let mut fixed = Vec::new();
    let mut kept = Vec::new();
    let mut any_certificate = false;
    for def in space.inputs() {
        if def.scale == Scale::Macro && bounds.get(&def.name).is_none() {
            return Err(Error::config(format!(
                "bound report does not cover macro input '{}'",
                def.name
            )));
        }
        match bounds.plan_bound(&def.name) {
            Some(b) => {
                any_certificate = true;
                // Only macro inputs are candidates: a certificate on a
                // micro input does not make fixing it meaningful.
                if def.scale == Scale::Macro && b < threshold {
                    fixed.push(FixedInput { name: def.name.clone(), value: def.dist.mean(), s_bound: b });
                } else {
                    kept.push(def.name.clone());
                }
            }
            None => kept.push(def.name.clone()),
        }
    }
    let mut warnings = Vec::new();
    if !any_certificate {
        warnings.push(
            "no certified bounds in the report; no input can be fixed".to_string(),
        );
    }
    Ok(ReductionPlan { threshold, fixed, kept, certified: true, warnings })
}

/// Builds a plan straight from component sensitivities, without any
/// coupling certificate. This is the unsound shortcut the toolkit exists
/// to guard against; it is provided so its failure can be demonstrated.
pub fn naive_plan(
    space: &InputSpace,
    sf: &SensitivityResult,
    threshold: f64,
) -> Result<ReductionPlan> {
    check_threshold(threshold)?;
    let mut fixed = Vec::new();
    let mut kept = Vec::new();
    for def in space.inputs() {
        match sf.get(&def.name) {
            Some(s) if def.scale == Scale::Macro && s.s_total < threshold => {
                fixed.push(FixedInput {
                    name: def.name.clone(),
                    value: def.dist.mean(),
                    s_bound: s.s_total,
                })
            }
            _ => kept.push(def.name.clone()),
        }
    }
    Ok(ReductionPlan {
        threshold,
        fixed,
        kept,
        certified: false,
        warnings: vec![
            "plan built from component indices alone; fixing is not certified for the coupled model"
                .to_string(),
        ],
    })
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold.is_finite() && (0.0..1.0).contains(&threshold)) {
        return Err(Error::config(format!("threshold must lie in [0, 1), got {threshold}")));
    }
    Ok(())
}

fn check_plan(space: &InputSpace, plan: &ReductionPlan) -> Result<()> {
    for f in &plan.fixed {
        if space.index_of(&f.name).is_none() {
            return Err(Error::config(format!("plan fixes unknown input '{}'", f.name)));
        }
    }
    for k in &plan.kept {
        if space.index_of(k).is_none() {
            return Err(Error::config(format!("plan keeps unknown input '{}'", k)));
        }
    }
    if plan.fixed.len() + plan.kept.len() != space.dim() {
        return Err(Error::config("plan does not partition the input space"));
    }
    if plan.fixed.len() == space.dim() {
        return Err(Error::config("plan fixes every input; nothing left to propagate"));
    }
    Ok(())
}

/// The input space remaining after a plan: kept inputs in their original
/// order. Fixed inputs are not represented as zero-width distributions;
/// they become constants injected by `apply_plan`.
pub fn reduce_space(space: &InputSpace, plan: &ReductionPlan) -> Result<InputSpace> {
    check_plan(space, plan)?;
    let kept: Vec<_> = space
        .inputs()
        .iter()
        .filter(|d| !plan.fixed.iter().any(|f| f.name == d.name))
        .cloned()
        .collect();
    InputSpace::new(kept)
}

/// Wraps the full-space model so it consumes reduced-space points, with
/// the plan's fixed inputs injected as constants.
pub fn apply_plan<M: ModelFunction>(
    model: M,
    space: &InputSpace,
    plan: &ReductionPlan,
) -> Result<FixedInputModel<M>> {
    check_plan(space, plan)?;
    if model.arity() != space.dim() {
        return Err(Error::config(format!(
            "model arity {} does not match space dimension {}",
            model.arity(),
            space.dim()
        )));
    }
    let pairs: Vec<(usize, f64)> = plan
        .fixed
        .iter()
        .map(|f| (space.index_of(&f.name).unwrap(), f.value))
        .collect();
    FixedInputModel::new(model, &pairs)
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaEstimate {
    pub input_name: String,
    pub x0: f64,
    /// Mean squared difference between the model and the model with the
    /// input pinned at x0, normalized by the model's output variance.
    pub delta: f64,
    pub n: usize,
}

/// Monte Carlo estimate of the normalized fixing error for one input.
pub fn estimate_delta<M: ModelFunction>(
    model: &M,
    space: &InputSpace,
    input_index: usize,
    x0: f64,
    n: usize,
    seed: u64,
) -> Result<DeltaEstimate> {
    let d = space.dim();
    if input_index >= d {
        return Err(Error::config(format!(
            "input index {input_index} out of range for dimension {d}"
        )));
    }
    let def = &space.inputs()[input_index];
    if !def.dist.contains(x0) {
        return Err(Error::config(format!(
            "x0 = {x0} lies outside the support of input '{}'",
            def.name
        )));
    }
    if n < 2 {
        return Err(Error::config(format!("delta estimate needs n >= 2, got {n}")));
    }
    let sample = space.sample_stream(n, Stream::new(seed, "delta"));
    let g = evaluate_rows(model, &sample)?;
    let g_fixed = evaluate_rows(model, &sample.with_constant_column(input_index, x0))?;

    let mean = g.iter().sum::<f64>() / n as f64;
    let var = g
        .iter()
        .map(|x| {
            let e = x - mean;
            e * e
        })
        .sum::<f64>()
        / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::degenerate("model output has zero variance; delta is undefined"));
    }
    let msd = g.iter().zip(&g_fixed).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
    Ok(DeltaEstimate { input_name: def.name.clone(), x0, delta: msd / var, n })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub input_name: String,
    pub eps: f64,
    pub trials: usize,
    /// Fraction of sampled fixing points whose delta stayed below
    /// bound_value.
    pub fraction_within: f64,
    /// (1 + 1/eps) * s_total.
    pub bound_value: f64,
    /// 1 - eps minus two binomial standard errors; the pass cutoff.
    pub threshold_fraction: f64,
    pub passed: bool,
}

/// Empirical check of the probabilistic guarantee: fixing points x0 drawn
/// from the input's own distribution should satisfy
/// delta(x0) < (1 + 1/eps) * s_total with probability above 1 - eps. The
/// pass rule allows two binomial standard errors of slack for the finite
/// trial count.
pub fn check_probabilistic_bound<M: ModelFunction>(
    model: &M,
    space: &InputSpace,
    input_index: usize,
    s_total: f64,
    eps: f64,
    trials: usize,
    n: usize,
    seed: u64,
) -> Result<BoundCheck> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::config(format!("eps must lie in (0, 1), got {eps}")));
    }
    if trials < 50 {
        return Err(Error::config(format!("need at least 50 trials, got {trials}")));
    }
    if input_index >= space.dim() {
        return Err(Error::config(format!(
            "input index {input_index} out of range for dimension {}",
            space.dim()
        )));
    }
    let def = &space.inputs()[input_index];
    let x0_stream = Stream::new(seed, "bound-check-x0");
    let deltas: Vec<Result<DeltaEstimate>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let x0 = def.dist.quantile(x0_stream.unit(t as u64));
            estimate_delta(model, space, input_index, x0, n, subseed(seed, &format!("trial-{t}")))
        })
        .collect();
    let bound_value = (1.0 + 1.0 / eps) * s_total;
    let mut within = 0usize;
    for r in deltas {
        if r?.delta < bound_value {
            within += 1;
        }
    }
    let fraction_within = within as f64 / trials as f64;
    let threshold_fraction = 1.0 - eps - 2.0 * (eps * (1.0 - eps) / trials as f64).sqrt();
    Ok(BoundCheck {
        input_name: def.name.clone(),
        eps,
        trials,
        fraction_within,
        bound_value,
        threshold_fraction,
        passed: fraction_within > threshold_fraction,
    })
}
