//! Transfers sensitivity indices of a single-scale component onto the
//! coupled model, one operation per supported coupling form.
//!
//! Conventions shared by every operation here:
//! - Factors are computed from the supplied moment estimates, never from
//!   symbolic structure, so reports are auditable against the same moments.
//! - A sign condition estimated from samples is declared satisfied only
//!   when its margin clears two standard errors of the covariance estimate;
//!   analytically supplied covariances have zero standard error, so an
//!   exact-zero margin still certifies.
//! - Index estimates are clamped at zero before entering bound formulas
//!   (small negative values are sampling noise); the raw estimate is kept
//!   in the report's `sf` field.
//! - When a gating condition fails, upper/lower bound fields are absent
//!   rather than filled with uncertifiable numbers. The one exception is
//!   the affine-linear form, whose factor is an unconditional identity;
//!   there the gate only withdraws the "coupled index does not exceed the
//!   component index" certificate used by reduction planning.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sobol::{CovEstimate, MomentEstimate, SensitivityResult};

/// First and second moments of one component. `second_moment` is the raw
/// integral (not centered); `variance` may come from a different estimator
/// than `second_moment - mean^2`, so both are carried.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComponentMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

impl ComponentMoments {
    pub fn new(mean: f64, second_moment: f64, variance: f64) -> Result<Self> {
        if !(mean.is_finite() && second_moment.is_finite() && variance.is_finite()) {
            return Err(Error::InconsistentMoments("non-finite component moment".into()));
        }
        if variance < 0.0 {
            return Err(Error::InconsistentMoments(format!("negative variance {variance}")));
        }
        let tol = 1e-9 * second_moment.abs().max(mean * mean).max(1.0);
        if second_moment < mean * mean - tol {
            return Err(Error::InconsistentMoments(format!(
                "second moment {second_moment} below squared mean {}",
                mean * mean
            )));
        }
        Ok(ComponentMoments { mean, second_moment, variance })
    }

    pub fn from_estimate(est: &MomentEstimate) -> Self {
        // MomentEstimate already clamps variance at second_moment - mean^2 >= 0.
        ComponentMoments {
            mean: est.mean,
            second_moment: est.second_moment,
            variance: est.variance,
        }
    }
}

/// Mean of the product of the macro component and an x-dependent micro
/// component; needed where the two share inputs and are therefore
/// correlated.
#[derive(Debug, Clone, Copy)]
pub struct CrossMoments {
    pub f_h2_mean: f64,
    pub std_error: f64,
}

impl CrossMoments {
    pub fn exact(f_h2_mean: f64) -> Self {
        CrossMoments { f_h2_mean, std_error: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingForm {
    Multiplicative,
    Additive,
    AffineLinear,
    SharedSum { k: usize },
    MixedAffine,
    LipschitzCoercive { l: f64, c: f64, g0: f64, h_is_vector: bool },
}

impl CouplingForm {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CouplingForm::SharedSum { k } if k < 1 => {
                Err(Error::config("shared-sum form needs at least one summand"))
            }
            CouplingForm::LipschitzCoercive { l, c, g0, .. } => {
                if !(c > 0.0 && l >= c) {
                    return Err(Error::config(format!(
                        "lipschitz-coercive constants must satisfy L >= c > 0, got L={l}, c={c}"
                    )));
                }
                if !g0.is_finite() {
                    return Err(Error::config("g0 must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CouplingForm::Multiplicative => "multiplicative",
            CouplingForm::Additive => "additive",
            CouplingForm::AffineLinear => "affine_linear",
            CouplingForm::SharedSum { .. } => "shared_sum",
            CouplingForm::MixedAffine => "mixed_affine",
            CouplingForm::LipschitzCoercive { .. } => "lipschitz_coercive",
        }
    }
}

/// A gating condition outcome. `margin` is the signed distance from the
/// condition's boundary; for the informational `alt_upper_factor` entry of
/// the affine form it instead carries the factor value itself.
#[derive(Debug, Clone, Serialize)]
pub struct Condition {
    pub name: String,
    pub ok: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputBound {
    pub name: String,
    pub sf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sg_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sg_lower: Option<f64>,
    pub exact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingBoundReport {
    pub form: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    pub conditions: Vec<Condition>,
    pub per_input: Vec<InputBound>,
}

impl CouplingBoundReport {
    pub fn conditions_ok(&self) -> bool {
        self.conditions.iter().all(|c| c.ok)
    }

    pub fn get(&self, name: &str) -> Option<&InputBound> {
        self.per_input.iter().find(|b| b.name == name)
    }

    /// The certified coupled-index upper bound usable by a reduction plan,
    /// or None when the form's conditions withdraw the certificate.
    ///
    /// For the exact forms (multiplicative, additive, gated affine) the
    /// factor never exceeds one, so the component index itself is the
    /// certificate; it stays valid when the factor varies along a series
    /// (the factor at one output time says nothing about the others). The
    /// inequality-only forms certify their computed bound value.
    pub fn plan_bound(&self, name: &str) -> Option<f64> {
        let b = self.get(name)?;
        if !self.conditions_ok() {
            return None;
        }
        match self.form.as_str() {
            "multiplicative" | "additive" | "affine_linear" => Some(b.sf.max(0.0)),
            _ => b.sg_upper,
        }
    }
}

fn clamped(s: f64) -> f64 {
    s.max(0.0)
}

/// g = f(x) * h(xi) with disjoint inputs. The transfer factor is exact:
///
///   lambda = (Ef^2 - (Ef)^2) / (Ef^2 - (Ef)^2 (Eh)^2 / Eh^2)
///
/// and always lies in (1 - (Ef)^2/Ef^2, 1]. The h-free lower factor
/// 1 - (Ef)^2/Ef^2 is emitted alongside.
pub fn bound_multiplicative(
    f: &ComponentMoments,
    h: &ComponentMoments,
    sf: &SensitivityResult,
) -> Result<CouplingBoundReport> {
    if !(f.variance > 0.0) {
        return Err(Error::degenerate("macro component has zero variance"));
    }
    if !(h.second_moment > 0.0) {
        return Err(Error::degenerate("micro component has zero second moment"));
    }
    let num = f.second_moment - f.mean * f.mean;
    let den = f.second_moment - f.mean * f.mean * (h.mean * h.mean) / h.second_moment;
    if den <= 0.0 || num <= 0.0 {
        return Err(Error::InconsistentMoments(format!(
            "multiplicative factor undefined: numerator {num}, denominator {den}"
        )));
    }
    let lambda = (num / den).min(1.0);
    check_unit_factor(lambda, "lambda")?;
    let lower = 1.0 - f.mean * f.mean / f.second_moment;
    let per_input = sf
        .inputs
        .iter()
        .map(|s| InputBound {
            name: s.name.clone(),
            sf: s.s_total,
            sg_upper: Some(lambda * clamped(s.s_total)),
            sg_lower: Some(lower * clamped(s.s_total)),
            exact: true,
        })
        .collect();
    Ok(CouplingBoundReport {
        form: "multiplicative".into(),
        factor: Some(lambda),
        conditions: Vec::new(),
        per_input,
    })
}

/// g = f(x) + h(xi) with disjoint inputs; mu = 1/(1 + Var(h)/Var(f)),
/// exact.
pub fn bound_additive(
    f: &ComponentMoments,
    h: &ComponentMoments,
    sf: &SensitivityResult,
) -> Result<CouplingBoundReport> {
    if !(f.variance > 0.0) {
        return Err(Error::degenerate("macro component has zero variance"));
    }
    let mu = 1.0 / (1.0 + h.variance / f.variance);
    check_unit_factor(mu, "mu")?;
    let per_input = sf
        .inputs
        .iter()
        .map(|s| InputBound {
            name: s.name.clone(),
            sf: s.s_total,
            sg_upper: Some(mu * clamped(s.s_total)),
            sg_lower: Some(mu * clamped(s.s_total)),
            exact: true,
        })
        .collect();
    Ok(CouplingBoundReport {
        form: "additive".into(),
        factor: Some(mu),
        conditions: Vec::new(),
        per_input,
    })
}

/// g = f(x) h1(xi) + h2(x_without_i, eta): h2 may depend on the macro
/// inputs other than the one under study, hence the cross moment. The
/// factor gamma is an unconditional identity; the sign condition
/// (Eh1) Cov(f, h2) >= 0 decides whether gamma <= 1 is guaranteed, which
/// is what downstream reduction uses. The report also carries the weaker
/// lower factor that needs no Cauchy-Schwarz defect, and, when the sign
/// condition fails, the applicability and value of the alternative upper
/// factor.
pub fn bound_affine(
    f: &ComponentMoments,
    h1: &ComponentMoments,
    h2: &ComponentMoments,
    cross: &CrossMoments,
    sf: &SensitivityResult,
) -> Result<CouplingBoundReport> {
    if !(h1.second_moment > 0.0) {
        return Err(Error::degenerate("h1 has zero second moment"));
    }
    let num = f.second_moment - f.mean * f.mean;
    if num <= 0.0 {
        return Err(Error::InconsistentMoments(format!(
            "macro component second moment {} does not exceed squared mean",
            f.second_moment
        )));
    }
    let var_h2 = (h2.second_moment - h2.mean * h2.mean).max(0.0);
    let cov = cross.f_h2_mean - f.mean * h2.mean;
    let q = h1.second_moment;
    let den = f.second_moment - f.mean * f.mean * (h1.mean * h1.mean) / q
        + var_h2 / q
        + 2.0 * h1.mean * cov / q;
    if den <= 0.0 {
        return Err(Error::InconsistentMoments(format!(
            "affine factor denominator {den} is not positive"
        )));
    }
    let gamma = num / den;

    let margin = h1.mean * cov;
    let margin_se = h1.mean.abs() * cross.std_error;
    let gate_ok = margin >= 2.0 * margin_se;
    let mut conditions = vec![Condition {
        name: "h1_mean_times_cov_f_h2_nonneg".into(),
        ok: gate_ok,
        margin,
    }];

    // Weaker lower factor computable without the Cauchy-Schwarz defect of
    // f; its denominator drops the cross term when the sign is uncertain.
    let lower_den = if gate_ok {
        f.second_moment + var_h2 / q + 2.0 * h1.mean * cov / q
    } else {
        f.second_moment + var_h2 / q
    };
    let lower = num / lower_den;

    if !gate_ok {
        // With the opposite covariance sign there is still an upper factor
        // provided its denominator stays positive; margin carries the
        // factor value when applicable, the failing denominator otherwise.
        let alt_den = num + var_h2 / q + 2.0 * h1.mean * cov / q;
        let applicable = alt_den > 0.0;
        conditions.push(Condition {
            name: "alt_upper_factor".into(),
            ok: applicable,
            margin: if applicable { num / alt_den } else { alt_den },
        });
    }

    let per_input = sf
        .inputs
        .iter()
        .map(|s| InputBound {
            name: s.name.clone(),
            sf: s.s_total,
            sg_upper: Some(gamma * clamped(s.s_total)),
            sg_lower: Some(lower * clamped(s.s_total)),
            exact: true,
        })
        .collect();
    Ok(CouplingBoundReport {
        form: "affine_linear".into(),
        factor: Some(gamma),
        conditions,
        per_input,
    })
}

/// g = f + h where f and h may share inputs. Requires Cov(f,h) >= 0; then
/// for each input
///
///   S^g <= (sqrt(S^f Var f) + sqrt(S^h Var h))^2 / (Var f + Var h)
///
/// which never exceeds 2 max{S^f, S^h}. With k > 1 summands only the
/// iterated loose bound 2^k max{...} survives.
pub fn bound_shared_sum(
    sf: &SensitivityResult,
    sh: &SensitivityResult,
    var_f: f64,
    var_h: f64,
    cov_fh: CovEstimate,
    k: usize,
) -> Result<CouplingBoundReport> {
    if k < 1 {
        return Err(Error::config("shared-sum bound needs at least one summand"));
    }
    if !(var_f > 0.0 && var_h > 0.0) {
        return Err(Error::degenerate("shared-sum bound needs both variances positive"));
    }
    align_names(sf, sh)?;
    let gate_ok = cov_fh.value >= 2.0 * cov_fh.std_error;
    let conditions = vec![Condition {
        name: "cov_f_h_nonneg".into(),
        ok: gate_ok,
        margin: cov_fh.value,
    }];
    let loose_factor = (1u64 << k) as f64;
    let per_input = sf
        .inputs
        .iter()
        .zip(&sh.inputs)
        .map(|(a, b)| {
            let sg_upper = gate_ok.then(|| {
                let (u, v) = (clamped(a.s_total), clamped(b.s_total));
                if k == 1 {
                    let root = (u * var_f).sqrt() + (v * var_h).sqrt();
                    root * root / (var_f + var_h)
                } else {
                    loose_factor * u.max(v)
                }
            });
            InputBound {
                name: a.name.clone(),
                sf: a.s_total,
                sg_upper,
                sg_lower: None,
                exact: false,
            }
        })
        .collect();
    Ok(CouplingBoundReport {
        form: "shared_sum".into(),
        factor: Some(loose_factor),
        conditions,
        per_input,
    })
}

/// g = f(x) h1(xi) + h2(x, eta) where h2 may share all macro inputs with
/// f. Needs index estimates for both f and h2 over the same inputs, and
/// the gate (Eh1) Cov(f, h2) >= 0.
pub fn bound_mixed_affine(
    sf: &SensitivityResult,
    sh2: &SensitivityResult,
    f: &ComponentMoments,
    h1: &ComponentMoments,
    h2: &ComponentMoments,
    cov_f_h2: CovEstimate,
) -> Result<CouplingBoundReport> {
    align_names(sf, sh2)?;
    let den = h1.second_moment * f.variance + f.mean * f.mean * h1.variance + h2.variance;
    if !(den > 0.0) {
        return Err(Error::degenerate("mixed-affine denominator is zero: flat components"));
    }
    let margin = h1.mean * cov_f_h2.value;
    let gate_ok = margin >= 2.0 * h1.mean.abs() * cov_f_h2.std_error;
    let conditions = vec![Condition {
        name: "h1_mean_times_cov_f_h2_nonneg".into(),
        ok: gate_ok,
        margin,
    }];
    let per_input = sf
        .inputs
        .iter()
        .zip(&sh2.inputs)
        .map(|(a, b)| {
            let sg_upper = gate_ok.then(|| {
                let (u, v) = (clamped(a.s_total), clamped(b.s_total));
                (u * h1.second_moment * f.variance
                    + v * h2.variance
                    + 2.0 * h1.mean * (u * f.variance * v * h2.variance).sqrt())
                    / den
            });
            InputBound {
                name: a.name.clone(),
                sf: a.s_total,
                sg_upper,
                sg_lower: None,
                exact: false,
            }
        })
        .collect();
    Ok(CouplingBoundReport {
        form: "mixed_affine".into(),
        factor: None,
        conditions,
        per_input,
    })
}

/// g = G(f(x), h(xi)) for G Lipschitz in its first argument (constant L)
/// and jointly coercive (constant c). L and c are analytically supplied by
/// the caller; estimating them from samples would not certify anything.
/// With Eg = g0 the bound multiplier is 2 L^2 Var(f) / (c^2 (Var f +
/// Var h) - g0^2), which at g0 = 0 reduces to 2 (L/c)^2 Var f / (Var f +
/// Var h). For vector-valued h, Var(h) is the sum over components.
pub fn bound_lipschitz(
    form: &CouplingForm,
    var_f: f64,
    var_h_components: &[f64],
    sf: &SensitivityResult,
) -> Result<CouplingBoundReport> {
    let (l, c, g0, h_is_vector) = match *form {
        CouplingForm::LipschitzCoercive { l, c, g0, h_is_vector } => (l, c, g0, h_is_vector),
        _ => return Err(Error::config("bound_lipschitz needs the lipschitz_coercive form")),
    };
    form.validate()?;
    if !h_is_vector && var_h_components.len() != 1 {
        return Err(Error::config("scalar h takes exactly one variance component"));
    }
    if var_h_components.is_empty() || var_h_components.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::config("h variance components must be nonnegative"));
    }
    if !(var_f > 0.0) {
        return Err(Error::degenerate("macro component has zero variance"));
    }
    let var_h: f64 = var_h_components.iter().sum();
    let coercive_margin = c * c * (var_f + var_h) - g0 * g0;
    let gate_ok = coercive_margin > 0.0;
    let conditions = vec![Condition {
        name: "coercivity_margin_positive".into(),
        ok: gate_ok,
        margin: coercive_margin,
    }];
    let factor = gate_ok.then(|| 2.0 * l * l * var_f / coercive_margin);
    let per_input = sf
        .inputs
        .iter()
        .map(|s| InputBound {
            name: s.name.clone(),
            sf: s.s_total,
            sg_upper: factor.map(|m| m * clamped(s.s_total)),
            sg_lower: None,
            exact: false,
        })
        .collect();
    Ok(CouplingBoundReport {
        form: "lipschitz_coercive".into(),
        factor,
        conditions,
        per_input,
    })
}

fn check_unit_factor(factor: f64, symbol: &str) -> Result<()> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::InconsistentMoments(format!(
            "{symbol} = {factor} outside (0, 1]; moment inputs are inconsistent"
        )));
    }
    Ok(())
}

fn align_names(a: &SensitivityResult, b: &SensitivityResult) -> Result<()> {
    if a.inputs.len() != b.inputs.len()
        || a.inputs.iter().zip(&b.inputs).any(|(x, y)| x.name != y.name)
    {
        return Err(Error::config(
            "component index sets must cover the same inputs in the same order",
        ));
    }
    Ok(())
}
