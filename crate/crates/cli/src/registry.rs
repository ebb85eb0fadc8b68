//! The named models `--model` accepts, and the coupled structure (macro
//! component, spaces, series view) behind the three end-to-end ones.

use senscale::*;

// The glob pulls in the crate's single-parameter Result alias; commands
// here carry their own error type.
use std::result::Result;

use crate::config::InputOverride;
use crate::CliError;

/// End time of the slow/fast system's pinned configuration.
pub(crate) const OU_T_END: f64 = 20.0;
/// Output time of the scalar view of the reaction micro factor.
pub(crate) const REACTION_H_TIME: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    ReactionF,
    ReactionH,
    Reaction,
    OuF,
    Ou,
    CounterexampleF,
    Counterexample,
}

pub const MODEL_NAMES: &[&str] = &[
    "reaction-f",
    "reaction-h",
    "reaction",
    "ou-f",
    "ou",
    "counterexample-f",
    "counterexample",
];

impl ModelKind {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "reaction-f" => ModelKind::ReactionF,
            "reaction-h" => ModelKind::ReactionH,
            "reaction" => ModelKind::Reaction,
            "ou-f" => ModelKind::OuF,
            "ou" => ModelKind::Ou,
            "counterexample-f" => ModelKind::CounterexampleF,
            "counterexample" => ModelKind::Counterexample,
            other => {
                return Err(CliError::Config(format!(
                    "unknown model '{other}' (expected one of: {})",
                    MODEL_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::ReactionF => "reaction-f",
            ModelKind::ReactionH => "reaction-h",
            ModelKind::Reaction => "reaction",
            ModelKind::OuF => "ou-f",
            ModelKind::Ou => "ou",
            ModelKind::CounterexampleF => "counterexample-f",
            ModelKind::Counterexample => "counterexample",
        }
    }

    /// Input space of the model as analyzed directly.
    pub fn space(&self) -> InputSpace {
        match self {
            ModelKind::ReactionF => reaction_f_space(),
            ModelKind::ReactionH => reaction_h_space(),
            ModelKind::Reaction => reaction_space(),
            ModelKind::OuF => ou_f_space(),
            ModelKind::Ou => ou_space(),
            ModelKind::CounterexampleF => counterexample_f_space(),
            ModelKind::Counterexample => counterexample_space(),
        }
    }

    /// Scalar view for `analyze`: the coupled models evaluate at their
    /// final output time.
    pub fn scalar(&self, beta: f64) -> Result<Box<dyn ModelFunction>, CliError> {
        Ok(match self {
            ModelKind::ReactionF => Box::new(ReactionF),
            ModelKind::ReactionH => Box::new(ReactionH { t: REACTION_H_TIME }),
            ModelKind::Reaction => Box::new(ReactionModel::new()),
            ModelKind::OuF => Box::new(OUDrift),
            ModelKind::Ou => Box::new(OUModel::new(OU_T_END)?),
            ModelKind::CounterexampleF => Box::new(CounterexampleF { beta: checked_beta(beta)? }),
            ModelKind::Counterexample => Box::new(CounterexampleModel::new(beta)?),
        })
    }

    /// The coupled structure behind the pipeline commands, or an error
    /// naming the bare component.
    pub fn coupled(&self, beta: f64, overrides: &[InputOverride]) -> Result<Coupled, CliError> {
        let (f, f_space, series): (Box<dyn ModelFunction>, _, SeriesEval) = match self {
            ModelKind::Reaction => (
                Box::new(ReactionF),
                reaction_f_space(),
                SeriesEval::Series(Box::new(ReactionModel::new())),
            ),
            ModelKind::Ou => (
                Box::new(OUDrift),
                ou_f_space(),
                SeriesEval::Series(Box::new(OUModel::new(OU_T_END)?)),
            ),
            ModelKind::Counterexample => (
                Box::new(CounterexampleF { beta: checked_beta(beta)? }),
                counterexample_f_space(),
                SeriesEval::Scalar(Box::new(CounterexampleModel::new(beta)?)),
            ),
            other => {
                return Err(CliError::Config(format!(
                    "model '{}' is a bare component; this command needs one of the coupled \
                     models (reaction, ou, counterexample)",
                    other.name()
                )))
            }
        };
        let full_space = self.space();
        Ok(Coupled {
            kind: *self,
            f,
            f_space: apply_overrides(&f_space, overrides, false)?,
            full_space: apply_overrides(&full_space, overrides, true)?,
            series,
        })
    }
}

fn checked_beta(beta: f64) -> Result<f64, CliError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(CliError::Config(format!("beta must be positive and finite, got {beta}")));
    }
    Ok(beta)
}

/// A coupled model ready for the bound/reduce/validate pipeline.
pub struct Coupled {
    pub kind: ModelKind,
    /// Macro component whose indices the certificates transfer.
    pub f: Box<dyn ModelFunction>,
    pub f_space: InputSpace,
    pub full_space: InputSpace,
    pub series: SeriesEval,
}

/// Time-resolved view of the full model. Scalar-only models are treated
/// as a single output time at t = 0.
pub enum SeriesEval {
    Series(Box<dyn SeriesModel>),
    Scalar(Box<dyn ModelFunction>),
}

impl SeriesEval {
    pub fn times(&self) -> Vec<f64> {
        match self {
            SeriesEval::Series(m) => m.times().to_vec(),
            SeriesEval::Scalar(_) => vec![0.0],
        }
    }

    pub fn eval(&self, x: &[f64]) -> senscale::Result<Vec<f64>> {
        match self {
            SeriesEval::Series(m) => m.eval_series(x),
            SeriesEval::Scalar(m) => {
                let v = m.eval(x);
                if !v.is_finite() {
                    return Err(Error::Degenerate("model output is not finite".into()));
                }
                Ok(vec![v])
            }
        }
    }
}

/// Rebuilds a space with the configured distribution overrides applied.
/// Names missing from this space are skipped unless `strict`; the full
/// space is checked strictly so a typo cannot pass silently.
pub(crate) fn apply_overrides(
    space: &InputSpace,
    overrides: &[InputOverride],
    strict: bool,
) -> Result<InputSpace, CliError> {
    if overrides.is_empty() {
        return InputSpace::new(space.inputs().to_vec()).map_err(CliError::Core);
    }
    let mut defs = space.inputs().to_vec();
    for ov in overrides {
        let Some(def) = defs.iter_mut().find(|d| d.name == ov.name) else {
            if strict {
                return Err(CliError::Config(format!(
                    "input override '{}' does not match any input of this model",
                    ov.name
                )));
            }
            continue;
        };
        def.dist = parse_dist(ov)?;
    }
    InputSpace::new(defs).map_err(CliError::Core)
}

fn parse_dist(ov: &InputOverride) -> Result<Distribution, CliError> {
    let need = |v: Option<f64>, field: &str| {
        v.ok_or_else(|| {
            CliError::Config(format!(
                "input override '{}' ({}) is missing '{field}'",
                ov.name, ov.dist
            ))
        })
    };
    let dist = match ov.dist.as_str() {
        "uniform" => Distribution::Uniform { lo: need(ov.lo, "lo")?, hi: need(ov.hi, "hi")? },
        "normal" => {
            Distribution::Normal { mean: need(ov.mean, "mean")?, variance: need(ov.variance, "variance")? }
        }
        other => {
            return Err(CliError::Config(format!(
                "input override '{}' has unknown distribution '{other}' (use uniform or normal)",
                ov.name
            )))
        }
    };
    dist.validate().map_err(CliError::Core)?;
    Ok(dist)
}
