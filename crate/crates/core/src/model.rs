//! The model abstraction shared by estimators and the reduction pipeline.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::input::SampleMatrix;

/// A deterministic scalar model. Implementations must be pure: the same
/// point always produces the same output, which is what allows rows to be
/// evaluated in parallel with results identical to the serial order.
pub trait ModelFunction: Sync {
    /// Number of inputs the model consumes.
    fn arity(&self) -> usize;

    /// Evaluates the model at one point; `x.len() == self.arity()`.
    fn eval(&self, x: &[f64]) -> f64;
}

impl<M: ModelFunction + ?Sized> ModelFunction for &M {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
}

impl<M: ModelFunction + ?Sized> ModelFunction for Box<M> {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
}

/// Wraps a closure as a model of a declared arity.
pub struct FnModel<F> {
    arity: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnModel<F> {
    pub fn new(arity: usize, f: F) -> Self {
        FnModel { arity, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> ModelFunction for FnModel<F> {
    fn arity(&self) -> usize {
        self.arity
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// A model with some of its inputs pinned to constants. The reduced model
/// exposes only the remaining inputs, in their original relative order;
/// evaluation re-inserts the constants before calling the inner model.
pub struct FixedInputModel<M> {
    inner: M,
    full_arity: usize,
    /// (full-space index, pinned value), sorted by index.
    fixed: Vec<(usize, f64)>,
    /// Full-space indices of the kept inputs, in order.
    kept: Vec<usize>,
}

impl<M: ModelFunction> FixedInputModel<M> {
    pub fn new(inner: M, fixed: &[(usize, f64)]) -> Result<Self> {
        let full_arity = inner.arity();
        let mut fx: Vec<(usize, f64)> = fixed.to_vec();
        fx.sort_by_key(|&(i, _)| i);
        for w in fx.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::config(format!("input {} fixed twice", w[0].0)));
            }
        }
        if let Some(&(i, _)) = fx.iter().find(|&&(i, _)| i >= full_arity) {
            return Err(Error::config(format!(
                "fixed index {i} out of range for arity {full_arity}"
            )));
        }
        if fx.len() >= full_arity {
            return Err(Error::config("cannot fix every input of a model"));
        }
        let kept = (0..full_arity).filter(|i| !fx.iter().any(|&(j, _)| j == *i)).collect();
        Ok(FixedInputModel { inner, full_arity, fixed: fx, kept })
    }

    pub fn kept_indices(&self) -> &[usize] {
        &self.kept
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: ModelFunction> ModelFunction for FixedInputModel<M> {
    fn arity(&self) -> usize {
        self.kept.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.kept.len());
        let mut full = vec![0.0; self.full_arity];
        for &(i, v) in &self.fixed {
            full[i] = v;
        }
        for (slot, &xi) in self.kept.iter().zip(x) {
            full[*slot] = xi;
        }
        self.inner.eval(&full)
    }
}

/// Evaluates the model on every row, in parallel, preserving row order.
/// Fails on the first non-finite output (lowest row index).
pub fn evaluate_rows<M: ModelFunction>(model: &M, sample: &SampleMatrix) -> Result<Vec<f64>> {
    if sample.n_cols() != model.arity() {
        return Err(Error::config(format!(
            "model arity {} does not match sample width {}",
            model.arity(),
            sample.n_cols()
        )));
    }
    let out: Vec<f64> = (0..sample.n_rows())
        .into_par_iter()
        .map(|i| model.eval(sample.row(i)))
        .collect();
    check_finite(&out)?;
    Ok(out)
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::{Distribution, InputDef, InputSpace, Scale};

    fn space(d: usize) -> InputSpace {
        InputSpace::new(
            (0..d)
                .map(|i| {
                    InputDef::new(
                        format!("x{i}"),
                        Distribution::Uniform { lo: 0.0, hi: 1.0 },
                        Scale::Macro,
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn parallel_evaluation_matches_serial() {
        let m = FnModel::new(3, |x: &[f64]| x[0] * x[1] + x[2].sin());
        let s = space(3).sample(500, 11).unwrap();
        let par = evaluate_rows(&m, &s).unwrap();
        let ser: Vec<f64> = (0..s.n_rows()).map(|i| m.eval(s.row(i))).collect();
        assert_eq!(par, ser);
    }

    #[test]
    fn non_finite_output_reports_first_row() {
        let m = FnModel::new(1, |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { x[0] });
        let s = space(1).sample(100, 5).unwrap();
        let first_bad = (0..100).find(|&i| s.row(i)[0] > 0.5).unwrap();
        match evaluate_rows(&m, &s) {
            Err(Error::NonFinite { row }) => assert_eq!(row, first_bad),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn arity_mismatch_is_a_config_error() {
        let m = FnModel::new(2, |x: &[f64]| x[0] + x[1]);
        let s = space(3).sample(16, 1).unwrap();
        assert!(matches!(evaluate_rows(&m, &s), Err(Error::Config(_))));
    }

    #[test]
    fn fixed_input_model_reinserts_constants() {
        let m = FnModel::new(3, |x: &[f64]| x[0] + 10.0 * x[1] + 100.0 * x[2]);
        let fixed = FixedInputModel::new(m, &[(1, 0.5)]).unwrap();
        assert_eq!(fixed.arity(), 2);
        assert_eq!(fixed.kept_indices(), &[0, 2]);
        assert_eq!(fixed.eval(&[1.0, 2.0]), 1.0 + 5.0 + 200.0);
    }

    #[test]
    fn fixed_input_model_rejects_bad_requests() {
        let mk = || FnModel::new(2, |x: &[f64]| x[0] + x[1]);
        assert!(FixedInputModel::new(mk(), &[(0, 0.0), (0, 1.0)]).is_err());
        assert!(FixedInputModel::new(mk(), &[(5, 0.0)]).is_err());
        assert!(FixedInputModel::new(mk(), &[(0, 0.0), (1, 0.0)]).is_err());
    }
}
