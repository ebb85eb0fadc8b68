//! Input declarations and deterministic sampling.
//!
//! An [`InputSpace`] is an ordered list of named, independent scalar inputs,
//! each with a marginal distribution and a scale label (macro inputs are the
//! slow model parameters, micro inputs the fast ones). Sampling is a pure
//! function of (space, n, seed): the matrix value at (row, column) is derived
//! from a counter-based stream, never from sequential generator state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::special::probit;

/// Which side of the scale separation an input belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Macro,
    Micro,
}

/// Marginal distribution of a single input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    /// Parameterized by mean and variance (not standard deviation).
    Normal { mean: f64, variance: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
                    return Err(Error::config(format!(
                        "uniform bounds must be finite with lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
            Distribution::Normal { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || !(variance > 0.0) {
                    return Err(Error::config(format!(
                        "normal requires finite mean and variance > 0, got ({mean}, {variance})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::Normal { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            Distribution::Normal { variance, .. } => variance,
        }
    }

    /// Inverse CDF; `u` must lie in the open interval (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * u,
            Distribution::Normal { mean, variance } => mean + variance.sqrt() * probit(u),
        }
    }

    /// Whether `x` lies in the support.
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Distribution::Uniform { lo, hi } => x >= lo && x <= hi,
            Distribution::Normal { .. } => x.is_finite(),
        }
    }
}

/// One named input.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputDef {
    pub name: String,
    pub dist: Distribution,
    pub scale: Scale,
}

impl InputDef {
    pub fn new(name: impl Into<String>, dist: Distribution, scale: Scale) -> Self {
        InputDef { name: name.into(), dist, scale }
    }
}

/// An ordered set of independent inputs. Names are unique and non-empty.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputSpace {
    inputs: Vec<InputDef>,
}

impl InputSpace {
    pub fn new(inputs: Vec<InputDef>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::config("input space must contain at least one input"));
        }
        for (i, def) in inputs.iter().enumerate() {
            if def.name.is_empty() {
                return Err(Error::config(format!("input {i} has an empty name")));
            }
            def.dist.validate()?;
        }
        for i in 1..inputs.len() {
            if inputs[..i].iter().any(|d| d.name == inputs[i].name) {
                return Err(Error::config(format!("duplicate input name '{}'", inputs[i].name)));
            }
        }
        Ok(InputSpace { inputs })
    }

    pub fn dim(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[InputDef] {
        &self.inputs
    }

    pub fn names(&self) -> Vec<String> {
        self.inputs.iter().map(|d| d.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|d| d.name == name)
    }

    /// Marginal means, in input order.
    pub fn means(&self) -> Vec<f64> {
        self.inputs.iter().map(|d| d.dist.mean()).collect()
    }

    /// Draws an n-by-dim sample. Pure in (self, n, seed); requires n >= 2.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SampleMatrix> {
        if n < 2 {
            return Err(Error::config(format!("sample size must be at least 2, got {n}")));
        }
        Ok(self.sample_stream(n, Stream::new(seed, "sample")))
    }

    /// Sampling from an explicit stream; used by the design construction so
    /// that the A and B matrices come from disjoint substreams.
    pub(crate) fn sample_stream(&self, n: usize, stream: Stream) -> SampleMatrix {
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            for (j, def) in self.inputs.iter().enumerate() {
                let u = stream.unit((i * d + j) as u64);
                data.push(def.dist.quantile(u));
            }
        }
        SampleMatrix { rows: n, cols: d, data }
    }
}

/// A row-major sample matrix: one row per realization, one column per input.
#[derive(Clone, Debug)]
pub struct SampleMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    /// Copy of this matrix with column `j` pinned to one value.
    pub(crate) fn with_constant_column(&self, j: usize, value: f64) -> SampleMatrix {
        let mut data = self.data.clone();
        for i in 0..self.rows {
            data[i * self.cols + j] = value;
        }
        SampleMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Copy of this matrix with column `j` replaced by the same column of
    /// `other`. Both matrices must have identical shape.
    pub(crate) fn with_column_from(&self, other: &SampleMatrix, j: usize) -> SampleMatrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut data = self.data.clone();
        for i in 0..self.rows {
            data[i * self.cols + j] = other.value(i, j);
        }
        SampleMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.value(i, j)).collect()
    }
}
