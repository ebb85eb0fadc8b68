//! The built-in example models: an analytic reaction equation whose slow
//! and fast parts factor exactly, an Ornstein-Uhlenbeck fast process
//! driving a slow integrator, a coupled function whose sensitivities
//! forget the component screening entirely, and a generic builder that
//! wires component models into a joint-input coupled model.

use std::sync::Arc;

use crate::bounds::CouplingForm;
use crate::error::{Error, Result};
use crate::input::{Distribution, InputDef, InputSpace, Scale};
use crate::model::ModelFunction;
use crate::rng::{subseed, Stream};

/// A model producing one output per entry of a fixed time grid.
pub trait SeriesModel: Sync {
    fn arity(&self) -> usize;
    fn times(&self) -> &[f64];
    fn eval_series(&self, x: &[f64]) -> Result<Vec<f64>>;
}

// ---------------------------------------------------------------------------
// Reaction equation: z(t) = f(x) exp(-t psi(xi)), solved analytically.

fn reaction_f(x: &[f64]) -> f64 {
    x[0] * x[0] + x[0] * x[1] * x[2] + x[2] * x[2] * x[2] - x[0] * x[2]
}

fn reaction_psi(xi: &[f64]) -> f64 {
    xi[0] * xi[0] - xi[1]
}

/// Macro part of the reaction model, f(x1, x2, x3).
#[derive(Debug, Clone, Copy)]
pub struct ReactionF;

impl ModelFunction for ReactionF {
    fn arity(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64]) -> f64 {
        reaction_f(x)
    }
}

/// Micro factor of the reaction model at a fixed time, exp(-t psi(xi)).
#[derive(Debug, Clone, Copy)]
pub struct ReactionH {
    pub t: f64,
}

impl ModelFunction for ReactionH {
    fn arity(&self) -> usize {
        2
    }

    fn eval(&self, xi: &[f64]) -> f64 {
        (-self.t * reaction_psi(xi)).exp()
    }
}

/// Full reaction model over (x1, x2, x3, xi1, xi2). As a scalar model it
/// reports the value at the final time; as a series model it reports the
/// whole output grid.
#[derive(Debug, Clone)]
pub struct ReactionModel {
    t_end: f64,
    times: Vec<f64>,
}

impl ReactionModel {
    /// The canonical configuration: t_end = 100, outputs every 10 time
    /// units from 0.
    pub fn new() -> Self {
        let times = (0..=10).map(|k| 10.0 * k as f64).collect();
        ReactionModel { t_end: 100.0, times }
    }

    pub fn with_times(t_end: f64, times: Vec<f64>) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::config("reaction t_end must be positive"));
        }
        if times.is_empty() || times.iter().any(|&t| !(0.0..=t_end).contains(&t)) {
            return Err(Error::config("reaction output times must lie in [0, t_end]"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("reaction output times must be strictly increasing"));
        }
        Ok(ReactionModel { t_end, times })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn eval_at(&self, x: &[f64], t: f64) -> f64 {
        reaction_f(&x[..3]) * (-t * reaction_psi(&x[3..5])).exp()
    }
}

impl Default for ReactionModel {
    fn default() -> Self {
        ReactionModel::new()
    }
}

impl ModelFunction for ReactionModel {
    fn arity(&self) -> usize {
        5
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.eval_at(x, self.t_end)
    }
}

impl SeriesModel for ReactionModel {
    fn arity(&self) -> usize {
        5
    }

    fn times(&self) -> &[f64] {
        &self.times
    }

    fn eval_series(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.times.iter().map(|&t| self.eval_at(x, t)).collect())
    }
}

pub fn reaction_f_space() -> InputSpace {
    InputSpace::new(vec![
        InputDef::new("x1", Distribution::Uniform { lo: 0.9, hi: 1.1 }, Scale::Macro),
        InputDef::new("x2", Distribution::Uniform { lo: 0.9, hi: 1.1 }, Scale::Macro),
        InputDef::new("x3", Distribution::Uniform { lo: 0.9, hi: 1.1 }, Scale::Macro),
    ])
    .expect("static space")
}

pub fn reaction_h_space() -> InputSpace {
    InputSpace::new(vec![
        InputDef::new("xi1", Distribution::Uniform { lo: 0.07, hi: 0.09 }, Scale::Micro),
        InputDef::new("xi2", Distribution::Uniform { lo: 0.05, hi: 0.09 }, Scale::Micro),
    ])
    .expect("static space")
}

pub fn reaction_space() -> InputSpace {
    let mut inputs = reaction_f_space().inputs().to_vec();
    inputs.extend(reaction_h_space().inputs().to_vec());
    InputSpace::new(inputs).expect("static space")
}

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck fast process under a slow integrator.

/// Macro drift of the OU example, f(x) = -x1 + x2^2 x3 + x4.
#[derive(Debug, Clone, Copy)]
pub struct OUDrift;

impl ModelFunction for OUDrift {
    fn arity(&self) -> usize {
        4
    }

    fn eval(&self, x: &[f64]) -> f64 {
        -x[0] + x[1] * x[1] * x[2] + x[3]
    }
}

/// Coupled slow/fast system
///   dz/dt = v + f(x),    dv/dt = -(1/eps) v + (1/sqrt(eps)) dW,
/// integrated with forward Euler at dt_macro over a micro grid at
/// dt_micro. Inputs are (x1..x4, u) where u in (0,1) carries the noise
/// substream seed in its bits, so evaluation is a pure function of the
/// input row.
#[derive(Debug, Clone)]
pub struct OUModel {
    pub eps: f64,
    pub dt_macro: f64,
    pub dt_micro: f64,
    pub z0: f64,
    pub v0: f64,
    /// Use the micro-window average of v in the macro drift instead of
    /// the end-of-window value (the default).
    pub window_average: bool,
    /// Force all noise increments to zero (for closed-form checks).
    pub noise: bool,
    t_end: f64,
    times: Vec<f64>,
    macro_steps: usize,
    micro_steps: usize,
}

impl OUModel {
    pub fn new(t_end: f64) -> Result<Self> {
        OUModel::with_params(1e-2, 1.0, 1e-2, t_end)
    }

    pub fn with_params(eps: f64, dt_macro: f64, dt_micro: f64, t_end: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::config("OU eps must be positive"));
        }
        if !(dt_micro > 0.0 && dt_micro < dt_macro) {
            return Err(Error::config("OU requires 0 < dt_micro < dt_macro"));
        }
        let macro_steps = (t_end / dt_macro).round();
        if !(t_end > 0.0) || (macro_steps * dt_macro - t_end).abs() > 1e-9 * dt_macro {
            return Err(Error::config("OU t_end must be a positive multiple of dt_macro"));
        }
        let micro_steps = (dt_macro / dt_micro).round();
        if (micro_steps * dt_micro - dt_macro).abs() > 1e-9 * dt_micro {
            return Err(Error::config("OU dt_macro must be a multiple of dt_micro"));
        }
        let macro_steps = macro_steps as usize;
        let times = (1..=macro_steps).map(|k| k as f64 * dt_macro).collect();
        Ok(OUModel {
            eps,
            dt_macro,
            dt_micro,
            z0: 1.0,
            v0: 1.0,
            window_average: false,
            noise: true,
            t_end,
            times,
            macro_steps,
            micro_steps: micro_steps as usize,
        })
    }

    pub fn without_noise(mut self) -> Self {
        self.noise = false;
        self
    }

    pub fn with_window_average(mut self) -> Self {
        self.window_average = true;
        self
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Runs the coupled recursion; pushes z at every macro time. Returns
    /// false as soon as the iteration leaves the finite range.
    fn simulate(&self, x: &[f64], out: &mut Vec<f64>) -> bool {
        out.clear();
        let drift = OUDrift.eval(&x[..4]);
        let stream = Stream::from_raw(subseed(x[4].to_bits(), "ou-noise"));
        let decay = 1.0 - self.dt_micro / self.eps;
        let amp = self.dt_micro.sqrt() / self.eps.sqrt();
        let mut v = self.v0;
        let mut z = self.z0;
        let mut k = 0u64;
        for _ in 0..self.macro_steps {
            let mut acc = 0.0;
            for _ in 0..self.micro_steps {
                let noise = if self.noise { amp * stream.normal(k) } else { 0.0 };
                k += 1;
                v = v * decay + noise;
                acc += v;
            }
            let v_bar = if self.window_average { acc / self.micro_steps as f64 } else { v };
            z += self.dt_macro * (v_bar + drift);
            if !v.is_finite() || !z.is_finite() {
                return false;
            }
            out.push(z);
        }
        true
    }
}

impl ModelFunction for OUModel {
    fn arity(&self) -> usize {
        5
    }

    /// Scalar view: z at the final time; NaN when the step is unstable.
    fn eval(&self, x: &[f64]) -> f64 {
        let mut out = Vec::with_capacity(self.macro_steps);
        if self.simulate(x, &mut out) {
            *out.last().expect("at least one macro step")
        } else {
            f64::NAN
        }
    }
}

impl SeriesModel for OUModel {
    fn arity(&self) -> usize {
        5
    }

    fn times(&self) -> &[f64] {
        &self.times
    }

    fn eval_series(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.macro_steps);
        if self.simulate(x, &mut out) {
            Ok(out)
        } else {
            Err(Error::degenerate("OU integration left the finite range (unstable step)"))
        }
    }
}

pub fn ou_f_space() -> InputSpace {
    InputSpace::new(vec![
        InputDef::new("x1", Distribution::Normal { mean: 0.0, variance: 1e-4 }, Scale::Macro),
        InputDef::new("x2", Distribution::Normal { mean: 0.0, variance: 2.5e-4 }, Scale::Macro),
        InputDef::new("x3", Distribution::Normal { mean: 0.0, variance: 2.5e-6 }, Scale::Macro),
        InputDef::new("x4", Distribution::Normal { mean: 0.0, variance: 2.5e-6 }, Scale::Macro),
    ])
    .expect("static space")
}

pub fn ou_space() -> InputSpace {
    let mut inputs = ou_f_space().inputs().to_vec();
    inputs.push(InputDef::new("noise", Distribution::Uniform { lo: 0.0, hi: 1.0 }, Scale::Micro));
    InputSpace::new(inputs).expect("static space")
}

// ---------------------------------------------------------------------------
// Counterexample: g = (beta (x1 + x2 + xi))^(-1/4) is fully symmetric in
// its inputs, so the screening verdict on f = x1 + beta x2 says nothing
// about g.

/// Macro part of the counterexample, f = x1 + beta x2.
#[derive(Debug, Clone, Copy)]
pub struct CounterexampleF {
    pub beta: f64,
}

impl ModelFunction for CounterexampleF {
    fn arity(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64]) -> f64 {
        x[0] + self.beta * x[1]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CounterexampleModel {
    beta: f64,
}

impl CounterexampleModel {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::config(format!("counterexample beta must be positive, got {beta}")));
        }
        Ok(CounterexampleModel { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl ModelFunction for CounterexampleModel {
    fn arity(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64]) -> f64 {
        // Summing in sorted order makes the permutation symmetry bitwise
        // exact, not just approximate.
        let (mut a, mut b, mut c) = (x[0], x[1], x[2]);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        if b > c {
            std::mem::swap(&mut b, &mut c);
        }
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        (self.beta * (a + b + c)).powf(-0.25)
    }
}

/// Closed-form total index of x2 for f = x1 + beta x2 on iid uniform
/// inputs: beta^2 / (1 + beta^2).
pub fn counterexample_indices(beta: f64) -> f64 {
    beta * beta / (1.0 + beta * beta)
}

/// Inputs live on (1e-9, 1): the model is square-integrable on (0,1)^3
/// but pointwise evaluation at a sum near 0 overflows, so the support is
/// clipped away from the singularity.
pub fn counterexample_space() -> InputSpace {
    InputSpace::new(vec![
        InputDef::new("x1", Distribution::Uniform { lo: 1e-9, hi: 1.0 }, Scale::Macro),
        InputDef::new("x2", Distribution::Uniform { lo: 1e-9, hi: 1.0 }, Scale::Macro),
        InputDef::new("xi", Distribution::Uniform { lo: 1e-9, hi: 1.0 }, Scale::Micro),
    ])
    .expect("static space")
}

pub fn counterexample_f_space() -> InputSpace {
    InputSpace::new(vec![
        InputDef::new("x1", Distribution::Uniform { lo: 1e-9, hi: 1.0 }, Scale::Macro),
        InputDef::new("x2", Distribution::Uniform { lo: 1e-9, hi: 1.0 }, Scale::Macro),
    ])
    .expect("static space")
}

// ---------------------------------------------------------------------------
// Composed models: wiring component models into a joint input space.

/// Index maps from the joint input space into each component. `screened`
/// lists the joint indices whose influence the coupling bounds are meant
/// to certify; the forms differ in which components may touch them.
#[derive(Debug, Clone)]
pub struct Wiring {
    /// Joint dimension.
    pub dim: usize,
    /// Joint indices feeding f, in f's argument order.
    pub f: Vec<usize>,
    /// Joint indices feeding each h component.
    pub h: Vec<Vec<usize>>,
    /// Joint indices under screening; must be a subset of the f indices.
    pub screened: Vec<usize>,
}

impl Wiring {
    fn validate(&self, f_arity: usize, h_arities: &[usize]) -> Result<()> {
        if self.f.len() != f_arity {
            return Err(Error::config(format!(
                "wiring feeds {} inputs to f of arity {}",
                self.f.len(),
                f_arity
            )));
        }
        if self.h.len() != h_arities.len() {
            return Err(Error::config(format!(
                "wiring has {} h maps for {} h components",
                self.h.len(),
                h_arities.len()
            )));
        }
        for (map, &arity) in self.h.iter().zip(h_arities) {
            if map.len() != arity {
                return Err(Error::config(format!(
                    "wiring feeds {} inputs to an h component of arity {arity}",
                    map.len()
                )));
            }
        }
        let mut used = vec![false; self.dim];
        for map in std::iter::once(&self.f).chain(self.h.iter()) {
            let mut seen = vec![false; self.dim];
            for &j in map {
                if j >= self.dim {
                    return Err(Error::config(format!(
                        "wiring index {j} out of range for joint dimension {}",
                        self.dim
                    )));
                }
                if seen[j] {
                    return Err(Error::config(format!(
                        "wiring feeds joint input {j} twice to the same component"
                    )));
                }
                seen[j] = true;
                used[j] = true;
            }
        }
        if let Some(j) = used.iter().position(|u| !u) {
            return Err(Error::config(format!("joint input {j} is wired to no component")));
        }
        for &s in &self.screened {
            if !self.f.contains(&s) {
                return Err(Error::config(format!(
                    "screened input {s} is not an input of f; screening certifies f inputs only"
                )));
            }
        }
        Ok(())
    }

    fn shares(a: &[usize], b: &[usize]) -> bool {
        a.iter().any(|i| b.contains(i))
    }
}

enum Combine {
    Product,
    Sum,
    Affine,
    Custom(Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>),
}

/// A joint-space model evaluating wired components and combining them.
pub struct ComposedModel {
    f: Box<dyn ModelFunction>,
    hs: Vec<Box<dyn ModelFunction>>,
    combine: Combine,
    wiring: Wiring,
}

impl std::fmt::Debug for ComposedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ComposedModel")
            .field("wiring", &self.wiring)
            .field("h_components", &self.hs.len())
            .finish_non_exhaustive()
    }
}

impl ComposedModel {
    pub fn wiring(&self) -> &Wiring {
        &self.wiring
    }

    fn gather(x: &[f64], idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&j| x[j]).collect()
    }

    /// Component values at a joint point, (f, [h...]).
    pub fn parts(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let fx = self.f.eval(&Self::gather(x, &self.wiring.f));
        let hx = self
            .hs
            .iter()
            .zip(&self.wiring.h)
            .map(|(h, map)| h.eval(&Self::gather(x, map)))
            .collect();
        (fx, hx)
    }
}

impl ModelFunction for ComposedModel {
    fn arity(&self) -> usize {
        self.wiring.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let (fx, hx) = self.parts(x);
        match &self.combine {
            Combine::Product => fx * hx[0],
            Combine::Sum => fx + hx.iter().sum::<f64>(),
            Combine::Affine => fx * hx[0] + hx[1],
            Combine::Custom(g) => g(fx, &hx),
        }
    }
}

/// Builds the coupled model for an algebraic coupling form, enforcing the
/// independence assumptions under which the matching bound is valid.
pub fn compose(
    f: Box<dyn ModelFunction>,
    hs: Vec<Box<dyn ModelFunction>>,
    form: &CouplingForm,
    wiring: Wiring,
) -> Result<ComposedModel> {
    let h_arities: Vec<usize> = hs.iter().map(|h| h.arity()).collect();
    wiring.validate(f.arity(), &h_arities)?;
    let need = |count: usize, what: &str| {
        if hs.len() != count {
            Err(Error::config(format!(
                "{} coupling takes exactly {count} micro component(s), got {}",
                what,
                hs.len()
            )))
        } else {
            Ok(())
        }
    };
    let combine = match *form {
        CouplingForm::Multiplicative => {
            need(1, "multiplicative")?;
            if Wiring::shares(&wiring.f, &wiring.h[0]) {
                return Err(Error::config(
                    "multiplicative coupling assumes f and h depend on disjoint inputs",
                ));
            }
            Combine::Product
        }
        CouplingForm::Additive => {
            need(1, "additive")?;
            if Wiring::shares(&wiring.f, &wiring.h[0]) {
                return Err(Error::config(
                    "additive coupling assumes f and h depend on disjoint inputs",
                ));
            }
            Combine::Sum
        }
        CouplingForm::AffineLinear => {
            need(2, "affine")?;
            if Wiring::shares(&wiring.f, &wiring.h[0]) {
                return Err(Error::config(
                    "affine coupling assumes the multiplier h1 shares no inputs with f",
                ));
            }
            if Wiring::shares(&wiring.screened, &wiring.h[1]) {
                return Err(Error::config(
                    "affine coupling assumes the offset h2 is independent of the screened inputs",
                ));
            }
            Combine::Affine
        }
        CouplingForm::MixedAffine => {
            need(2, "mixed affine")?;
            if Wiring::shares(&wiring.f, &wiring.h[0]) {
                return Err(Error::config(
                    "mixed affine coupling assumes the multiplier h1 shares no inputs with f",
                ));
            }
            // h2 may share anything, including the screened inputs; the
            // bound charges its sensitivity explicitly.
            Combine::Affine
        }
        CouplingForm::SharedSum { k } => {
            need(k, "shared-sum")?;
            Combine::Sum
        }
        CouplingForm::LipschitzCoercive { .. } => {
            return Err(Error::config(
                "lipschitz-coercive coupling has no canonical algebra; \
                 build it with compose_custom and pass the constants to the bound",
            ));
        }
    };
    Ok(ComposedModel { f, hs, combine, wiring })
}

/// Builds a coupled model with an arbitrary combiner G(f, h). Intended
/// for Lipschitz-coercive couplings: every h component must then be
/// independent of the screened inputs.
pub fn compose_custom(
    f: Box<dyn ModelFunction>,
    hs: Vec<Box<dyn ModelFunction>>,
    combiner: Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>,
    wiring: Wiring,
) -> Result<ComposedModel> {
    let h_arities: Vec<usize> = hs.iter().map(|h| h.arity()).collect();
    wiring.validate(f.arity(), &h_arities)?;
    for map in &wiring.h {
        if Wiring::shares(&wiring.screened, map) {
            return Err(Error::config(
                "coercive coupling assumes the micro components are independent \
                 of the screened inputs",
            ));
        }
    }
    Ok(ComposedModel { f, hs, combine: Combine::Custom(combiner), wiring })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnModel;

    #[test]
    fn reaction_starts_at_its_macro_part() {
        let m = ReactionModel::new();
        let x = [0.95, 1.05, 1.02, 0.08, 0.06];
        assert_eq!(m.eval_at(&x, 0.0), ReactionF.eval(&x[..3]));

        // psi = 0 freezes the decay; f(1,1,1) = 2 at every time.
        let neutral = [1.0, 1.0, 1.0, 0.08, 0.0064];
        for t in [0.0, 10.0, 55.0, 100.0] {
            assert_eq!(m.eval_at(&neutral, t), 2.0);
        }
    }

    #[test]
    fn reaction_decay_factorizes_away_from_x() {
        let m = ReactionModel::new();
        let xa = [0.95, 1.05, 1.02, 0.08, 0.06];
        let xb = [1.08, 0.91, 0.97, 0.08, 0.06];
        for t in [10.0, 40.0, 100.0] {
            let ra = m.eval_at(&xa, t) / m.eval_at(&xa, 0.0);
            let rb = m.eval_at(&xb, t) / m.eval_at(&xb, 0.0);
            assert!((ra - rb).abs() < 1e-15);
        }

        // Positive psi means monotone decay.
        let x = [1.0, 1.0, 1.0, 0.3, 0.05];
        let z: Vec<f64> = m.times().iter().map(|&t| m.eval_at(&x, t)).collect();
        assert!(z.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn reaction_series_matches_pointwise_evaluation() {
        let m = ReactionModel::new();
        assert_eq!(m.times().len(), 11);
        assert_eq!(m.times()[0], 0.0);
        assert_eq!(*m.times().last().unwrap(), 100.0);
        let x = [1.02, 0.93, 1.08, 0.075, 0.07];
        let series = m.eval_series(&x).unwrap();
        for (k, &t) in m.times().iter().enumerate() {
            assert_eq!(series[k], m.eval_at(&x, t));
        }
        // Scalar view is the final time.
        assert_eq!(ModelFunction::eval(&m, &x), *series.last().unwrap());

        assert!(ReactionModel::with_times(100.0, vec![0.0, 150.0]).is_err());
        assert!(ReactionModel::with_times(100.0, vec![50.0, 50.0]).is_err());
    }

    #[test]
    fn canonical_spaces_have_the_documented_layout() {
        let full = reaction_space();
        assert_eq!(full.names(), vec!["x1", "x2", "x3", "xi1", "xi2"]);
        assert_eq!(full.inputs()[3].scale, Scale::Micro);
        assert_eq!(reaction_f_space().dim(), 3);
        assert_eq!(reaction_h_space().dim(), 2);

        let ou = ou_space();
        assert_eq!(ou.names(), vec!["x1", "x2", "x3", "x4", "noise"]);
        assert_eq!(ou.inputs()[1].dist.variance(), 2.5e-4);
        assert_eq!(ou.inputs()[1].dist.mean(), 0.0);

        assert_eq!(counterexample_space().dim(), 3);
    }

    #[test]
    fn ou_with_unit_decay_ratio_kills_v_after_one_micro_step() {
        // dt_micro / eps = 1 exactly, so v drops to 0 at the first micro
        // step; with zero drift, z never moves.
        let m = OUModel::new(5.0).unwrap().without_noise();
        let x = [0.0, 0.0, 0.0, 0.0, 0.5];
        let series = m.eval_series(&x).unwrap();
        assert_eq!(series, vec![1.0; 5]);
        let avg = OUModel::new(5.0).unwrap().without_noise().with_window_average();
        assert_eq!(avg.eval_series(&x).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn ou_pure_drift_grows_linearly() {
        let mut m = OUModel::new(10.0).unwrap().without_noise();
        m.v0 = 0.0;
        let x = [1.0, 0.0, 0.0, 0.0, 0.5]; // f = -1
        let series = m.eval_series(&x).unwrap();
        for (k, z) in series.iter().enumerate() {
            assert!((z - (1.0 - (k + 1) as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn ou_matches_the_euler_recursion_exactly() {
        // eps = 2 dt_micro gives decay 1/2 per micro step, two micro
        // steps per macro step; every quantity is a dyadic rational.
        let m = OUModel::with_params(0.02, 0.02, 0.01, 0.06).unwrap().without_noise();
        let x = [0.0; 5];
        let end = m.eval_series(&x).unwrap();
        let z1 = 1.0 + 0.02 * 0.25;
        let z2 = z1 + 0.02 * 0.0625;
        let z3 = z2 + 0.02 * 0.015625;
        assert!((end[0] - z1).abs() < 1e-15);
        assert!((end[1] - z2).abs() < 1e-15);
        assert!((end[2] - z3).abs() < 1e-15);

        let avg = OUModel::with_params(0.02, 0.02, 0.01, 0.06).unwrap().without_noise().with_window_average();
        let got = avg.eval_series(&x).unwrap();
        assert!((got[0] - (1.0 + 0.02 * 0.375)).abs() < 1e-15);
    }

    #[test]
    fn ou_unstable_step_is_reported() {
        // dt_micro / eps = 10 makes the decay factor -9: |v| explodes.
        let m = OUModel::with_params(1e-3, 1.0, 1e-2, 4.0).unwrap().without_noise();
        let x = [0.0, 0.0, 0.0, 0.0, 0.5];
        assert!(ModelFunction::eval(&m, &x).is_nan());
        assert!(matches!(m.eval_series(&x), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ou_noise_column_seeds_the_stream() {
        let m = OUModel::new(4.0).unwrap();
        let a = [0.0, 0.0, 0.0, 0.0, 0.25];
        let b = [0.0, 0.0, 0.0, 0.0, 0.75];
        let za = ModelFunction::eval(&m, &a);
        assert_eq!(za, ModelFunction::eval(&m, &a));
        assert_ne!(za, ModelFunction::eval(&m, &b));
        assert_ne!(za, ModelFunction::eval(&m.clone().without_noise(), &a));
    }

    #[test]
    fn ou_noise_accumulates_unit_variance_per_macro_step() {
        // At the canonical parameters v_k is an independent standard
        // normal at every micro step, so z(t_K) - z0 - K f is a sum of K
        // unit normals: variance K.
        let m = OUModel::new(4.0).unwrap();
        let stream = Stream::new(2024, "ou-var-check");
        let n = 2000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n {
            let u = stream.unit(i as u64);
            let z = ModelFunction::eval(&m, &[0.0, 0.0, 0.0, 0.0, u]) - 1.0;
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.2, "mean {mean}");
        assert!((var - 4.0).abs() < 0.6, "var {var}");
    }

    #[test]
    fn counterexample_is_exactly_permutation_symmetric() {
        let g = CounterexampleModel::new(0.3).unwrap();
        let s = Stream::new(7, "perm");
        for i in 0..50 {
            let p = [s.unit(3 * i), s.unit(3 * i + 1), s.unit(3 * i + 2)];
            let reference = g.eval(&p);
            assert!(reference.is_finite());
            for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                let q = [p[perm[0]], p[perm[1]], p[perm[2]]];
                assert_eq!(g.eval(&q), reference);
            }
        }
    }

    #[test]
    fn counterexample_closed_form_index() {
        assert_eq!(counterexample_indices(1.0), 0.5);
        assert!((counterexample_indices(0.05) - 0.0025 / 1.0025).abs() < 1e-18);
        assert!(counterexample_indices(0.05) < 0.01);
        assert!(CounterexampleModel::new(0.0).is_err());
        assert!(CounterexampleModel::new(f64::NAN).is_err());
    }

    fn poly_f() -> Box<dyn ModelFunction> {
        Box::new(FnModel::new(2, |x: &[f64]| x[0] * x[0] - 0.5 * x[1] + 1.0))
    }

    fn poly_h() -> Box<dyn ModelFunction> {
        Box::new(FnModel::new(1, |x: &[f64]| 2.0 * x[0] + 0.25))
    }

    #[test]
    fn composition_matches_manual_evaluation() {
        let wiring =
            Wiring { dim: 3, f: vec![0, 1], h: vec![vec![2]], screened: vec![1] };
        let product =
            compose(poly_f(), vec![poly_h()], &CouplingForm::Multiplicative, wiring.clone())
                .unwrap();
        let s = Stream::new(11, "compose");
        for i in 0..100 {
            let x = [s.unit(3 * i), s.unit(3 * i + 1), s.unit(3 * i + 2)];
            let manual = (x[0] * x[0] - 0.5 * x[1] + 1.0) * (2.0 * x[2] + 0.25);
            assert!((product.eval(&x) - manual).abs() < 1e-12);
        }

        let affine = compose(
            poly_f(),
            vec![poly_h(), Box::new(FnModel::new(2, |x: &[f64]| x[0] + x[1]))],
            &CouplingForm::AffineLinear,
            Wiring { dim: 3, f: vec![0, 1], h: vec![vec![2], vec![2, 0]], screened: vec![1] },
        )
        .unwrap();
        for i in 0..100 {
            let x = [s.unit(301 + 3 * i), s.unit(302 + 3 * i), s.unit(303 + 3 * i)];
            let manual =
                (x[0] * x[0] - 0.5 * x[1] + 1.0) * (2.0 * x[2] + 0.25) + (x[2] + x[0]);
            assert!((affine.eval(&x) - manual).abs() < 1e-12);
        }

        let custom = compose_custom(
            poly_f(),
            vec![poly_h()],
            Arc::new(|u, v: &[f64]| u.abs() + v[0].abs() + (u * v[0]).atan()),
            Wiring { dim: 3, f: vec![0, 1], h: vec![vec![2]], screened: vec![] },
        )
        .unwrap();
        for i in 0..100 {
            let x = [s.unit(601 + 3 * i), s.unit(602 + 3 * i), s.unit(603 + 3 * i)];
            let (u, v) = (x[0] * x[0] - 0.5 * x[1] + 1.0, 2.0 * x[2] + 0.25);
            assert!((custom.eval(&x) - (u.abs() + v.abs() + (u * v).atan())).abs() < 1e-12);
        }
    }

    #[test]
    fn simple_projection_examples() {
        let id1 = || Box::new(FnModel::new(1, |x: &[f64]| x[0])) as Box<dyn ModelFunction>;
        let wiring = Wiring { dim: 2, f: vec![0], h: vec![vec![1]], screened: vec![] };
        let prod =
            compose(id1(), vec![id1()], &CouplingForm::Multiplicative, wiring.clone()).unwrap();
        assert_eq!(prod.eval(&[0.5, 0.5]), 0.25);
        let sum = compose(id1(), vec![id1()], &CouplingForm::Additive, wiring).unwrap();
        assert_eq!(sum.eval(&[0.2, 0.3]), 0.5);
    }

    #[test]
    fn composition_rejects_violated_assumptions() {
        let id1 = || Box::new(FnModel::new(1, |x: &[f64]| x[0])) as Box<dyn ModelFunction>;
        let id2 = || Box::new(FnModel::new(2, |x: &[f64]| x[0] + x[1])) as Box<dyn ModelFunction>;

        // f and h sharing an input breaks the product/sum factorization.
        let shared = Wiring { dim: 2, f: vec![0, 1], h: vec![vec![1]], screened: vec![] };
        let err = compose(id2(), vec![id1()], &CouplingForm::Multiplicative, shared.clone())
            .unwrap_err();
        assert!(err.to_string().contains("disjoint"));
        assert!(compose(id2(), vec![id1()], &CouplingForm::Additive, shared).is_err());
        // The shared-sum form exists precisely for that overlap.
        assert!(compose(
            id2(),
            vec![id1()],
            &CouplingForm::SharedSum { k: 1 },
            Wiring { dim: 2, f: vec![0, 1], h: vec![vec![1]], screened: vec![0] },
        )
        .is_ok());

        // Affine offset may share unscreened macro inputs but not the
        // screened one.
        let ok = Wiring { dim: 3, f: vec![0, 1], h: vec![vec![2], vec![1, 2]], screened: vec![0] };
        assert!(compose(id2(), vec![id1(), id2()], &CouplingForm::AffineLinear, ok).is_ok());
        let bad = Wiring { dim: 3, f: vec![0, 1], h: vec![vec![2], vec![0, 2]], screened: vec![0] };
        let err = compose(id2(), vec![id1(), id2()], &CouplingForm::AffineLinear, bad.clone())
            .unwrap_err();
        assert!(err.to_string().contains("screened"));
        // The mixed form charges h2's sensitivity instead of forbidding it.
        assert!(compose(id2(), vec![id1(), id2()], &CouplingForm::MixedAffine, bad).is_ok());

        // Custom (coercive) composition: no h may see a screened input.
        let err = compose_custom(
            id2(),
            vec![id2()],
            Arc::new(|u, v: &[f64]| u + v[0]),
            Wiring { dim: 3, f: vec![0, 1], h: vec![vec![0, 2]], screened: vec![0] },
        )
        .unwrap_err();
        assert!(err.to_string().contains("screened"));

        // Structural wiring errors.
        let lip = CouplingForm::LipschitzCoercive { l: 1.0, c: 1.0, g0: 0.0, h_is_vector: false };
        assert!(compose(
            id1(),
            vec![id1()],
            &lip,
            Wiring { dim: 2, f: vec![0], h: vec![vec![1]], screened: vec![] },
        )
        .is_err());
        assert!(compose(
            id1(),
            vec![id1()],
            &CouplingForm::Multiplicative,
            Wiring { dim: 3, f: vec![0], h: vec![vec![1]], screened: vec![] },
        )
        .is_err(), "uncovered joint input");
        assert!(compose(
            id2(),
            vec![id1()],
            &CouplingForm::Multiplicative,
            Wiring { dim: 2, f: vec![0, 0], h: vec![vec![1]], screened: vec![] },
        )
        .is_err(), "duplicate index inside one component");
        assert!(compose(
            id1(),
            vec![id1()],
            &CouplingForm::Multiplicative,
            Wiring { dim: 2, f: vec![0], h: vec![vec![1]], screened: vec![1] },
        )
        .is_err(), "screened input outside f");
        assert!(compose(
            id1(),
            vec![id1(), id1()],
            &CouplingForm::Multiplicative,
            Wiring { dim: 3, f: vec![0], h: vec![vec![1], vec![2]], screened: vec![] },
        )
        .is_err(), "wrong component count");
    }
}
