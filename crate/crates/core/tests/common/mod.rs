//! Tensor-product Gauss-Legendre quadrature over a box, used as an
//! independent oracle for means, variances, and total indices of smooth
//! test models. Everything is expressed against the uniform probability
//! measure on the box, matching how the estimators define their moments.

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on
/// the Legendre recurrence. Weights sum to 2.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 2);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Quadrature over a product of intervals with the uniform probability
/// measure: `mean` returns E[f], not the raw integral.
pub struct BoxQuad {
    nodes: Vec<Vec<f64>>,
    /// Normalized per-axis weights (each axis sums to 1).
    weights: Vec<Vec<f64>>,
}

impl BoxQuad {
    pub fn new(ranges: &[(f64, f64)], m: usize) -> Self {
        let (xs, ws) = gauss_legendre(m);
        let mut nodes = Vec::with_capacity(ranges.len());
        let mut weights = Vec::with_capacity(ranges.len());
        for &(a, b) in ranges {
            assert!(a < b);
            nodes.push(xs.iter().map(|&x| 0.5 * (a + b) + 0.5 * (b - a) * x).collect());
            weights.push(ws.iter().map(|&w| 0.5 * w).collect());
        }
        BoxQuad { nodes, weights }
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    fn m(&self) -> usize {
        self.nodes[0].len()
    }

    /// Tensor grid of model values, flat in row-major order (last axis
    /// fastest).
    fn grid(&self, f: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
        let d = self.dim();
        let m = self.m();
        let total = m.pow(d as u32);
        let mut point = vec![0.0; d];
        let mut values = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            for axis in (0..d).rev() {
                point[axis] = self.nodes[axis][rem % m];
                rem /= m;
            }
            values.push(f(&point));
        }
        values
    }

    fn grid_weight(&self, flat: usize) -> f64 {
        let d = self.dim();
        let m = self.m();
        let mut rem = flat;
        let mut w = 1.0;
        for axis in (0..d).rev() {
            w *= self.weights[axis][rem % m];
            rem /= m;
        }
        w
    }

    pub fn mean(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let values = self.grid(&f);
        values.iter().enumerate().map(|(i, v)| self.grid_weight(i) * v).sum()
    }

    /// (E[f], E[f^2]).
    pub fn moments(&self, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
        let values = self.grid(&f);
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (i, v) in values.iter().enumerate() {
            let w = self.grid_weight(i);
            m1 += w * v;
            m2 += w * v * v;
        }
        (m1, m2)
    }

    /// Total Sobol indices of every input:
    /// S_T[i] = (E[f^2] - E_(x~i)[ (E_(x_i)[f])^2 ]) / Var(f).
    pub fn total_indices(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let d = self.dim();
        let m = self.m();
        let values = self.grid(&f);
        let (m1, m2) = {
            let mut a = 0.0;
            let mut b = 0.0;
            for (i, v) in values.iter().enumerate() {
                let w = self.grid_weight(i);
                a += w * v;
                b += w * v * v;
            }
            (a, b)
        };
        let var = m2 - m1 * m1;
        assert!(var > 0.0, "constant model has no indices");
        let mut out = Vec::with_capacity(d);
        for axis in 0..d {
            // Collapse the grid along `axis`: inner expectation over x_i
            // at every combination of the remaining coordinates.
            let stride = m.pow((d - 1 - axis) as u32);
            let outer = m.pow(axis as u32);
            let mut second_of_inner = 0.0;
            for hi in 0..outer {
                for lo in 0..stride {
                    let base = hi * stride * m + lo;
                    let mut inner = 0.0;
                    for k in 0..m {
                        inner += self.weights[axis][k] * values[base + k * stride];
                    }
                    // Weight of the collapsed point: product over the
                    // other axes, recovered by dividing the axis weight
                    // out of any full-grid weight on this fiber.
                    let w_rest = self.grid_weight(base) / self.weights[axis][0];
                    second_of_inner += w_rest * inner * inner;
                }
            }
            out.push((m2 - second_of_inner) / var);
        }
        out
    }
}

#[allow(dead_code)]
pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} (tol {tol})"
    );
}
