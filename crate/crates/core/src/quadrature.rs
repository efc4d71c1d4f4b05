//! Gauss–Legendre rules for the t-integrals.
//!
//! Operator integrands are restricted to intervals on which they are smooth
//! (see [`crate::operators`]); each such panel is integrated with a
//! Gauss–Legendre rule. `t_nodes` caps the per-panel point count. Since a
//! panel integrand is a polynomial of low degree times the noise density,
//! fewer points than the cap often already integrate it to f64 exactness;
//! the rule order actually used is the smaller of the two.

use crate::error::{Error, Result};
use crate::system::NoiseFamily;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Quadrature controls for the operator modules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    /// Gauss–Legendre point count per t-subinterval (>= 2).
    pub t_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { t_nodes: 32 }
    }
}

impl QuadratureSpec {
    pub fn new(t_nodes: usize) -> Result<QuadratureSpec> {
        if t_nodes < 2 {
            return Err(Error::Config(format!("t_nodes must be >= 2, got {t_nodes}")));
        }
        Ok(QuadratureSpec { t_nodes })
    }

    /// Point count for a panel of width `width` out of a noise support of
    /// length `eps`. Piecewise-polynomial families are integrated exactly by
    /// a 2-point rule against a linear interpolant; the raised cosine needs
    /// an order that grows with the fraction of its period the panel covers.
    pub(crate) fn panel_order(&self, family: NoiseFamily, width: f64, eps: f64) -> usize {
        let exact = match family {
            NoiseFamily::Uniform | NoiseFamily::LinearRamp | NoiseFamily::QuadraticBump => 2,
            NoiseFamily::RaisedCosine => {
                let frac = (width / eps).clamp(0.0, 1.0);
                4 + (16.0 * frac).ceil() as usize
            }
        };
        exact.min(self.t_nodes).max(2)
    }
}

/// Nodes and weights on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub(crate) struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GlRule {
    /// ∫_a^b f, mapping the reference rule affinely.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(self.weights.iter()) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Newton iteration on the Legendre recurrence; standard construction,
/// accurate to a few ulp for the orders used here.
fn compute_rule(n: usize) -> GlRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and P'_n(x) via recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for m in 2..=n {
                let m = m as f64;
                let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GlRule { nodes, weights }
}

/// Shared rule cache; rules are tiny and orders few.
pub(crate) fn gl_rule(n: usize) -> GlRule {
    static CACHE: OnceLock<Mutex<HashMap<usize, GlRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n).or_insert_with(|| compute_rule(n)).clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn five_point_rule_matches_reference() {
        // classical 5-point Gauss-Legendre abscissae/weights
        let r = gl_rule(5);
        assert_abs_diff_eq!(r.nodes[0], -0.906179845938664, epsilon = 1e-14);
        assert_abs_diff_eq!(r.nodes[1], -0.5384693101056831, epsilon = 1e-14);
        assert_abs_diff_eq!(r.nodes[2], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[0], 0.2369268850561891, epsilon = 1e-14);
        assert_abs_diff_eq!(r.weights[2], 0.5688888888888889, epsilon = 1e-14);
    }

    #[test]
    fn polynomial_exactness() {
        for n in [2usize, 3, 8, 32] {
            let r = gl_rule(n);
            for deg in 0..2 * n {
                let exact = (3.0_f64.powi(deg as i32 + 1) - (-2.0_f64).powi(deg as i32 + 1))
                    / (deg as f64 + 1.0);
                let got = r.integrate(-2.0, 3.0, |x| x.powi(deg as i32));
                assert_abs_diff_eq!(got, exact, epsilon = 1e-10 * exact.abs().max(1.0));
            }
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [2usize, 7, 20, 64] {
            let r = gl_rule(n);
            let s: f64 = r.weights.iter().sum();
            assert_abs_diff_eq!(s, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn panel_order_respects_cap() {
        let q = QuadratureSpec::default();
        assert_eq!(q.panel_order(NoiseFamily::Uniform, 1e-4, 0.1), 2);
        assert_eq!(q.panel_order(NoiseFamily::QuadraticBump, 0.1, 0.1), 2);
        assert_eq!(q.panel_order(NoiseFamily::RaisedCosine, 0.1, 0.1), 20);
        let tight = QuadratureSpec::new(2).unwrap();
        assert_eq!(tight.panel_order(NoiseFamily::RaisedCosine, 0.1, 0.1), 2);
        assert!(QuadratureSpec::new(1).is_err());
    }

    #[test]
    fn cosine_panel_order_is_machine_exact() {
        // GL with the capped order must match a deliberately huge rule on
        // integrands of the raised-cosine type over panels of varying width.
        let eps = 0.1;
        let q = QuadratureSpec::default();
        for frac in [0.002, 0.05, 0.3, 1.0] {
            let w = eps * frac;
            let f = |t: f64| (0.3 + 1.7 * t) * (1.0 - (2.0 * std::f64::consts::PI * t / eps).cos()) / eps;
            let n = q.panel_order(NoiseFamily::RaisedCosine, w, eps);
            let got = gl_rule(n).integrate(0.01, 0.01 + w, f);
            let reference = gl_rule(64).integrate(0.01, 0.01 + w, f);
            assert_abs_diff_eq!(got, reference, epsilon = 1e-15);
        }
    }
}
