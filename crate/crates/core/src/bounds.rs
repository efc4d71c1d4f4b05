//! Closed-form smoothness bounds for the invariant density and the
//! ε-scaling study.
//!
//! The k-th derivative bound is
//!
//! ```text
//! sup |φ^(k)| ≤ λ^{-(k+1)(k+2)/2} ( Σ_i p_i/|b_i| · (h(ε) + h(0) + ε sup|h'|) )^{k+1}
//! ```
//!
//! checked against finite differences of the solved density. The derivation
//! produces `1/|b_i|` Jacobians, so couplings of either sign enter through
//! their absolute value. Whether the density is meant against normalized or
//! plain Lebesgue measure differs by a factor 2 between the operator
//! calculus and the `∫φ dx = 1` convention; both normalizations are checked
//! rather than guessing.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::grid::GridFunction;
use crate::quadrature::QuadratureSpec;
use crate::solver::{solve_density, SolveOptions};
use crate::system::IfsSystem;

/// λ^{-(k+1)(k+2)/2} (Σ p_i/|b_i| · noise factor)^{k+1}, the closed-form
/// bound on sup |φ^(k)|.
pub fn theorem_bound(sys: &IfsSystem, k: usize) -> Result<f64> {
    sys.ensure_admissible()?;
    let stats = sys.noise_density().stats()?; // rejects ε = 0
    let noise_factor = stats.h_eps + stats.h0 + sys.epsilon * stats.hprime_sup;
    let branch_factor = sys.prob_over_coupling();
    let exponent = ((k + 1) * (k + 2)) as f64 / 2.0;
    Ok(sys.lambda.powf(-exponent) * (branch_factor * noise_factor).powi(k as i32 + 1))
}

/// One derivative order of the smoothness check, for both density
/// normalizations (m-normalized φ and Lebesgue-normalized φ/2).
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundRow {
    pub k: usize,
    pub bound: f64,
    pub observed_m: f64,
    pub observed_lebesgue: f64,
    pub pass_m: bool,
    pub pass_lebesgue: bool,
}

impl BoundRow {
    pub fn pass(&self) -> bool {
        self.pass_m && self.pass_lebesgue
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    /// All rows up to order `k_max` pass, in both normalizations.
    pub fn all_pass(&self, k_max: usize) -> bool {
        self.rows.iter().filter(|r| r.k <= k_max).all(|r| r.pass())
    }
}

/// Compares finite-difference derivative maxima of a solved density with
/// the closed-form bounds, for k = 0..=k_max (k_max ≤ 3; beyond k = 2 the
/// finite differences of a solved density are dominated by discretization
/// noise, so acceptance uses k ≤ 2 and reports k = 3 informationally).
///
/// For k ≥ 2 a few nodes next to each boundary are excluded from the sup:
/// the one-sided stencils contaminate them at higher orders.
pub fn check_smoothness(sys: &IfsSystem, phi: &GridFunction, k_max: usize) -> Result<BoundReport> {
    if k_max > 3 {
        return Err(Error::Config(format!("k_max must be at most 3, got {k_max}")));
    }
    let n = phi.grid().n_points();
    let mut rows = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let bound = theorem_bound(sys, k)?;
        let deriv = phi.finite_diff(k)?;
        let margin = if k >= 2 { 4 * k } else { 0 };
        let observed_m = deriv.values()[margin..n - margin]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        // the Lebesgue-normalized density is φ/2 and differentiation is linear
        let observed_lebesgue = observed_m / 2.0;
        rows.push(BoundRow {
            k,
            bound,
            observed_m,
            observed_lebesgue,
            pass_m: observed_m <= bound,
            pass_lebesgue: observed_lebesgue <= bound,
        });
    }
    Ok(BoundReport { rows })
}

/// One ε of the scaling study.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub admissible: bool,
    pub converged: bool,
    pub sup_phi: Option<f64>,
    pub eps_times_sup: Option<f64>,
    pub l2_norm: Option<f64>,
    pub sqrt_eps_times_l2: Option<f64>,
}

/// Re-solves the template system for each ε (same noise family, containment
/// re-checked per ε) and reports sup φ_ε, ε·sup φ_ε, ‖φ_ε‖₂ and √ε·‖φ_ε‖₂.
/// Inadmissible ε values flag their row; the others are still computed.
pub fn epsilon_scaling_study(
    sys_template: &IfsSystem,
    eps_list: &[f64],
    grid: Grid,
    quad: &QuadratureSpec,
    tol: f64,
) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut sys = sys_template.clone();
        sys.epsilon = eps;
        if !crate::system::validate_system(&sys).is_admissible() {
            rows.push(ScalingRow {
                epsilon: eps,
                admissible: false,
                converged: false,
                sup_phi: None,
                eps_times_sup: None,
                l2_norm: None,
                sqrt_eps_times_l2: None,
            });
            continue;
        }
        let result = solve_density(
            &sys,
            grid,
            quad,
            &SolveOptions {
                tol,
                ..Default::default()
            },
        )?;
        let sup = result.phi.max_value();
        let l2 = result.phi.integrate_product_dm(&result.phi)?.sqrt();
        rows.push(ScalingRow {
            epsilon: eps,
            admissible: true,
            converged: result.converged,
            sup_phi: Some(sup),
            eps_times_sup: Some(eps * sup),
            l2_norm: Some(l2),
            sqrt_eps_times_l2: Some(eps.sqrt() * l2),
        });
    }
    Ok(rows)
}
