//! Fixed-point iteration of the transfer operator.
//!
//! Starting from φ₀ ≡ 1, the iterates `φ_{n+1} = Lφ_n` converge to the
//! invariant density. Each iterate's mass is recorded and then renormalized
//! to one (Simpson and Gauss–Legendre drift at the 1e-13 level per step;
//! renormalization keeps the weak integrals honest probability measures —
//! the pre-normalization masses stay in the trace so conservation itself
//! remains testable). Stopping is in the sup norm: the projective E-cone
//! metric is only lower-boundable, so the sup residual is the honest
//! computable surrogate, with cone diagnostics reported separately.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operators::apply_l;
use crate::quadrature::{gl_rule, QuadratureSpec};
use crate::system::IfsSystem;

/// Iteration controls; the defaults match the CLI defaults.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Renormalize every iterate to unit mass (disable to measure raw mass
    /// conservation of the discretized operator).
    pub renormalize: bool,
    /// Keep every iterate for weak-integral diagnostics.
    pub store_history: bool,
    /// Alternative seed function; φ₀ ≡ 1 when absent.
    pub initial: Option<GridFunction>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 500,
            renormalize: true,
            store_history: false,
            initial: None,
        }
    }
}

/// Converged (or flagged) output of [`solve_density`].
#[derive(Debug, Clone)]
pub struct DensityResult {
    /// The last iterate, unit mass when renormalization is on.
    pub phi: GridFunction,
    pub iterations: usize,
    /// Sup-norm residuals |φ_{n+1} - φ_n| per iteration.
    pub residual_trace: Vec<f64>,
    /// ∫ Lφ_n dm before renormalization, per iteration.
    pub mass_trace: Vec<f64>,
    /// Geometric rate fitted to the last residuals (NaN with fewer than two).
    pub fitted_rate: f64,
    /// False when max_iter ran out before the tolerance was met.
    pub converged: bool,
    pub history: Option<Vec<GridFunction>>,
}

/// Iterates `φ_{n+1} = Lφ_n` until the sup-norm residual drops to `tol`.
/// Non-convergence within `max_iter` flags the result instead of erroring.
pub fn solve_density(
    sys: &IfsSystem,
    grid: Grid,
    quad: &QuadratureSpec,
    opts: &SolveOptions,
) -> Result<DensityResult> {
    sys.ensure_admissible()?;
    if !(opts.tol > 0.0) {
        return Err(Error::Config(format!("tol must be > 0, got {}", opts.tol)));
    }
    let mut phi = match &opts.initial {
        Some(f) => {
            if f.grid() != grid {
                return Err(Error::Config("initial iterate lives on the wrong grid".into()));
            }
            f.clone()
        }
        None => GridFunction::constant(grid, 1.0),
    };

    let mut residual_trace = Vec::new();
    let mut mass_trace = Vec::new();
    let mut history = opts.store_history.then(|| vec![phi.clone()]);
    let mut converged = false;

    for _ in 0..opts.max_iter {
        let mut next = apply_l(sys, &phi, quad)?;
        let mass = next.integrate_dm();
        mass_trace.push(mass);
        if opts.renormalize {
            next = next.map(|v| v / mass);
        }
        let residual = next.sup_diff(&phi);
        residual_trace.push(residual);
        phi = next;
        if let Some(h) = history.as_mut() {
            h.push(phi.clone());
        }
        if residual <= opts.tol {
            converged = true;
            break;
        }
    }

    let fitted_rate = geometric_fit(&residual_trace, 10)
        .map(|f| f.rate)
        .unwrap_or(f64::NAN);
    Ok(DensityResult {
        iterations: residual_trace.len(),
        phi,
        residual_trace,
        mass_trace,
        fitted_rate,
        converged,
        history,
    })
}

/// Weak integrals μ_n(ψ) = ∫ ψ φ_n dm along a stored iterate history.
pub fn weak_integrals(psi: &GridFunction, history: &[GridFunction]) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::Config("weak_integrals needs a nonempty iterate history".into()));
    }
    history.iter().map(|phi| psi.integrate_product_dm(phi)).collect()
}

/// Largest defect of the invariance identity
/// `μ(E) = Σ_i p_i ∫ μ(f_{i,t}⁻¹(E)) h(t) dt` over the given intervals.
///
/// Interval masses are exact integrals of the piecewise-linear density, so
/// both sides see the same μ; the t-integral is composite Gauss–Legendre
/// with panels cut where a preimage endpoint crosses a grid node (between
/// crossings the integrand is polynomial against the density).
pub fn invariance_residual(
    sys: &IfsSystem,
    phi: &GridFunction,
    intervals: &[(f64, f64)],
    quad: &QuadratureSpec,
) -> Result<f64> {
    sys.ensure_admissible()?;
    if sys.epsilon <= 0.0 {
        return Err(Error::Unsupported("invariance residual needs epsilon > 0".into()));
    }
    let mass = phi.integrate_dm();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "density must have unit mass, got {mass}"
        )));
    }
    for &(c, d) in intervals {
        if !(-1.0..=1.0).contains(&c) || !(-1.0..=1.0).contains(&d) || c > d {
            return Err(Error::Domain(format!("malformed interval ({c}, {d})")));
        }
    }

    let noise = sys.noise_density();
    let anti = phi.antiderivative_dm();
    let grid = phi.grid();
    let dx = grid.spacing();
    let eps = sys.epsilon;
    let mut worst = 0.0_f64;

    for &(c, d) in intervals {
        let lhs = anti.interval(c, d);
        let mut rhs = 0.0;
        for br in &sys.branches {
            // pre-image endpoints move affinely: e(t) = (e0 - b t)/λ
            let lo0 = (c - br.a) / sys.lambda;
            let hi0 = (d - br.a) / sys.lambda;
            let speed = -br.b / sys.lambda;

            // panel boundaries where either endpoint crosses a grid node
            let mut cuts = vec![0.0, eps];
            for e0 in [lo0, hi0] {
                let start = e0;
                let end = e0 + speed * eps;
                let (lo, hi) = (start.min(end), start.max(end));
                let j_lo = ((((lo + 1.0) / dx).floor() as isize) + 1).max(0);
                let j_hi = ((((hi + 1.0) / dx).ceil() as isize) - 1).min(grid.n_points() as isize - 1);
                for j in j_lo..=j_hi {
                    let t = (grid.node(j as usize) - e0) / speed;
                    if t > 0.0 && t < eps {
                        cuts.push(t);
                    }
                }
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

            let mut acc = 0.0;
            for pair in cuts.windows(2) {
                let (ta, tb) = (pair[0], pair[1]);
                if tb <= ta {
                    continue;
                }
                // the windowed mass is quadratic in t between cuts
                let order = quad.panel_order(noise.family(), tb - ta, eps).max(3);
                let rule = gl_rule(order);
                acc += rule.integrate(ta, tb, |t| {
                    anti.interval(lo0 + speed * t, hi0 + speed * t) * noise.pdf(t)
                });
            }
            rhs += br.p * acc;
        }
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Least-squares geometric rate of the tail of a residual trace.
pub fn convergence_rate(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 5 {
        return Err(Error::Config(format!(
            "convergence_rate needs at least 5 residuals, got {}",
            residuals.len()
        )));
    }
    if let Some(bad) = residuals.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::Domain(format!("residuals must be positive, found {bad}")));
    }
    Ok(geometric_fit(residuals, 10)?.rate)
}

/// Result of fitting `v_n ≈ C r^n` by least squares on the log.
#[derive(Debug, Clone, Copy)]
pub struct GeometricFit {
    pub rate: f64,
    pub r_squared: f64,
}

/// Fits the last `tail` entries (all must be positive).
pub fn geometric_fit(values: &[f64], tail: usize) -> Result<GeometricFit> {
    let start = values.len().saturating_sub(tail);
    let window = &values[start..];
    if window.len() < 2 {
        return Err(Error::Config("geometric fit needs at least 2 values".into()));
    }
    if window.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("geometric fit needs positive values".into()));
    }
    let n = window.len() as f64;
    let logs: Vec<f64> = window.iter().map(|v| v.ln()).collect();
    let mean_k = (window.len() as f64 - 1.0) / 2.0;
    let mean_l = logs.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (k, l) in logs.iter().enumerate() {
        let dk = k as f64 - mean_k;
        sxx += dk * dk;
        sxy += dk * (l - mean_l);
    }
    let slope = sxy / sxx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (k, l) in logs.iter().enumerate() {
        let pred = mean_l + slope * (k as f64 - mean_k);
        ss_res += (l - pred) * (l - pred);
        ss_tot += (l - mean_l) * (l - mean_l);
    }
    let r_squared = if ss_tot < 1e-300 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(GeometricFit {
        rate: slope.exp(),
        r_squared,
    })
}
