//! The random iterated function system and its noise density.
//!
//! A system on `I = [-1, 1]` is a contraction factor `λ`, branches
//! `f_{k,t}(x) = λx + a_k + b_k t` with probabilities `p_k`, and a noise
//! density `h` supported on `[0, ε]`. Admissibility means every branch maps
//! `I` into `I` for every `t` in `[0, ε]`; since the containment constraint
//! is affine in `t`, checking both endpoints suffices.
//!
//! Noise densities come from a closed parametric family so that `h(0)`,
//! `h(ε)`, `sup|h'|` and the quantile function are exact; tabulated
//! densities are out of scope. All types are immutable after construction
//! and all operations are pure functions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One affine branch: shift `a`, noise coupling `b` (nonzero, either sign),
/// selection probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

/// Parametric noise families on `[0, ε]`, analytically normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    /// h(t) = 1/ε
    Uniform,
    /// h(t) = 2t/ε²
    LinearRamp,
    /// h(t) = (1 - cos(2πt/ε))/ε
    RaisedCosine,
    /// h(t) = 6t(ε-t)/ε³
    QuadraticBump,
}

/// Noise description as it appears in system JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    /// Reserved for parametrized families; the current families take none.
    #[serde(default)]
    pub params: Vec<f64>,
}

/// Full description of the random IFS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsSystem {
    pub lambda: f64,
    pub epsilon: f64,
    pub branches: Vec<Branch>,
    pub noise: NoiseSpec,
}

/// A violated admissibility rule, with the offending branch and endpoint
/// where that is meaningful.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub branch: Option<usize>,
    pub endpoint_t: Option<f64>,
    pub message: String,
}

/// Outcome of [`validate_system`]; an empty violation list means admissible.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every admissibility invariant; failures are data, not errors.
pub fn validate_system(sys: &IfsSystem) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |branch, endpoint_t, message: String| {
        violations.push(Violation {
            branch,
            endpoint_t,
            message,
        })
    };

    if !(sys.lambda > 0.0 && sys.lambda < 1.0) {
        push(None, None, format!("lambda must lie in (0, 1), got {}", sys.lambda));
    }
    if !(sys.epsilon >= 0.0) {
        push(None, None, format!("epsilon must be >= 0, got {}", sys.epsilon));
    }
    if sys.branches.is_empty() {
        push(None, None, "at least one branch is required".into());
    }
    if !sys.noise.params.is_empty() {
        push(None, None, format!(
            "noise family {:?} takes no parameters, got {}",
            sys.noise.family,
            sys.noise.params.len()
        ));
    }

    let mut p_sum = 0.0;
    for (k, br) in sys.branches.iter().enumerate() {
        if br.b == 0.0 {
            push(Some(k), None, format!("branch {k}: b must be nonzero"));
        }
        if !(br.p > 0.0) {
            push(Some(k), None, format!("branch {k}: probability must be positive, got {}", br.p));
        }
        p_sum += br.p;
        // containment at both endpoints of the affine-in-t constraint
        for t in [0.0, sys.epsilon] {
            let reach = sys.lambda + (br.a + br.b * t).abs();
            if reach > 1.0 {
                push(
                    Some(k),
                    Some(t),
                    format!("branch {k}: containment violated at t = {t}: lambda + |a + b t| = {reach} > 1"),
                );
            }
        }
    }
    if !sys.branches.is_empty() && (p_sum - 1.0).abs() > 1e-12 {
        push(None, None, format!("probabilities sum to {p_sum}, expected 1 within 1e-12"));
    }

    ValidationReport { violations }
}

impl IfsSystem {
    /// Errors with the first violation when the system is not admissible.
    pub fn ensure_admissible(&self) -> Result<()> {
        let report = validate_system(self);
        match report.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::Precondition(v.message.clone())),
        }
    }

    /// The runtime noise density for this system.
    pub fn noise_density(&self) -> NoiseDensity {
        NoiseDensity {
            family: self.noise.family,
            epsilon: self.epsilon,
        }
    }

    /// Σ p_i / |b_i|, the branch factor in the derivative bounds.
    pub fn prob_over_coupling(&self) -> f64 {
        self.branches.iter().map(|br| br.p / br.b.abs()).sum()
    }
}

/// f_{k,t}(x) = λx + a_k + b_k t.
pub fn map_apply(sys: &IfsSystem, k: usize, t: f64, x: f64) -> Result<f64> {
    let br = branch(sys, k)?;
    check_t(sys, t)?;
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [-1, 1]")));
    }
    Ok(sys.lambda * x + br.a + br.b * t)
}

/// f_{k,t}⁻¹(y) = (y - a_k - b_k t)/λ; defined on the image interval.
pub fn map_inverse(sys: &IfsSystem, k: usize, t: f64, y: f64) -> Result<f64> {
    let br = branch(sys, k)?;
    check_t(sys, t)?;
    let centered = y - br.a - br.b * t;
    if centered.abs() > sys.lambda + 1e-12 {
        return Err(Error::Domain(format!(
            "y = {y} outside the image interval of branch {k} at t = {t}"
        )));
    }
    Ok(centered / sys.lambda)
}

/// The image f_{k,t}(I) = [a_k + b_k t - λ, a_k + b_k t + λ].
pub fn image_interval(sys: &IfsSystem, k: usize, t: f64) -> Result<(f64, f64)> {
    let br = branch(sys, k)?;
    check_t(sys, t)?;
    let center = br.a + br.b * t;
    Ok((center - sys.lambda, center + sys.lambda))
}

fn branch(sys: &IfsSystem, k: usize) -> Result<&Branch> {
    sys.branches
        .get(k)
        .ok_or_else(|| Error::Domain(format!("branch index {k} out of range")))
}

fn check_t(sys: &IfsSystem, t: f64) -> Result<()> {
    if t < 0.0 || t > sys.epsilon {
        return Err(Error::Domain(format!("t = {t} outside [0, {}]", sys.epsilon)));
    }
    Ok(())
}

/// Runtime noise density: family plus the ε it lives on.
///
/// For ε = 0 the density degenerates to a point mass at 0; only the
/// sampling oracle accepts that case, and the closed-form statistics are
/// unavailable there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDensity {
    family: NoiseFamily,
    epsilon: f64,
}

/// Closed-form statistics h(0), h(ε), sup|h'| and the (analytic) total mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseStats {
    pub h0: f64,
    pub h_eps: f64,
    pub hprime_sup: f64,
    pub mass: f64,
}

impl NoiseDensity {
    pub fn new(family: NoiseFamily, epsilon: f64) -> Result<NoiseDensity> {
        if !(epsilon >= 0.0) {
            return Err(Error::Domain(format!("epsilon must be >= 0, got {epsilon}")));
        }
        Ok(NoiseDensity { family, epsilon })
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// h(t); callers gate on ε > 0.
    pub fn pdf(&self, t: f64) -> f64 {
        debug_assert!(self.epsilon > 0.0);
        let e = self.epsilon;
        match self.family {
            NoiseFamily::Uniform => 1.0 / e,
            NoiseFamily::LinearRamp => 2.0 * t / (e * e),
            NoiseFamily::RaisedCosine => (1.0 - (2.0 * std::f64::consts::PI * t / e).cos()) / e,
            NoiseFamily::QuadraticBump => 6.0 * t * (e - t) / (e * e * e),
        }
    }

    /// h'(t); callers gate on ε > 0.
    pub fn pdf_deriv(&self, t: f64) -> f64 {
        debug_assert!(self.epsilon > 0.0);
        let e = self.epsilon;
        match self.family {
            NoiseFamily::Uniform => 0.0,
            NoiseFamily::LinearRamp => 2.0 / (e * e),
            NoiseFamily::RaisedCosine => {
                let w = 2.0 * std::f64::consts::PI / e;
                w * (w * t).sin() / e
            }
            NoiseFamily::QuadraticBump => 6.0 * (e - 2.0 * t) / (e * e * e),
        }
    }

    /// Cumulative H(t) = ∫_0^t h.
    pub fn cdf(&self, t: f64) -> f64 {
        if self.epsilon == 0.0 {
            return if t >= 0.0 { 1.0 } else { 0.0 };
        }
        let s = (t / self.epsilon).clamp(0.0, 1.0);
        match self.family {
            NoiseFamily::Uniform => s,
            NoiseFamily::LinearRamp => s * s,
            NoiseFamily::RaisedCosine => s - (2.0 * std::f64::consts::PI * s).sin() / (2.0 * std::f64::consts::PI),
            NoiseFamily::QuadraticBump => s * s * (3.0 - 2.0 * s),
        }
    }

    /// Inverse CDF on `[0, 1]`; for ε = 0 the point mass gives 0.
    ///
    /// Uniform, linear-ramp and quadratic-bump invert in closed form; the
    /// raised cosine solves the Kepler-type equation with a safeguarded
    /// Newton iteration (deterministic: fixed iteration schedule).
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(format!("quantile argument {u} outside [0, 1]")));
        }
        if self.epsilon == 0.0 {
            return Ok(0.0);
        }
        let e = self.epsilon;
        let t = match self.family {
            NoiseFamily::Uniform => u * e,
            NoiseFamily::LinearRamp => u.sqrt() * e,
            NoiseFamily::QuadraticBump => {
                // invert the smoothstep 3s² - 2s³
                let s = 0.5 - ((1.0 - 2.0 * u).asin() / 3.0).sin();
                s * e
            }
            NoiseFamily::RaisedCosine => {
                let mut lo = 0.0;
                let mut hi = e;
                let mut t = u * e;
                for _ in 0..64 {
                    let err = self.cdf(t) - u;
                    if err > 0.0 {
                        hi = t;
                    } else {
                        lo = t;
                    }
                    let h = self.pdf(t);
                    let step = if h > 1e-12 / e { err / h } else { f64::NAN };
                    let next = t - step;
                    t = if next.is_finite() && next > lo && next < hi {
                        next
                    } else {
                        0.5 * (lo + hi)
                    };
                    if hi - lo < 1e-17 * e {
                        break;
                    }
                }
                t
            }
        };
        Ok(t.clamp(0.0, e))
    }

    /// Closed-form (h(0), h(ε), sup|h'|, ∫h); unavailable for ε = 0.
    pub fn stats(&self) -> Result<NoiseStats> {
        if self.epsilon <= 0.0 {
            return Err(Error::Unsupported(
                "noise statistics are undefined for epsilon = 0".into(),
            ));
        }
        let e = self.epsilon;
        let (h0, h_eps, hprime_sup) = match self.family {
            NoiseFamily::Uniform => (1.0 / e, 1.0 / e, 0.0),
            NoiseFamily::LinearRamp => (0.0, 2.0 / e, 2.0 / (e * e)),
            NoiseFamily::RaisedCosine => (0.0, 0.0, 2.0 * std::f64::consts::PI / (e * e)),
            NoiseFamily::QuadraticBump => (0.0, 0.0, 6.0 / (e * e)),
        };
        Ok(NoiseStats {
            h0,
            h_eps,
            hprime_sup,
            mass: 1.0,
        })
    }
}

/// Closed-form noise statistics for a system's density.
pub fn noise_stats(h: &NoiseDensity) -> Result<NoiseStats> {
    h.stats()
}
