//! Run configuration: the system description plus solver/quadrature knobs.
//! Unknown keys are rejected everywhere.

use ifsdens_core::{contraction_constants, ConeParams, IfsSystem, Result};
use serde::Deserialize;

fn default_grid_points() -> usize {
    4001
}
fn default_t_nodes() -> usize {
    32
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    500
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: IfsSystem,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_t_nodes")]
    pub t_nodes: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cone: Option<ConeConfig>,
}

/// Cone parameters in the config; `b` falls back to twice the Lemma
/// threshold `b_min` when omitted.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeConfig {
    pub a: f64,
    pub gamma: f64,
    #[serde(default)]
    pub b: Option<f64>,
}

impl RunConfig {
    /// Resolved cone parameters (defaults: a = 0.5, γ = 1, b = 2·b_min).
    pub fn cone_params(&self) -> Result<ConeParams> {
        let (a, gamma, b) = match self.cone {
            Some(c) => (c.a, c.gamma, c.b),
            None => (0.5, 1.0, None),
        };
        let b = match b {
            Some(b) => b,
            None => 2.0 * contraction_constants(self.system.lambda, a, gamma)?.b_min,
        };
        ConeParams::new(a, gamma, b)
    }
}
