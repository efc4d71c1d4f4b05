//! Invariant densities of randomly perturbed affine iterated function systems.
//!
//! The systems live on `I = [-1, 1]` and consist of branches
//! `f_{k,t}(x) = λx + a_k + b_k t`, each chosen with probability `p_k`, with
//! the perturbation `t` drawn from a smooth density `h` on `[0, ε]`. The
//! invariant density is computed as the fixed point of the transfer operator
//!
//! ```text
//! Lφ(y) = Σ_i (p_i/λ) ∫ φ(f_{i,t}⁻¹(y)) χ_{f_{i,t}(I)}(y) h(t) dt
//! ```
//!
//! and certified/diagnosed three independent ways:
//!
//! * projective (Hilbert) cone metrics with closed-form Birkhoff contraction
//!   constants ([`cones`]),
//! * closed-form sup-derivative bounds checked against finite differences of
//!   the solved density ([`bounds`]),
//! * direct Monte Carlo simulation of the chain compared through the
//!   Kolmogorov–Smirnov statistic ([`oracle`]).
//!
//! Everything is deterministic: fixed quadrature layouts, seeded sampling,
//! sequential reductions.

// negated comparisons like `!(x > 0.0)` are deliberate: NaN must fail the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cones;
pub mod error;
pub mod grid;
pub mod operators;
pub mod oracle;
pub mod quadrature;
pub mod solver;
pub mod system;

pub use bounds::{check_smoothness, epsilon_scaling_study, theorem_bound, BoundReport, BoundRow, ScalingRow};
pub use cones::{
    contraction_constants, e_cone_diameter, theta_d, theta_e_lower_bound, witness_family,
    ConeParams, DConeConstants, WitnessSet,
};
pub use error::{Error, Result};
pub use grid::{Grid, GridFunction};
pub use operators::{apply_l, apply_u, apply_u_derivative, duality_residual};
pub use oracle::{density_cdf, empirical_cdf, ks_distance, sample_chain, CdfRef, EmpiricalCdf, SampleSet};
pub use quadrature::QuadratureSpec;
pub use solver::{
    convergence_rate, geometric_fit, invariance_residual, solve_density, weak_integrals,
    DensityResult, GeometricFit, SolveOptions,
};
pub use system::{
    image_interval, map_apply, map_inverse, noise_stats, validate_system, Branch, IfsSystem,
    NoiseDensity, NoiseFamily, NoiseSpec, NoiseStats, ValidationReport, Violation,
};
