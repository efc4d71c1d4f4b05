//! Direct simulation of the random IFS chain — the independent ground truth
//! the solver is compared against.
//!
//! The chain is `x_{j+1} = f_{K_j, T_j}(x_j)` with `K_j` drawn from the
//! probability vector by inverse CDF and `T_j` from the noise density by its
//! quantile function, one ChaCha8 stream, fixed draw order (K then T per
//! step). Everything is reproducible bit-exactly from the seed. ε = 0 is
//! allowed here (the perturbation degenerates to t ≡ 0); the operator
//! modules reject it.

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::system::IfsSystem;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Samples of the chain after burn-in, with the provenance needed to
/// reproduce them.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub samples: Vec<f64>,
    pub seed: u64,
    pub burn_in: usize,
    pub count: usize,
}

/// Runs the chain from x₀ = 0, discarding the first `burn_in` states.
pub fn sample_chain(sys: &IfsSystem, count: usize, burn_in: usize, seed: u64) -> Result<SampleSet> {
    sys.ensure_admissible()?;
    let noise = sys.noise_density();
    let cumulative: Vec<f64> = sys
        .branches
        .iter()
        .scan(0.0, |acc, br| {
            *acc += br.p;
            Some(*acc)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0_f64;
    let mut samples = Vec::with_capacity(count);
    for step in 0..burn_in + count {
        let u_branch: f64 = rng.random();
        let k = cumulative
            .iter()
            .position(|c| u_branch < *c)
            .unwrap_or(sys.branches.len() - 1);
        let u_noise: f64 = rng.random();
        let t = noise.quantile(u_noise)?;
        let br = &sys.branches[k];
        x = sys.lambda * x + br.a + br.b * t;
        // chain confinement follows from the containment invariant
        assert!((-1.0..=1.0).contains(&x), "chain escaped the interval: {x}");
        if step >= burn_in {
            samples.push(x);
        }
    }
    Ok(SampleSet {
        samples,
        seed,
        burn_in,
        count,
    })
}

/// Right-continuous empirical distribution function of a sample set.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

pub fn empirical_cdf(set: &SampleSet) -> Result<EmpiricalCdf> {
    if set.samples.is_empty() {
        return Err(Error::Config("empirical CDF of an empty sample set".into()));
    }
    let mut sorted = set.samples.clone();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(EmpiricalCdf { sorted })
}

impl EmpiricalCdf {
    /// Fraction of samples ≤ x.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.sorted.partition_point(|s| *s <= x);
        k as f64 / self.sorted.len() as f64
    }

    /// Left limit: fraction of samples < x.
    pub fn eval_left(&self, x: f64) -> f64 {
        let k = self.sorted.partition_point(|s| *s < x);
        k as f64 / self.sorted.len() as f64
    }

    pub fn jump_points(&self) -> &[f64] {
        &self.sorted
    }
}

/// Cumulative distribution F(x_j) = ∫_{-1}^{x_j} φ dm of a unit-mass density
/// by cumulative Simpson (panel halves use the 5/8/-1 rule, so whole panels
/// telescope to composite Simpson and F(1) equals the Simpson mass).
pub fn density_cdf(phi: &GridFunction) -> Result<GridFunction> {
    if phi.min_value() < -1e-9 {
        return Err(Error::Domain(format!(
            "density must be nonnegative, min value {}",
            phi.min_value()
        )));
    }
    let mass = phi.integrate_dm();
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "density must have unit mass, got {mass}"
        )));
    }
    let grid = phi.grid();
    let n = grid.n_points();
    let v = phi.values();
    let h = grid.spacing() / 24.0; // dx/12 for the half-panel rule, /2 for dm
    let mut f = vec![0.0; n];
    for k in (0..n - 2).step_by(2) {
        f[k + 1] = f[k] + h * (5.0 * v[k] + 8.0 * v[k + 1] - v[k + 2]);
        f[k + 2] = f[k] + 4.0 * h * (v[k] + 4.0 * v[k + 1] + v[k + 2]);
    }
    GridFunction::from_values(grid, f)
}

/// A distribution function that the KS statistic can evaluate two-sidedly.
#[derive(Debug, Clone, Copy)]
pub enum CdfRef<'a> {
    Empirical(&'a EmpiricalCdf),
    /// Grid function whose values are already a CDF (piecewise linear).
    Grid(&'a GridFunction),
}

impl CdfRef<'_> {
    fn eval(&self, x: f64) -> f64 {
        match self {
            CdfRef::Empirical(e) => e.eval(x),
            CdfRef::Grid(g) => g.eval_clamped(x),
        }
    }

    fn eval_left(&self, x: f64) -> f64 {
        match self {
            CdfRef::Empirical(e) => e.eval_left(x),
            CdfRef::Grid(g) => g.eval_clamped(x),
        }
    }

    fn for_each_point(&self, mut visit: impl FnMut(f64)) {
        match self {
            CdfRef::Empirical(e) => e.jump_points().iter().copied().for_each(&mut visit),
            CdfRef::Grid(g) => {
                let grid = g.grid();
                grid.nodes().for_each(&mut visit);
            }
        }
    }
}

/// sup |F1 - F2| over the union of both CDFs' evaluation points (sample
/// points and grid nodes), taking the left limit at jumps into account.
pub fn ks_distance(f1: CdfRef, f2: CdfRef) -> f64 {
    let mut worst = 0.0_f64;
    let mut check = |p: f64| {
        worst = worst.max((f1.eval(p) - f2.eval(p)).abs());
        worst = worst.max((f1.eval_left(p) - f2.eval_left(p)).abs());
    };
    f1.for_each_point(&mut check);
    f2.for_each_point(&mut check);
    worst
}
