//! Shared fixtures for the benchmarks.

use ifsdens_core::*;

/// Two-branch reference system with uniform noise.
pub fn two_branch_uniform() -> IfsSystem {
    IfsSystem {
        lambda: 0.4,
        epsilon: 0.1,
        branches: vec![
            Branch { a: -0.3, b: 1.0, p: 0.5 },
            Branch { a: 0.2, b: 1.0, p: 0.5 },
        ],
        noise: NoiseSpec { family: NoiseFamily::Uniform, params: vec![] },
    }
}

/// Same branches driven by the raised-cosine density (trig-heavy panels).
pub fn two_branch_cosine() -> IfsSystem {
    let mut sys = two_branch_uniform();
    sys.noise = NoiseSpec { family: NoiseFamily::RaisedCosine, params: vec![] };
    sys
}
