//! Shared fixtures for the benchmarks.

use pgsim_core::phi::AugmentedSystem;
use pgsim_core::{
    build_mna, dc_analysis, generate_pdn_mesh, BlockLuFactors, KrylovBasis, MeshSpec, MnaSystem,
    SimConfig, WTilde,
};

/// Default shift used throughout the benchmarks.
pub const GAMMA: f64 = 1e-10;

/// Generated `rows x cols` mesh with the default element ranges and a
/// 10 ps input step.
pub fn mesh(rows: usize, cols: usize, seed: u64) -> MnaSystem {
    let mut spec = MeshSpec::with_size(rows, cols);
    spec.seed = seed;
    build_mna(&generate_pdn_mesh(&spec).expect("valid mesh")).expect("mesh stamps")
}

/// Run configuration for a horizon `t_stop` with the trapezoidal step at
/// 10 ps.
pub fn config(t_stop: f64) -> SimConfig {
    let mut cfg = SimConfig::new(t_stop);
    cfg.tr_h = 10e-12;
    cfg
}

/// Block LU factors of `sys` with the input columns of the first step set,
/// and the DC state to start from.
pub fn factors(sys: &MnaSystem) -> (BlockLuFactors, Vec<f64>) {
    let mut f = BlockLuFactors::factor(sys, GAMMA).expect("factorization");
    let w = WTilde::from_system(sys, 0.0, 10e-12)
        .and_then(|w| w.with_time_unit(GAMMA))
        .expect("input columns");
    f.set_w(w).expect("dimension");
    let x = dc_analysis(sys, &sys.eval_u(0.0)).expect("dc");
    (f, AugmentedSystem::start_vector(&x))
}

/// Rational Krylov basis of dimension `m` from `v0`.
pub fn basis(sys: &MnaSystem, f: &BlockLuFactors, v0: &[f64], m: usize) -> KrylovBasis {
    let mut b = KrylovBasis::new(v0, GAMMA).expect("nonzero start");
    while b.m() < m && !b.is_breakdown() {
        b.extend(|v| f.solve(sys, v)).expect("solve");
    }
    b
}
