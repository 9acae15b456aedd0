//! Numerical thresholds shared by the solvers and their tests.

/// Threshold partial pivoting: the diagonal entry is kept as pivot when its
/// magnitude is at least this fraction of the column maximum.
pub const PIVOT_THRESHOLD: f64 = 0.1;

/// Relative `h_{m+1,m}` below which the Krylov space is treated as invariant.
pub const HAPPY_BREAKDOWN: f64 = 1e-14;

/// Largest accepted condition estimate of the projected Hessenberg matrix.
pub const HESSENBERG_MAX_COND: f64 = 1e14;

/// Default shift of the rational Krylov operator, seconds.
pub const DEFAULT_GAMMA: f64 = 1e-10;

/// Default maximum step, seconds.
pub const DEFAULT_H_MAX: f64 = 1e-9;

/// Default cap on the Krylov dimension.
pub const DEFAULT_M_MAX: usize = 30;

/// Number of step halvings tried before giving up on a step.
pub const MAX_HALVINGS: usize = 6;

/// Largest system accepted by the dense reference stepper.
pub const ORACLE_MAX_N: usize = 500;

/// Relative slack used when comparing time instants.
pub const TIME_EPS: f64 = 1e-9;
