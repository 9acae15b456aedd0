//! Transient power-grid simulation with the matrix exponential method.
//!
//! The crate is organised bottom-up:
//!
//! * [`netlist`] parses a SPICE-subset netlist with piecewise-linear sources
//!   and generates synthetic RC meshes.
//! * [`sparse`] holds compressed-column matrices and the sparse LU used by
//!   every solver in the crate.
//! * [`mna`] stamps `C x' = -G x + B u` and computes the DC operating point.
//! * [`phi`] provides the dense matrix exponential, the augmented operator
//!   that folds the input terms into one exponential, and a dense reference
//!   stepper.
//! * [`krylov`] implements shift-and-invert (rational) Arnoldi on the
//!   augmented pencil through a single block LU factorization, plus a
//!   conventional Arnoldi mode for comparison.
//! * [`engine`] drives adaptive exponential stepping, fixed-step trapezoidal
//!   integration and the dense reference run.

pub mod engine;
pub mod error;
pub mod krylov;
pub mod mna;
pub mod netlist;
pub mod phi;
pub mod sparse;
pub mod tol;

pub use engine::{
    max_allowed_step, mexp_transient, oracle_transient, trapezoidal_transient, Method, RunStats,
    SimConfig, StepRecord, Waveform,
};
pub use error::{Error, Result};
pub use krylov::{BlockLuFactors, KrylovBasis, WTilde};
pub use mna::{build_mna, dc_analysis, MnaSystem};
pub use netlist::{
    generate_pdn_mesh, next_breakpoint, parse_netlist, Element, ElementKind, MeshDrive, MeshSpec,
    Netlist, PwlWaveform, SourceValue, Tran,
};
pub use sparse::{sparse_lu, LuFactors, SparseMatrix};
