//! Shift-and-invert Arnoldi on the augmented pencil and the conventional
//! Arnoldi process it is compared against.
//!
//! The rational operator is `(I - gamma A~)^{-1} = (C~ - gamma G~)^{-1} C~`.
//! Only `C + gamma G` is ever factorized; the two input columns and the
//! nilpotent tail are eliminated by hand in [`BlockLuFactors::solve`].

mod arnoldi;
mod block_lu;
mod standard;

pub use crate::phi::WTilde;
pub use arnoldi::{
    eval_expm_action, posterior_error, rational_arnoldi, KrylovBasis, Projector,
};
pub use block_lu::{augmented_apply, exact_rho, BlockLuFactors, CInverse};
pub use standard::{standard_arnoldi, standard_error_profile, standard_expm_action};
