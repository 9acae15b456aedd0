//! Dense matrix exponential, the augmented operator that carries the input
//! terms, and a dense reference stepper.

mod augmented;
mod expm;
mod oracle;

pub use augmented::{
    augmented_dense_step, augmented_expm_step, build_augmented, AugmentedSystem, WTilde,
};
pub use expm::dense_expm;
pub use oracle::{phi_sum_oracle, phi_sum_step, DenseStepper, DenseSystem};
