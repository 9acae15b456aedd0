//! Compressed sparse column matrices and direct LU factorization.

mod csc;
mod lu;
mod market;
mod ordering;

pub use csc::{spmv, SparseMatrix, TripletBuilder};
pub use lu::{lu_solve, sparse_lu, LuFactors};
pub use market::{read_matrix_market, write_matrix_market};
pub use ordering::minimum_degree;
