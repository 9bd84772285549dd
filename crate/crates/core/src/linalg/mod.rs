//! Real sparse and dense containers, sparse LU, and the dense eigensolver
//! used as reference and initializer.

mod complex;
mod dense;
mod eig;
mod lu;
mod mtx;
mod ordering;
mod sparse;

pub use complex::ComplexVector;
pub use dense::DenseMatrix;
pub use eig::{eig_dense, eigenvalues, DenseEigen};
pub use lu::{lu_factor, lu_solve, LuFactorization, LuOptions};
pub use mtx::{
    read_matrix_market, read_matrix_market_file, write_matrix_market, write_matrix_market_file,
};
pub use ordering::{minimum_degree, OrderingCache};
pub use sparse::{SparseMatrix, TripletBuilder};
