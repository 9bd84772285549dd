//! Parameterized semi-implicit DAE models, their equilibria and
//! linearizations, pencil assembly, and reduction to the dense state matrix.

mod model;
mod newton;
mod pencil;
mod provider;

pub use model::{
    equilibrium_residual, fd_jacobians, linearize, solve_equilibrium, DaeModel, Equilibrium,
    FdOptions, ModelBlocks, ParamDescriptor,
};
pub use newton::{fd_jacobian, newton_solve, NewtonOptions};
pub use pencil::{assemble_pencil, reduce_state_matrix, reduce_with_lift, Pencil, ReducedSystem};
pub use provider::{
    default_h_p, fd_matrix_derivatives, fd_matrix_derivatives_central, FnProvider, ModelProvider,
    PencilProvider, PencilSample, ReducedProvider,
};
