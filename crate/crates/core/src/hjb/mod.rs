//! Mild solutions of the semilinear Hamilton-Jacobi equation by weighted-norm
//! Picard iteration.

mod hamiltonian;
mod lattice;
mod schedule;
mod solver;

pub use hamiltonian::{Hamiltonian, HamiltonianFn, StateFn, StateGradFn, TerminalFunction};
pub use lattice::{
    log_weighted_norm, ratio_from_logs, weighted_norm, StateLattice, Stencil, ValueIterate,
};
pub use schedule::{schedule_beta, step_expression, step_supremum, BetaSchedule, Step};
pub use solver::{
    GammaStats, HjbSettings, HjbSolver, SolveReport, DEFAULT_BOX_SIGMAS, DEFAULT_LATTICE_NODES,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
