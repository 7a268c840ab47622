//! Linear building blocks: two-phase Stokes, heat and Laplace transmission.

pub mod elliptic;
pub mod heat;
pub mod sparse;
pub mod stokes;

pub use elliptic::{divergence_reduction, solve_elliptic_transmission, EllipticSolution, JumpKind};
pub use heat::{solve_heat_neumann, HeatOperator, HeatReport, HeatRhs, HeatSolution};
pub use sparse::{read_matrix_market, CsrMatrix, DirectSolver};
pub use stokes::{
    solve_two_phase_stokes_dirichlet, solve_two_phase_stokes_neumann, OuterBoundary, StokesOperator, StokesReport,
    StokesRhs, StokesSolution,
};
