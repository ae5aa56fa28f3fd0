//! Linear and mixed-integer programming for desk-scale unit commitment.
//!
//! [`Problem`] describes the model, [`solve_lp`] runs the bounded dual simplex
//! and [`solve_mip`] wraps it in branch-and-bound. [`write_mps`] exports a
//! model for external solvers.

pub mod mip;
pub mod model;
pub mod mps;
pub mod simplex;

pub use mip::{solve_mip, solve_mip_from, MipOptions, MipSolution, MipStatus};
pub use model::{Problem, Row, RowId, VarId, Variable};
pub use mps::write_mps;
pub use simplex::{dual_objective, solve_lp, DualSimplex, LpSolution, LpStatus, SimplexOptions};

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error("malformed model: {0}")]
    Malformed(String),
}
