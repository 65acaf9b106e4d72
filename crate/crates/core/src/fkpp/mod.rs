//! Finite-difference solver for the time-inhomogeneous F-KPP equation
//! `du/ds = 1/2 sigma^2 d2u/dx2 + F(u)` on a window that follows the front.

mod diagnostics;
mod field;
mod solver;

pub use diagnostics::{estimate_c, estimate_c_series, tail_asymptotics_diagnostic, CEstimate, CVariant};
pub use field::{front_position, FkppField};
pub use solver::{
    ordered_pair_run, solve_max_law, FkppSolver, FrontTrace, GridSpec, InitialCondition, ReactionStep, Scheme,
};
