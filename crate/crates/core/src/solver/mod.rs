//! Monotone Lax-Friedrichs solver on a periodic grid, plus a Hopf-Lax oracle
//! for convex Hamiltonians of `p` alone.

mod grid;
mod hopf_lax;
mod scheme;

pub use grid::{FieldHeader, GridField, MIN_POINTS};
pub use hopf_lax::hopf_lax;
pub use scheme::{
    cfl_number, discrete_gradient, discrete_time_derivative, estimate_theta, lf_step, solve,
    Scheme, SolveOptions, SolveTrace, ThetaPolicy, ThetaRecord, TraceMeta, CFL_LIMIT,
    THETA_REFRESH, THETA_SAFETY,
};
