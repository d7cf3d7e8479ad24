//! Radially symmetric Cauchy problem for
//! `u_tt - u_rr - (N-1)/r u_r + mu/(1+t) u_t = a|u_t|^p + b|u|^q`.

mod config;
mod grid;
mod refine;
mod run;
mod state;

pub use config::{bump, InitialProfile, ProfileShape, SimConfig};
pub use grid::RadialGrid;
pub use refine::{measure_lifespan, richardson, LifespanEstimate, TWO_LEVEL_ORDER};
pub use run::{
    build_initial_state, run, time_step, Forcing, GridMeta, Outcome, RunResult, Solver,
    StepEvent, StepFailure,
};
pub use state::State;

/// `|x|^e`, with the common integer exponents taken off the `powf` path.
#[inline]
pub(crate) fn abs_pow(x: f64, e: f64) -> f64 {
    let x = x.abs();
    if e == 2.0 {
        x * x
    } else if e == 1.0 {
        x
    } else if e == 3.0 {
        x * x * x
    } else {
        x.powf(e)
    }
}
