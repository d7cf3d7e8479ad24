//! Numerical lab for the scale-invariant damped wave equation
//!
//! ```text
//! u_tt - Δu + mu/(1+t) u_t = a|u_t|^p + b|u|^q,   x ∈ R^N, t > 0
//! ```
//!
//! with small radial data `(eps f, eps g)`.
//!
//! - [`specfun`]: modified Bessel `K_nu`, the test functions `phi`, `rho`, `psi`.
//! - [`exponents`]: critical exponents, region classification, lifespan rates.
//! - [`solver`]: radial finite-volume leapfrog with adaptive blow-up detection.
//! - [`functionals`]: weighted averages along a run and the identities they satisfy.
//! - [`lifespan`]: eps sweeps and log-log fits against the predicted rate.
//! - [`artifacts`]: content-addressed run directories.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod error;
pub mod exponents;
pub mod functionals;
pub mod lifespan;
pub mod quadrature;
pub mod solver;
pub mod specfun;

pub use error::{Error, Result};
pub use exponents::{
    classify, lifespan_exponent, thresholds, BoundKind, LifespanBound, ModelParams,
    RegionClassification, Thresholds,
};
pub use functionals::{
    CoercivityReport, FunctionalSnapshot, MonitorSeries, SnapshotEngine, VerificationReport,
};
pub use lifespan::{FitResult, SweepConfig, SweepResult, SweepRow, Verdict};
pub use solver::{
    measure_lifespan, run, InitialProfile, LifespanEstimate, Outcome, ProfileShape, RadialGrid,
    RunResult, SimConfig, Solver, State,
};
pub use specfun::{BesselEvalConfig, TestFunctionContext};
