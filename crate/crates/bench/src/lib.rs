//! Fixed workloads shared by the benchmarks.

use blowuplab_core::{ModelParams, SimConfig, TestFunctionContext};

/// `N = 1, mu = 0.5, p = 2`, derivative nonlinearity only.
pub fn derivative_case() -> ModelParams {
    ModelParams { n: 1, mu: 0.5, p: 2.0, q: 2.0, a: 1, b: 0 }
}

/// `N = 3, mu = 0.5, p = 1.9, q = 2.2`, both nonlinearities.
pub fn combined_case() -> ModelParams {
    ModelParams { n: 3, mu: 0.5, p: 1.9, q: 2.2, a: 1, b: 1 }
}

/// A short run on a grid of spacing `h` that blows up well before `t_max`.
pub fn blow_up_run(params: ModelParams, eps: f64, t_max: f64, h: f64) -> SimConfig {
    SimConfig::with_spacing(params, eps, t_max, h)
}

pub fn context(params: &ModelParams) -> TestFunctionContext {
    TestFunctionContext::new(params.n, params.mu, 1.0).expect("valid bench parameters")
}
