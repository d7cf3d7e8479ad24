//! Modified Bessel functions of the second kind and the test function
//! `psi(x, t) = rho(t) * phi(x)` built from them.
//!
//! `K_nu` is evaluated from its integral representation
//! `K_nu(t) = ∫_0^∞ exp(-t cosh z) cosh(nu z) dz`. Internally everything runs on
//! the exponentially scaled quantities `e^t K_nu(t)`, `e^{-r} phi(r)` and
//! `e^t rho(t)`, which stay O(1) where the raw values overflow or underflow.
//! The `log_*` accessors expose those in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gl16, gl256};

/// Evaluation policy for the `K_nu` quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BesselEvalConfig {
    /// Stop doubling panels once successive estimates of `e^t K_nu(t)` agree
    /// to this relative tolerance.
    pub tolerance: f64,
    /// Truncate the integral where the exponent of the integrand reaches
    /// `-exponent_cap` (745 is the f64 underflow point of `exp`).
    pub exponent_cap: f64,
    /// Node budget before giving up with an accuracy error.
    pub max_nodes: usize,
}

impl Default for BesselEvalConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            exponent_cap: 745.0,
            max_nodes: 1 << 16,
        }
    }
}

impl BesselEvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bessel tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_nodes < 16 {
            return Err(Error::InvalidConfig(format!(
                "bessel node budget must be >= 16, got {}",
                self.max_nodes
            )));
        }
        if !(self.exponent_cap > 0.0) {
            return Err(Error::InvalidConfig("exponent cap must be > 0".into()));
        }
        Ok(())
    }
}

/// `e^t K_nu(t)` for `t > 0`.
pub fn bessel_k_scaled(nu: f64, t: f64, cfg: &BesselEvalConfig) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("K_nu(t) requires t > 0, got t = {t}")));
    }
    let rule = gl16();
    // cosh(z) - 1 = 2 sinh^2(z/2) keeps the exponent accurate near z = 0.
    let integrand = |z: f64| {
        let s = (0.5 * z).sinh();
        (-2.0 * t * s * s).exp() * (nu * z).cosh()
    };
    let z_max = (1.0 + cfg.exponent_cap / t).acosh();

    let mut panels = 1usize;
    let mut previous = rule.integrate_panels(0.0, z_max, panels, integrand);
    loop {
        panels *= 2;
        if panels * rule.len() > cfg.max_nodes {
            return Err(Error::Accuracy {
                tolerance: cfg.tolerance,
                max_nodes: cfg.max_nodes,
            });
        }
        let current = rule.integrate_panels(0.0, z_max, panels, integrand);
        if panels >= 4 && (current - previous).abs() <= cfg.tolerance * current.abs() {
            return Ok(current);
        }
        previous = current;
    }
}

/// Modified Bessel function of the second kind `K_nu(t)`, `t > 0`.
///
/// Underflows to zero beyond `t ≈ 745`; use [`log_bessel_k`] there.
pub fn bessel_k(nu: f64, t: f64, cfg: &BesselEvalConfig) -> Result<f64> {
    Ok(bessel_k_scaled(nu, t, cfg)? * (-t).exp())
}

pub fn log_bessel_k(nu: f64, t: f64, cfg: &BesselEvalConfig) -> Result<f64> {
    Ok(bessel_k_scaled(nu, t, cfg)?.ln() - t)
}

/// Surface area of the unit sphere `S^k` embedded in `R^{k+1}`.
pub fn sphere_area(k: u32) -> f64 {
    use std::f64::consts::PI;
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        k => 2.0 * PI / (k as f64 - 1.0) * sphere_area(k - 2),
    }
}

fn check_dimension(n: u32) -> Result<()> {
    if n < 1 {
        return Err(Error::Domain("spatial dimension must be >= 1".into()));
    }
    Ok(())
}

/// `e^{-r} phi(r)`.
///
/// For `N >= 2` the sphere integral reduces to
/// `|S^{N-2}| ∫_0^π e^{r cos θ} sin^{N-2} θ dθ`, evaluated with a fixed
/// 256-point Gauss–Legendre rule.
pub fn phi_scaled(n: u32, r: f64) -> Result<f64> {
    check_dimension(n)?;
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("phi requires r >= 0, got {r}")));
    }
    if n == 1 {
        return Ok(1.0 + (-2.0 * r).exp());
    }
    let k = (n - 2) as i32;
    let integral = gl256().integrate(0.0, std::f64::consts::PI, |theta| {
        let s = (0.5 * theta).sin();
        (-2.0 * r * s * s).exp() * theta.sin().powi(k)
    });
    Ok(sphere_area(n - 2) * integral)
}

/// The radial profile of `phi(x) = ∫_{S^{N-1}} e^{x·ω} dω` (`e^x + e^{-x}` for `N = 1`).
pub fn phi(n: u32, r: f64) -> Result<f64> {
    Ok(phi_scaled(n, r)? * r.exp())
}

pub fn log_phi(n: u32, r: f64) -> Result<f64> {
    Ok(phi_scaled(n, r)?.ln() + r)
}

/// Precomputed machinery for `psi(x, t) = rho(t) phi(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunctionContext {
    dimension: u32,
    mu: f64,
    support_radius: f64,
    bessel: BesselEvalConfig,
}

impl TestFunctionContext {
    pub fn new(dimension: u32, mu: f64, support_radius: f64) -> Result<Self> {
        Self::with_bessel(dimension, mu, support_radius, BesselEvalConfig::default())
    }

    pub fn with_bessel(
        dimension: u32,
        mu: f64,
        support_radius: f64,
        bessel: BesselEvalConfig,
    ) -> Result<Self> {
        check_dimension(dimension)?;
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::Domain(format!("damping mu must be >= 0, got {mu}")));
        }
        if !(support_radius > 0.0) {
            return Err(Error::Domain(format!(
                "support radius must be > 0, got {support_radius}"
            )));
        }
        bessel.validate()?;
        Ok(Self {
            dimension,
            mu,
            support_radius,
            bessel,
        })
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn bessel(&self) -> &BesselEvalConfig {
        &self.bessel
    }

    /// Order of the Bessel factor in `rho`: `(mu - 1) / 2`.
    pub fn order(&self) -> f64 {
        0.5 * (self.mu - 1.0)
    }

    fn shifted_time(&self, t: f64) -> Result<f64> {
        let s = t + 1.0;
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("rho requires t > -1, got {t}")));
        }
        Ok(s)
    }

    /// `e^t rho(t)`, which grows only like `(1 + t)^{mu/2}`.
    pub fn rho_scaled(&self, t: f64) -> Result<f64> {
        let s = self.shifted_time(t)?;
        let k = bessel_k_scaled(self.order(), s, &self.bessel)?;
        Ok(s.powf(0.5 * (self.mu + 1.0)) * k * (-1.0f64).exp())
    }

    pub fn log_rho(&self, t: f64) -> Result<f64> {
        let s = self.shifted_time(t)?;
        let k = bessel_k_scaled(self.order(), s, &self.bessel)?;
        Ok(0.5 * (self.mu + 1.0) * s.ln() + k.ln() - s)
    }

    pub fn log_psi(&self, r: f64, t: f64) -> Result<f64> {
        Ok(self.log_rho(t)? + log_phi(self.dimension, r)?)
    }
}

/// `rho(t) = (t+1)^{(mu+1)/2} K_{(mu-1)/2}(t+1)`.
///
/// Defined for every `t > -1`; the solver only samples `t >= 0` but the
/// centered-difference checks step slightly below zero.
pub fn rho(ctx: &TestFunctionContext, t: f64) -> Result<f64> {
    Ok(ctx.rho_scaled(t)? * (-t).exp())
}

/// `rho'(t) / rho(t) = mu/(1+t) - K_{(mu+1)/2}(t+1) / K_{(mu-1)/2}(t+1)`.
pub fn rho_log_derivative(ctx: &TestFunctionContext, t: f64) -> Result<f64> {
    let s = ctx.shifted_time(t)?;
    let upper = bessel_k_scaled(ctx.order() + 1.0, s, &ctx.bessel)?;
    let lower = bessel_k_scaled(ctx.order(), s, &ctx.bessel)?;
    Ok(ctx.mu / s - upper / lower)
}

/// `psi(r, t) = rho(t) phi(r)`.
pub fn psi(ctx: &TestFunctionContext, r: f64, t: f64) -> Result<f64> {
    Ok(rho(ctx, t)? * phi(ctx.dimension, r)?)
}

/// One row of the special-function verification table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub case: String,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(check: &str, case: String, value: f64, reference: f64, error: f64, tol: f64) -> Self {
        Self {
            check: check.to_string(),
            case,
            value,
            reference,
            error,
            tolerance: tol,
            pass: error.is_finite() && error <= tol,
        }
    }
}

pub(crate) const FD_STEP: f64 = 1e-4;

fn centered_first<F: Fn(f64) -> Result<f64>>(f: &F, x: f64, h: f64) -> Result<f64> {
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

fn centered_second<F: Fn(f64) -> Result<f64>>(f: &F, x: f64, h: f64) -> Result<f64> {
    Ok((f(x + h)? - 2.0 * f(x)? + f(x - h)?) / (h * h))
}

/// Relative residual of `rho'' - rho - (mu/(1+t) rho)'` by centered differences.
pub fn rho_ode_residual(ctx: &TestFunctionContext, t: f64, h: f64) -> Result<f64> {
    let mu = ctx.mu();
    let f = |s: f64| rho(ctx, s);
    let g = |s: f64| Ok(mu / (1.0 + s) * rho(ctx, s)?);
    let value = rho(ctx, t)?;
    let residual = centered_second(&f, t, h)? - value - centered_first(&g, t, h)?;
    Ok((residual / value).abs())
}

/// Relative residual of the radial Helmholtz equation `phi'' + (N-1)/r phi' = phi`.
pub fn phi_helmholtz_residual(n: u32, r: f64, h: f64) -> Result<f64> {
    if !(r > h) {
        return Err(Error::Domain(format!("need r > h for centered differences, r = {r}")));
    }
    // Work with e^{-r0} phi(r) to keep magnitudes O(1) at large r.
    let f = |s: f64| Ok(phi_scaled(n, s)? * (s - r).exp());
    let value = f(r)?;
    let lap = centered_second(&f, r, h)? + (n as f64 - 1.0) / r * centered_first(&f, r, h)?;
    Ok(((lap - value) / value).abs())
}

/// Relative residual of the conjugate equation
/// `psi_tt - Δpsi - (mu/(1+t) psi)_t = 0` at one point.
pub fn psi_conjugate_residual(ctx: &TestFunctionContext, r: f64, t: f64, h: f64) -> Result<f64> {
    let n = ctx.dimension();
    let mu = ctx.mu();
    let in_t = |s: f64| psi(ctx, r, s);
    let damped = |s: f64| Ok(mu / (1.0 + s) * psi(ctx, r, s)?);
    let in_r = |x: f64| psi(ctx, x, t);
    let value = psi(ctx, r, t)?;
    let lap = centered_second(&in_r, r, h)?
        + if r > 0.0 {
            (n as f64 - 1.0) / r * centered_first(&in_r, r, h)?
        } else {
            0.0
        };
    let residual = centered_second(&in_t, t, h)? - lap - centered_first(&damped, t, h)?;
    Ok((residual / value).abs())
}

/// Runs every special-function property check and returns one row per case.
pub fn verification_table(cfg: &BesselEvalConfig) -> Result<Vec<CheckRow>> {
    use std::f64::consts::PI;
    let mut rows = Vec::new();

    for t in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0] {
        let value = bessel_k(0.5, t, cfg)?;
        let reference = (PI / (2.0 * t)).sqrt() * (-t).exp();
        let err = (value / reference - 1.0).abs();
        rows.push(CheckRow::new("k_half_closed_form", format!("t={t}"), value, reference, err, 1e-10));
    }

    for nu in [0.5, 1.0, 2.0, 0.25] {
        for t in [0.1, 1.0, 10.0] {
            let plus = bessel_k(nu, t, cfg)?;
            let minus = bessel_k(-nu, t, cfg)?;
            let err = (plus / minus - 1.0).abs();
            rows.push(CheckRow::new("k_order_symmetry", format!("nu={nu},t={t}"), minus, plus, err, 1e-12));
        }
    }

    for nu in [0.0, 0.5, -0.5, 1.0, 2.0] {
        for t in [10.0, 20.0, 30.0, 50.0] {
            let value = bessel_k_scaled(nu, t, cfg)?;
            let reference = (PI / (2.0 * t)).sqrt();
            let err = (value / reference - 1.0).abs();
            rows.push(CheckRow::new("k_asymptotic_envelope", format!("nu={nu},t={t}"), value, reference, err, 5.0 / t));
        }
    }

    for n in [1u32, 2, 3] {
        for r in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let err = phi_helmholtz_residual(n, r, FD_STEP)?;
            rows.push(CheckRow::new("phi_helmholtz", format!("N={n},r={r}"), err, 0.0, err, 1e-5));
        }
    }

    for mu in [0.5, 1.0, 2.0, 3.0] {
        let ctx = TestFunctionContext::with_bessel(1, mu, 1.0, *cfg)?;
        for t in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0] {
            let err = rho_ode_residual(&ctx, t, FD_STEP)?;
            rows.push(CheckRow::new("rho_ode", format!("mu={mu},t={t}"), err, 0.0, err, 1e-6));
        }
        for t in [0.0, 1.0, 5.0] {
            let value = rho_log_derivative(&ctx, t)?;
            let log_rho = |s: f64| ctx.log_rho(s);
            let reference = centered_first(&log_rho, t, FD_STEP)?;
            let err = (value - reference).abs();
            rows.push(CheckRow::new("rho_log_derivative_fd", format!("mu={mu},t={t}"), value, reference, err, 1e-5));
        }
        let mut previous = f64::INFINITY;
        for t in [5.0, 10.0, 20.0, 40.0] {
            let gap = (rho_log_derivative(&ctx, t)? + 1.0).abs();
            let err = if gap < previous { 0.0 } else { gap - previous };
            rows.push(CheckRow::new("rho_log_derivative_limit", format!("mu={mu},t={t}"), gap, previous.min(1e300), err, 0.0));
            previous = gap;
        }
        for t in [0.0, 10.0, 100.0, 1000.0] {
            let value = ctx.log_rho(t)?;
            let ok = value.is_finite();
            rows.push(CheckRow::new("rho_positive", format!("mu={mu},t={t}"), value, 0.0, if ok { 0.0 } else { f64::INFINITY }, 0.0));
        }
    }

    for (n, mu, r, t) in [(1u32, 1.0, 0.5, 1.0), (2, 0.5, 1.0, 2.0), (3, 2.0, 2.0, 3.0)] {
        let ctx = TestFunctionContext::with_bessel(n, mu, 1.0, *cfg)?;
        let err = psi_conjugate_residual(&ctx, r, t, FD_STEP)?;
        rows.push(CheckRow::new("psi_conjugate", format!("N={n},mu={mu},r={r},t={t}"), err, 0.0, err, 1e-5));
    }

    Ok(rows)
}
