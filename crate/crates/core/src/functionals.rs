//! Weighted averages of the solution along a trajectory and the checks built
//! on them.
//!
//! With `psi = rho(t) phi(x)` the monitored quantities are
//! `F = ∫u`, `G = (1+t)^{mu/2} F`, `G1 = ∫u psi`, `G2 = ∫u_t psi`,
//! `Gamma = mu/(1+t) - 2 rho'/rho` and the nonlinear integrals `∫|u_t|^p`,
//! `∫|u|^q`. `psi` is assembled as `(e^t rho) (e^{-r} phi) e^{r-t}`; every
//! factor stays representable because the solution lives in `r <= t + R`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ModelParams;
use crate::quadrature::gl16;
use crate::solver::{abs_pow, InitialProfile, RadialGrid, State};
use crate::specfun::{phi, phi_scaled, rho_log_derivative, sphere_area, TestFunctionContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSnapshot {
    pub t: f64,
    pub max_abs_u: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "G1")]
    pub g1: f64,
    #[serde(rename = "G2")]
    pub g2: f64,
    #[serde(skip)]
    pub gamma: f64,
    pub int_ut_p: f64,
    pub int_u_q: f64,
    /// Relative defect of `F'' + mu/(1+t) F' = ∫(a|u_t|^p + b|u|^q)`; filled after the run.
    pub residual: f64,
    pub dt: f64,
}

/// Time series of snapshots in increasing time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorSeries {
    pub snapshots: Vec<FunctionalSnapshot>,
}

impl MonitorSeries {
    pub fn push(&mut self, s: FunctionalSnapshot) {
        self.snapshots.push(s);
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn end_time(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.t)
    }

    pub fn set_residuals(&mut self, rel: &[f64]) {
        for (s, r) in self.snapshots.iter_mut().zip(rel) {
            s.residual = *r;
        }
    }

    /// Writes the series as CSV with columns
    /// `t,max_abs_u,F,G,G1,G2,int_ut_p,int_u_q,residual,dt`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.snapshots {
            w.serialize(s)?;
        }
        if self.snapshots.is_empty() {
            w.write_record(CSV_COLUMNS)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a series written by [`MonitorSeries::write_csv`]. `Gamma` is not
    /// stored and comes back as NaN.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut snapshots = Vec::new();
        for row in r.deserialize() {
            let mut s: FunctionalSnapshot = row?;
            s.gamma = f64::NAN;
            snapshots.push(s);
        }
        Ok(Self { snapshots })
    }
}

pub const CSV_COLUMNS: [&str; 10] = [
    "t", "max_abs_u", "F", "G", "G1", "G2", "int_ut_p", "int_u_q", "residual", "dt",
];

/// Grid weights and `e^{-r} phi(r)` cached for repeated snapshots. `phi` is
/// evaluated lazily as the active region of the run grows.
#[derive(Debug, Clone)]
pub struct SnapshotEngine {
    ctx: TestFunctionContext,
    params: ModelParams,
    radii: Vec<f64>,
    weights: Vec<f64>,
    phi_scaled: Vec<f64>,
}

impl SnapshotEngine {
    pub fn new(grid: &RadialGrid, ctx: TestFunctionContext, params: ModelParams) -> Self {
        Self {
            ctx,
            params,
            weights: grid.trapezoid_weights(),
            radii: grid.radii().to_vec(),
            phi_scaled: Vec::new(),
        }
    }

    fn extend_phi(&mut self, len: usize) -> Result<()> {
        let n = self.ctx.dimension();
        for i in self.phi_scaled.len()..len {
            self.phi_scaled.push(phi_scaled(n, self.radii[i])?);
        }
        Ok(())
    }

    pub fn context(&self) -> &TestFunctionContext {
        &self.ctx
    }

    pub fn snapshot(&mut self, state: &State) -> Result<FunctionalSnapshot> {
        self.extend_phi(state.active)?;
        let t = state.t;
        let mu = self.ctx.mu();
        let rho_scaled = self.ctx.rho_scaled(t)?;
        let (p, q) = (self.params.p, self.params.q);

        let (mut f, mut g1, mut g2, mut nl_p, mut nl_q) = (0.0, 0.0, 0.0, 0.0, 0.0);
        // e^{r_i - t} from the outermost active node inwards, one product per node.
        let Some(top) = state.active.checked_sub(1) else {
            return Err(Error::InsufficientData("state has no active nodes".into()));
        };
        let step_down = (self.radii[0] - self.radii[1]).exp();
        let mut growth = (self.radii[top] - t).exp();
        for i in (0..=top).rev() {
            let w = self.weights[i];
            let u = state.u[i];
            let v = state.velocity_at(i);
            let psi = rho_scaled * self.phi_scaled[i] * growth;
            f += w * u;
            g1 += w * u * psi;
            g2 += w * v * psi;
            nl_p += w * abs_pow(v, p);
            nl_q += w * abs_pow(u, q);
            growth *= step_down;
        }
        if !(g1.is_finite() && g2.is_finite()) && state.is_finite() {
            return Err(Error::Overflow(format!("psi-weighted integrals at t = {t}")));
        }
        let gamma = mu / (1.0 + t) - 2.0 * rho_log_derivative(&self.ctx, t)?;
        Ok(FunctionalSnapshot {
            t,
            max_abs_u: state.max_abs_u(),
            f,
            g: (1.0 + t).powf(0.5 * mu) * f,
            g1,
            g2,
            gamma,
            int_ut_p: nl_p,
            int_u_q: nl_q,
            residual: f64::NAN,
            dt: state.dt,
        })
    }
}

/// One-off snapshot; builds the cached weights each call.
pub fn compute_snapshot(
    state: &State,
    grid: &RadialGrid,
    ctx: &TestFunctionContext,
    params: &ModelParams,
) -> Result<FunctionalSnapshot> {
    SnapshotEngine::new(grid, *ctx, *params).snapshot(state)
}

/// Finite-difference weights for the `order`-th derivative at `x0` from
/// samples at `xs` (Fornberg's recursion).
pub fn fd_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Derivative of a sampled series: three-point centered stencils inside,
/// one-sided second-order stencils (3 points for `f'`, 4 for `f''`) at the ends.
pub fn series_derivative(ts: &[f64], ys: &[f64], order: usize) -> Vec<f64> {
    let n = ts.len();
    let width = if order == 1 { 3 } else { 4 };
    (0..n)
        .map(|i| {
            let range = if i == 0 {
                0..width
            } else if i == n - 1 {
                n - width..n
            } else {
                i - 1..i + 2
            };
            let w = fd_weights(ts[i], &ts[range.clone()], order);
            w.iter().zip(&ys[range]).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Relative defect of `F'' + mu/(1+t) F' = a ∫|u_t|^p + b ∫|u|^q` at every
/// monitor time, measured against `|F''| + |mu F'/(1+t)| + |a ∫|u_t|^p + b ∫|u|^q|`
/// at the same time.
pub fn residual_f(series: &MonitorSeries, params: &ModelParams) -> Result<Vec<f64>> {
    if series.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "residual_F needs at least 5 monitor times, got {}",
            series.len()
        )));
    }
    let ts = series.times();
    let fs: Vec<f64> = series.snapshots.iter().map(|s| s.f).collect();
    let d1 = series_derivative(&ts, &fs, 1);
    let d2 = series_derivative(&ts, &fs, 2);
    let a = params.a as f64;
    let b = params.b as f64;
    Ok(series
        .snapshots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let damping = params.mu / (1.0 + s.t) * d1[i];
            let source = a * s.int_ut_p + b * s.int_u_q;
            let scale = d2[i].abs() + damping.abs() + source.abs();
            if scale > 0.0 {
                (d2[i] + damping - source).abs() / scale
            } else {
                0.0
            }
        })
        .collect())
}

/// `eps C(f, g)` with
/// `C(f,g) = rho(0) ∫ [(mu - rho'(0)/rho(0)) f phi + g phi] dx`.
pub fn c_fg(ctx: &TestFunctionContext, profile: &InitialProfile, eps: f64) -> Result<f64> {
    let n = ctx.dimension();
    let rho0 = crate::specfun::rho(ctx, 0.0)?;
    let kappa = ctx.mu() - rho_log_derivative(ctx, 0.0)?;
    let f = profile.f(n);
    let g = profile.g(n);
    let k = n as i32 - 1;
    let radius = profile.support_radius;
    let mut failed = None;
    let integral = gl16().integrate_panels(0.0, radius, 64, |r| {
        let weight = match phi(n, r) {
            Ok(v) => v,
            Err(e) => {
                failed = Some(e);
                0.0
            }
        };
        (kappa * f(r) + g(r)) * weight * r.powi(k)
    });
    if let Some(e) = failed {
        return Err(e);
    }
    Ok(eps * rho0 * sphere_area(n - 1) * integral)
}

/// `∫_{|x| <= t+R} psi^r dx / (rho^r e^{rt} (1+t)^{(2-r)(N-1)/2})`.
///
/// The `rho^r` factors cancel in log space; the numerator is integrated as
/// `∫ (e^{-s} phi(s))^r e^{r(s - t - R)} s^{N-1} ds` with the `e^{r(t+R)}`
/// factor carried separately.
pub fn lemma31_ratio(ctx: &TestFunctionContext, t: f64, r_exp: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    if !(r_exp > 1.0) {
        return Err(Error::Domain(format!("exponent must be > 1, got {r_exp}")));
    }
    let n = ctx.dimension();
    let edge = t + ctx.support_radius();
    let k = n as i32 - 1;
    let panels = (4.0 * r_exp * edge).ceil() as usize + 8;
    let mut failed = None;
    let integral = gl16().integrate_panels(0.0, edge, panels, |s| {
        let ps = match phi_scaled(n, s) {
            Ok(v) => v,
            Err(e) => {
                failed = Some(e);
                0.0
            }
        };
        ps.powf(r_exp) * (r_exp * (s - edge)).exp() * s.powi(k)
    });
    if let Some(e) = failed {
        return Err(e);
    }
    let log_num = (sphere_area(n - 1) * integral).ln() + r_exp * edge;
    let log_den = r_exp * t + 0.5 * (2.0 - r_exp) * (n as f64 - 1.0) * (1.0 + t).ln();
    let ratio = (log_num - log_den).exp();
    if !ratio.is_finite() {
        return Err(Error::Overflow(format!("lemma ratio at t = {t}")));
    }
    Ok(ratio)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub onset: f64,
    pub window_end: f64,
    #[serde(rename = "minG1_over_eps")]
    pub min_g1_over_eps: f64,
    #[serde(rename = "minG2_over_eps")]
    pub min_g2_over_eps: f64,
    pub violated: bool,
}

pub const DEFAULT_COERCIVITY_ONSET: f64 = 2.0;

/// Minimum of `G1/eps` and `G2/eps` over `[onset, 0.9 T_end]`.
pub fn coercivity_report(series: &MonitorSeries, eps: f64, onset: f64) -> Result<CoercivityReport> {
    let window_end = 0.9 * series.end_time();
    if onset >= window_end {
        return Err(Error::EmptyWindow {
            onset,
            end: window_end,
        });
    }
    let mut min_g1 = f64::INFINITY;
    let mut min_g2 = f64::INFINITY;
    for s in series.snapshots.iter().filter(|s| s.t >= onset && s.t <= window_end) {
        let (r1, r2) = if eps > 0.0 { (s.g1 / eps, s.g2 / eps) } else { (0.0, 0.0) };
        min_g1 = min_g1.min(r1);
        min_g2 = min_g2.min(r2);
    }
    if !min_g1.is_finite() {
        return Err(Error::EmptyWindow {
            onset,
            end: window_end,
        });
    }
    Ok(CoercivityReport {
        onset,
        window_end,
        min_g1_over_eps: min_g1,
        min_g2_over_eps: min_g2,
        violated: min_g1 <= 0.0 || min_g2 <= 0.0,
    })
}

/// Largest relative defect of `G1' - (rho'/rho) G1 = G2` for `t <= frac * T_end`,
/// measured against `|G1'| + |(rho'/rho) G1|`.
pub fn g2_consistency_defect(series: &MonitorSeries, ctx: &TestFunctionContext, frac: f64) -> Result<f64> {
    if series.len() < 5 {
        return Err(Error::InsufficientData("need at least 5 monitor times".into()));
    }
    let ts = series.times();
    let g1: Vec<f64> = series.snapshots.iter().map(|s| s.g1).collect();
    let dg1 = series_derivative(&ts, &g1, 1);
    let limit = frac * series.end_time();
    let mut worst: f64 = 0.0;
    for (i, s) in series.snapshots.iter().enumerate() {
        if s.t > limit {
            break;
        }
        let lr = rho_log_derivative(ctx, s.t)? * s.g1;
        let scale = dg1[i].abs() + lr.abs();
        if scale > 0.0 {
            worst = worst.max((dg1[i] - lr - s.g2).abs() / scale);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma31Summary {
    pub max_ratio: f64,
    pub min_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub max_rel: f64,
    pub window_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub lemma31: Lemma31Summary,
    pub coercivity: Option<CoercivityReport>,
    #[serde(rename = "residual_F")]
    pub residual_f: ResidualSummary,
    pub pass: bool,
}

/// Largest relative `residual_F` tolerated by [`verification_report`].
pub const RESIDUAL_TOLERANCE: f64 = 0.05;

/// Lemma ratio over integer times up to `T_end` (exponent 2), coercivity over
/// the default window and the identity residual up to `0.8 T_end`.
pub fn verification_report(
    series: &MonitorSeries,
    ctx: &TestFunctionContext,
    params: &ModelParams,
    eps: f64,
    onset: f64,
) -> Result<VerificationReport> {
    let end = series.end_time();
    let mut max_ratio: f64 = 0.0;
    let mut min_ratio = f64::INFINITY;
    let mut t = 0.0;
    while t <= end {
        let r = lemma31_ratio(ctx, t, 2.0)?;
        max_ratio = max_ratio.max(r);
        min_ratio = min_ratio.min(r);
        t += 1.0;
    }
    let coercivity = coercivity_report(series, eps, onset).ok();
    let window_end = 0.8 * end;
    let rel = residual_f(series, params)?;
    let max_rel = series
        .snapshots
        .iter()
        .zip(&rel)
        .filter(|(s, _)| s.t <= window_end)
        .fold(0.0f64, |m, (_, r)| m.max(*r));
    let pass = coercivity.as_ref().is_none_or(|c| !c.violated) && max_rel < RESIDUAL_TOLERANCE;
    Ok(VerificationReport {
        lemma31: Lemma31Summary { max_ratio, min_ratio },
        coercivity,
        residual_f: ResidualSummary { max_rel, window_end },
        pass,
    })
}
