//! Lifespan sweeps over eps and scaling-law fits.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{classify, lifespan_exponent, BoundKind, LifespanBound, RegionClassification};
use crate::functionals::MonitorSeries;
use crate::solver::{richardson, run, Outcome, SimConfig};

pub const DEFAULT_TAU: f64 = 0.25;

fn default_refine() -> u32 {
    1
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_horizon_factor() -> f64 {
    3.0
}

/// Input of `sweep`: a base run whose `eps` is replaced per row.
///
/// The base `t_max` is the horizon for the largest eps. Later rows get
/// `t_max = horizon_factor * T_pred(eps)` where `T_pred` extrapolates the
/// largest-eps lifespan with the predicted exponent, capped by `t_max_cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: SimConfig,
    pub eps_list: Vec<f64>,
    #[serde(default = "default_refine")]
    pub refine: u32,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_horizon_factor")]
    pub horizon_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max_cap: Option<f64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.eps_list.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "eps_list needs at least 3 values, got {}",
                self.eps_list.len()
            )));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidConfig("every eps must be > 0".into()));
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig("eps_list must be strictly decreasing".into()));
        }
        if self.refine < 1 {
            return Err(Error::InvalidConfig("refine must be >= 1".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidConfig(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.horizon_factor >= 1.0) {
            return Err(Error::InvalidConfig("horizon_factor must be >= 1".into()));
        }
        if let Some(cap) = self.t_max_cap {
            if !(cap >= self.base.t_max) {
                return Err(Error::InvalidConfig("t_max_cap must be >= base t_max".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowOutcome {
    BlowUp,
    ReachedTmax,
    Unstable,
}

impl fmt::Display for RowOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowOutcome::BlowUp => "BlowUp",
            RowOutcome::ReachedTmax => "ReachedTmax",
            RowOutcome::Unstable => "Unstable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    /// Extrapolated blow-up time; for `ReachedTmax` the horizon (a lower bound).
    #[serde(rename = "T_est")]
    pub t_est: Option<f64>,
    pub uncertainty: f64,
    pub outcome: RowOutcome,
    pub t_max: f64,
    /// Blow-up time per refinement level, coarsest first.
    pub levels: Vec<f64>,
    /// Monitor series of every level that ran, coarsest first. Not serialized.
    #[serde(skip)]
    pub monitors: Vec<MonitorSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub base: SimConfig,
    pub classification: RegionClassification,
    pub bound: LifespanBound,
    pub refine: u32,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn blow_up_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.outcome == RowOutcome::BlowUp)
    }

    /// Writes `eps,T_est,uncertainty,outcome` rows.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["eps", "T_est", "uncertainty", "outcome"])?;
        for r in &self.rows {
            let t = r.t_est.map(|t| t.to_string()).unwrap_or_default();
            w.write_record([r.eps.to_string(), t, r.uncertainty.to_string(), r.outcome.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The base config with `eps` and horizon replaced; the grid spacing is kept
/// and the domain is extended to cover the light cone.
pub fn row_config(base: &SimConfig, eps: f64, t_max: f64) -> SimConfig {
    let h = base.h();
    let needed = t_max + base.profile.support_radius + 8.0 * h;
    let nr = base.nr.max((needed / h).ceil() as usize);
    SimConfig {
        eps,
        t_max,
        nr,
        domain_length: nr as f64 * h,
        ..base.clone()
    }
}

/// All refinement levels of one row.
pub fn measure_row(base: &SimConfig, eps: f64, t_max: f64, refine: u32) -> Result<SweepRow> {
    let cfg = row_config(base, eps, t_max);
    let mut levels = Vec::with_capacity(refine as usize);
    let mut monitors = Vec::with_capacity(refine as usize);
    for level in 0..refine {
        let result = run(&cfg.refined(level))?;
        monitors.push(result.monitors);
        match result.outcome {
            Outcome::BlowUp { t_num } => levels.push(t_num),
            Outcome::ReachedTmax => {
                return Ok(SweepRow {
                    eps,
                    t_est: Some(t_max),
                    uncertainty: 0.0,
                    outcome: RowOutcome::ReachedTmax,
                    t_max,
                    levels,
                    monitors,
                })
            }
            Outcome::Unstable { reason } => {
                log::warn!("eps = {eps}: level {level} unstable: {reason}");
                return Ok(SweepRow {
                    eps,
                    t_est: None,
                    uncertainty: 0.0,
                    outcome: RowOutcome::Unstable,
                    t_max,
                    levels,
                    monitors,
                });
            }
        }
    }
    let est = richardson(&levels);
    Ok(SweepRow {
        eps,
        t_est: Some(est.t_est),
        uncertainty: est.uncertainty,
        outcome: RowOutcome::BlowUp,
        t_max,
        levels,
        monitors,
    })
}

/// Number of horizon doublings tried when the largest eps does not blow up.
const CALIBRATION_RETRIES: u32 = 3;

/// Predicted lifespan at `eps` from the calibration point `(eps0, t0)`.
pub fn predicted_lifespan(bound: &LifespanBound, eps0: f64, t0: f64, eps: f64) -> Option<f64> {
    let ratio = eps0 / eps;
    match bound.kind {
        BoundKind::Algebraic => Some(t0 * ratio.powf(bound.exponent)),
        BoundKind::Exponential => {
            let log_t0 = t0.ln().max(1.0);
            Some((log_t0 * ratio.powf(bound.exponent)).exp())
        }
        BoundKind::None => None,
    }
}

pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let classification = classify(&cfg.base.params)?;
    if !classification.is_blow_up() {
        return Err(Error::NoTheorem);
    }
    let bound = lifespan_exponent(&cfg.base.params)?;
    let cap = cfg.t_max_cap.unwrap_or(f64::INFINITY);
    let eps0 = cfg.eps_list[0];

    let mut horizon = cfg.base.t_max;
    let mut first = measure_row(&cfg.base, eps0, horizon, cfg.refine)?;
    for _ in 0..CALIBRATION_RETRIES {
        if first.outcome != RowOutcome::ReachedTmax || horizon >= cap {
            break;
        }
        horizon = (2.0 * horizon).min(cap);
        log::info!("eps = {eps0}: no blow-up, retrying with t_max = {horizon}");
        first = measure_row(&cfg.base, eps0, horizon, cfg.refine)?;
    }
    let t0 = match first.outcome {
        RowOutcome::BlowUp => first.t_est.unwrap_or(horizon),
        _ => horizon,
    };

    let rest: Vec<Result<SweepRow>> = cfg.eps_list[1..]
        .par_iter()
        .map(|&eps| {
            let t_max = predicted_lifespan(&bound, eps0, t0, eps)
                .map_or(horizon, |t| (cfg.horizon_factor * t).max(horizon))
                .min(cap);
            measure_row(&cfg.base, eps, t_max, cfg.refine)
        })
        .collect();
    let mut rows = vec![first];
    for r in rest {
        rows.push(r?);
    }
    Ok(SweepResult {
        base: cfg.base.clone(),
        classification,
        bound,
        refine: cfg.refine,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    Power,
    Exponential,
}

impl fmt::Display for FitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitKind::Power => "power",
            FitKind::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: FitKind,
    /// Power: slope of `ln T` against `ln eps`. Exponential: slope of `ln T`
    /// against `eps^{-(p-1)}`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Slope of `ln ln T` against `ln eps` (exponential fits only); compared
    /// with `-(p-1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_slope: Option<f64>,
    pub theoretical_exponent: Option<f64>,
    pub relative_deviation: Option<f64>,
    pub points: usize,
    /// Eps values of rows left out of the fit.
    pub excluded: Vec<f64>,
}

impl FitResult {
    /// The measured counterpart of the predicted exponent `k` (positive when
    /// `T` grows as eps shrinks).
    pub fn measured_exponent(&self) -> f64 {
        match self.kind {
            FitKind::Power => -self.slope,
            FitKind::Exponential => -self.rate_slope.unwrap_or(f64::NAN),
        }
    }
}

/// Ordinary least squares `y = slope x + intercept`; returns `(slope, intercept, r^2)`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::InsufficientData(format!("regression needs at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("regression abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    Ok((slope, intercept, r2))
}

fn usable_rows(result: &SweepResult) -> (Vec<(f64, f64)>, Vec<f64>) {
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for r in &result.rows {
        match (r.outcome, r.t_est) {
            (RowOutcome::BlowUp, Some(t)) if t > 0.0 => used.push((r.eps, t)),
            _ => {
                log::warn!("eps = {}: {} row excluded from the fit", r.eps, r.outcome);
                excluded.push(r.eps);
            }
        }
    }
    (used, excluded)
}

fn expected_exponent(bound: &LifespanBound, kind: BoundKind) -> Option<f64> {
    (bound.kind == kind).then_some(bound.exponent)
}

/// Least squares on `(ln eps, ln T)` over the blow-up rows.
pub fn fit_power_law(result: &SweepResult) -> Result<FitResult> {
    let (rows, excluded) = usable_rows(result);
    let x: Vec<f64> = rows.iter().map(|(e, _)| e.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|(_, t)| t.ln()).collect();
    let (slope, intercept, r_squared) = linear_regression(&x, &y)?;
    let k = expected_exponent(&result.bound, BoundKind::Algebraic);
    Ok(FitResult {
        kind: FitKind::Power,
        slope,
        intercept,
        r_squared,
        rate_slope: None,
        theoretical_exponent: k,
        relative_deviation: k.map(|k| (slope + k).abs() / k),
        points: rows.len(),
        excluded,
    })
}

/// Least squares on `(eps^{-(p-1)}, ln T)` over the blow-up rows.
pub fn fit_exponential_law(result: &SweepResult, p: f64) -> Result<FitResult> {
    let (rows, excluded) = usable_rows(result);
    let x: Vec<f64> = rows.iter().map(|(e, _)| e.powf(-(p - 1.0))).collect();
    let y: Vec<f64> = rows.iter().map(|(_, t)| t.ln()).collect();
    let (slope, intercept, r_squared) = linear_regression(&x, &y)?;
    let rate_slope = if rows.iter().all(|(_, t)| *t > 1.0) {
        let lx: Vec<f64> = rows.iter().map(|(e, _)| e.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        linear_regression(&lx, &ly).ok().map(|(s, _, _)| s)
    } else {
        None
    };
    let k = expected_exponent(&result.bound, BoundKind::Exponential);
    Ok(FitResult {
        kind: FitKind::Exponential,
        slope,
        intercept,
        r_squared,
        rate_slope,
        theoretical_exponent: k,
        relative_deviation: k.zip(rate_slope).map(|(k, s)| (s + k).abs() / k),
        points: rows.len(),
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconclusive,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub verdict: Verdict,
    pub measured_exponent: f64,
    pub theoretical_exponent: f64,
    pub tau: f64,
}

/// Consistent if the measured exponent lies in `[(1-tau)k, (1+tau)k]`,
/// inconsistent if it exceeds `(1+tau)k`, inconclusive otherwise.
pub fn compare_to_theory(fit: &FitResult, bound: &LifespanBound, tau: f64) -> Result<VerdictRecord> {
    let matches = matches!(
        (fit.kind, bound.kind),
        (FitKind::Power, BoundKind::Algebraic) | (FitKind::Exponential, BoundKind::Exponential)
    );
    if !matches {
        return Err(Error::KindMismatch {
            fit: fit.kind.to_string(),
            bound: bound.kind.to_string(),
        });
    }
    let k = bound.exponent;
    let measured = fit.measured_exponent();
    let verdict = if !measured.is_finite() {
        Verdict::Inconclusive
    } else if measured > (1.0 + tau) * k {
        Verdict::Inconsistent
    } else if measured >= (1.0 - tau) * k {
        Verdict::Consistent
    } else {
        Verdict::Inconclusive
    };
    Ok(VerdictRecord {
        verdict,
        measured_exponent: measured,
        theoretical_exponent: k,
        tau,
    })
}

/// Fit matching the bound kind (power for algebraic, exponential otherwise).
pub fn fit_for_bound(result: &SweepResult) -> Result<FitResult> {
    match result.bound.kind {
        BoundKind::Exponential => fit_exponential_law(result, result.base.params.p),
        _ => fit_power_law(result),
    }
}
