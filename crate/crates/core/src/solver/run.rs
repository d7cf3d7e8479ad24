//! Leapfrog time stepping with semi-implicit damping and amplitude-limited
//! adaptive steps.
//!
//! One step from level `n` (time `t_n`, previous step `dtp`) to `n+1` solves
//!
//! `D2 u + mu/(1+t_n) D1 u = L u^n + a|v^n|^p + b|u^n|^q`
//!
//! pointwise for `u^{n+1}`, with `D2` the three-level second difference on
//! steps `(dtp, dt)`, `D1 = (u^{n+1} - u^{n-1}) / (dt + dtp)` and
//! `v^n = (u^n - u^{n-1})/dtp + dtp/2 * (previous D2)`.
//!
//! Only a leading block of nodes is updated. It starts just past the support
//! of the data and grows by one node per step (the stencil's reach) while its
//! outermost value is above a floor relative to the initial peak, so the
//! work follows the light cone plus the scheme's dispersive precursor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::SimConfig;
use super::grid::RadialGrid;
use super::state::State;
use crate::error::Result;
use crate::functionals::{residual_f, MonitorSeries, SnapshotEngine};
use crate::specfun::TestFunctionContext;

/// Values below this fraction of the initial peak at the edge of the active
/// region do not extend it.
pub const TAIL_RTOL: f64 = 1e-15;

/// Extra source term `S(r, t)` added to the right-hand side.
pub type Forcing = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Outcome {
    BlowUp { t_num: f64 },
    ReachedTmax,
    Unstable { reason: String },
}

impl Outcome {
    pub fn blow_up_time(&self) -> Option<f64> {
        match self {
            Outcome::BlowUp { t_num } => Some(*t_num),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Outcome::BlowUp { .. } => "BlowUp",
            Outcome::ReachedTmax => "ReachedTmax",
            Outcome::Unstable { .. } => "Unstable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub dimension: u32,
    pub h: f64,
    pub nr: usize,
    pub stable_dt: f64,
    pub dt_cfl: f64,
    pub steps: u64,
    pub dt_smallest: f64,
    pub dt_largest: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub monitors: MonitorSeries,
    pub grid: GridMeta,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepFailure {
    #[error("non-finite values after the step to t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepEvent {
    Advanced { dt: f64 },
    /// The amplitude-limited step fell below `dt_min`.
    Collapsed { dt: f64 },
    /// `t_max` was already reached; the state is unchanged.
    Horizon,
}

pub struct Solver {
    cfg: SimConfig,
    grid: RadialGrid,
    dt_cfl: f64,
    forcing: Option<Forcing>,
    /// Track the numerical support instead of updating every node.
    track_support: bool,
    fixed_dt: Option<f64>,
}

impl std::fmt::Debug for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver")
            .field("cfg", &self.cfg)
            .field("dt_cfl", &self.dt_cfl)
            .field("forced", &self.forcing.is_some())
            .field("track_support", &self.track_support)
            .finish()
    }
}

impl Solver {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = RadialGrid::new(cfg.params.n, cfg.domain_length, cfg.nr);
        let dt_cfl = cfg.cfl * grid.stable_dt();
        Ok(Self {
            cfg: cfg.clone(),
            grid,
            dt_cfl,
            forcing: None,
            track_support: true,
            fixed_dt: None,
        })
    }

    /// Adds a source term; used for manufactured-solution checks.
    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    /// Updates every node instead of tracking the numerical support.
    pub fn full_domain(mut self) -> Self {
        self.track_support = false;
        self
    }

    /// Uses a constant step instead of the adaptive rule.
    pub fn with_fixed_dt(mut self, dt: f64) -> Self {
        self.fixed_dt = Some(dt);
        self
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn dt_cfl(&self) -> f64 {
        self.dt_cfl
    }

    /// Number of leading nodes that may hold values above `floor` in `u`.
    fn initial_active(&self, u: &[f64], v: &[f64], floor: f64) -> usize {
        let nr = self.grid.nr();
        if !self.track_support {
            return nr;
        }
        let last = (0..nr).rev().find(|&i| u[i].abs() > floor || v[i].abs() > floor);
        last.map_or(2, |i| i + 3).min(nr)
    }

    /// `min(dt_cfl, eta / (b max|u|^{q-1} + a max|u_t|^{p-1} + 1))`.
    pub fn adaptive_dt(&self, max_u: f64, max_v: f64) -> f64 {
        if let Some(dt) = self.fixed_dt {
            return dt;
        }
        let prm = &self.cfg.params;
        let mut load = 1.0;
        if prm.has_power_term() {
            load += max_u.powf(prm.q - 1.0);
        }
        if prm.has_derivative_term() {
            load += max_v.powf(prm.p - 1.0);
        }
        self.dt_cfl.min(self.cfg.eta / load)
    }

    fn source(&self, u: f64, v: f64, r: f64, t: f64) -> f64 {
        let prm = &self.cfg.params;
        let mut s = 0.0;
        if prm.has_derivative_term() {
            s += super::abs_pow(v, prm.p);
        }
        if prm.has_power_term() {
            s += super::abs_pow(u, prm.q);
        }
        if let Some(f) = &self.forcing {
            s += f(r, t);
        }
        s
    }

    fn damping(&self, t: f64) -> f64 {
        self.cfg.params.mu / (1.0 + t)
    }

    /// Level 0 from `u(0) = eps f`, `u_t(0) = eps g`.
    pub fn initial_state(&self) -> State {
        let n = self.cfg.params.n;
        let eps = self.cfg.eps;
        let f = self.cfg.profile.f(n);
        let g = self.cfg.profile.g(n);
        let radii = self.grid.radii();
        let u0: Vec<f64> = radii.iter().map(|&r| eps * f(r)).collect();
        let v0: Vec<f64> = radii.iter().map(|&r| eps * g(r)).collect();
        self.initial_state_from(&u0, &v0)
    }

    /// Level 0 from arbitrary nodal `u` and `u_t`. The ghost level is the
    /// Taylor expansion `u - dt v + dt^2/2 a` with `a` the PDE acceleration, so
    /// that the first leapfrog step is the second-order Taylor start.
    pub fn initial_state_from(&self, u0: &[f64], v0: &[f64]) -> State {
        let len = self.grid.nr() + 1;
        let mut u = u0[..len].to_vec();
        let mut v = v0[..len].to_vec();
        u[len - 1] = 0.0;
        v[len - 1] = 0.0;
        let max_u = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let max_v = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tail_floor = TAIL_RTOL * max_u.max(max_v);
        let active = self.initial_active(&u, &v, tail_floor);
        u[active..].fill(0.0);
        v[active..].fill(0.0);

        let dt = self.adaptive_dt(max_u, max_v).min(self.cfg.t_max);
        let c = self.damping(0.0);
        let radii = self.grid.radii();

        let mut accel = vec![0.0; len];
        let mut u_prev = vec![0.0; len];
        for i in 0..active {
            let a0 = self.grid.laplacian_at(&u, i) - c * v[i] + self.source(u[i], v[i], radii[i], 0.0);
            accel[i] = a0;
            u_prev[i] = u[i] - dt * v[i] + 0.5 * dt * dt * a0;
        }
        State {
            t: 0.0,
            dt,
            u,
            u_prev,
            accel,
            step: 0,
            active,
            tail_floor,
        }
    }

    /// Advances by exactly `dt`.
    #[allow(clippy::needless_range_loop)]
    pub fn advance(&self, state: &mut State, dt: f64) -> Result<(), StepFailure> {
        let t = state.t;
        let dtp = state.dt;
        let c = self.damping(t);
        let edge = state.active - 1;
        let new_active = if state.active < self.grid.nr()
            && (state.u[edge].abs() > state.tail_floor || state.u_prev[edge].abs() > state.tail_floor)
        {
            state.active + 1
        } else {
            state.active
        };
        let radii = self.grid.radii();
        let span = dt + dtp;
        let half_damp = 0.5 * c * dt;
        let mut finite = true;

        for i in 0..new_active {
            let un = state.u[i];
            let up = state.u_prev[i];
            let v = (un - up) / dtp + 0.5 * dtp * state.accel[i];
            let rhs = self.grid.laplacian_at(&state.u, i) + self.source(un, v, radii[i], t);
            let next = (0.5 * span * dt * rhs + un + dt * (un - up) / dtp + half_damp * up)
                / (1.0 + half_damp);
            state.accel[i] = 2.0 / span * ((next - un) / dt - (un - up) / dtp);
            state.u_prev[i] = next;
            finite &= next.is_finite();
        }
        std::mem::swap(&mut state.u, &mut state.u_prev);
        state.t = t + dt;
        state.dt = dt;
        state.step += 1;
        state.active = new_active;
        if finite {
            Ok(())
        } else {
            Err(StepFailure::NonFinite { t: state.t })
        }
    }

    /// One step with the adaptive rule, clipped at `t_max`.
    pub fn step(&self, state: &mut State) -> Result<StepEvent, StepFailure> {
        let dt = self.adaptive_dt(state.max_abs_u(), state.max_abs_velocity());
        if dt < self.cfg.dt_min {
            return Ok(StepEvent::Collapsed { dt });
        }
        let remaining = self.cfg.t_max - state.t;
        if remaining <= 0.0 {
            return Ok(StepEvent::Horizon);
        }
        let dt = dt.min(remaining);
        self.advance(state, dt)?;
        Ok(StepEvent::Advanced { dt })
    }

    fn reference_amplitude(&self) -> f64 {
        let n = self.cfg.params.n;
        let f = self.cfg.profile.f(n);
        let g = self.cfg.profile.g(n);
        let peak = self
            .grid
            .radii()
            .iter()
            .fold(0.0f64, |m, &r| m.max(f(r).abs()).max(g(r).abs()));
        self.cfg.eps * peak
    }

    fn reached_horizon(&self, t: f64) -> bool {
        t >= self.cfg.t_max * (1.0 - 1e-12)
    }

    pub fn run(&self) -> Result<RunResult> {
        let prm = self.cfg.params;
        let ctx = TestFunctionContext::new(prm.n, prm.mu, self.cfg.profile.support_radius)?;
        let mut engine = SnapshotEngine::new(&self.grid, ctx, prm);
        let threshold = self.cfg.blowup_threshold * self.reference_amplitude();
        let stride = self.cfg.monitor_stride as u64;

        let mut state = self.initial_state();
        let mut monitors = MonitorSeries::default();
        monitors.push(engine.snapshot(&state)?);
        let mut dt_smallest = state.dt;
        let mut dt_largest = state.dt;
        let mut last_recorded = 0u64;

        let outcome = loop {
            if self.reached_horizon(state.t) {
                break Outcome::ReachedTmax;
            }
            match self.step(&mut state) {
                Ok(StepEvent::Collapsed { .. }) => break Outcome::BlowUp { t_num: state.t },
                Ok(StepEvent::Horizon) => break Outcome::ReachedTmax,
                Ok(StepEvent::Advanced { dt }) => {
                    if !self.reached_horizon(state.t) {
                        dt_smallest = dt_smallest.min(dt);
                    }
                    dt_largest = dt_largest.max(dt);
                }
                Err(e) => {
                    break Outcome::Unstable {
                        reason: e.to_string(),
                    }
                }
            }
            if threshold > 0.0 && state.max_abs_u() >= threshold {
                break Outcome::BlowUp { t_num: state.t };
            }
            if state.step.is_multiple_of(stride) {
                monitors.push(engine.snapshot(&state)?);
                last_recorded = state.step;
            }
        };
        if state.step != last_recorded && state.is_finite() {
            monitors.push(engine.snapshot(&state)?);
        }
        if monitors.len() >= 5 {
            let rel = residual_f(&monitors, &prm)?;
            monitors.set_residuals(&rel);
        }

        Ok(RunResult {
            outcome,
            monitors,
            grid: GridMeta {
                dimension: prm.n,
                h: self.grid.h(),
                nr: self.grid.nr(),
                stable_dt: self.grid.stable_dt(),
                dt_cfl: self.dt_cfl,
                steps: state.step,
                dt_smallest,
                dt_largest,
            },
        })
    }
}

/// Builds the level-0 state for `cfg`.
pub fn build_initial_state(cfg: &SimConfig) -> Result<State> {
    Ok(Solver::new(cfg)?.initial_state())
}

/// Advances `state` by one adaptive step of the scheme for `cfg`.
///
/// Rebuilds the grid on every call; loops should hold a [`Solver`] instead.
pub fn time_step(state: &State, cfg: &SimConfig) -> Result<(State, StepEvent)> {
    let solver = Solver::new(cfg)?;
    let mut next = state.clone();
    let event = solver
        .step(&mut next)
        .map_err(|e| crate::error::Error::StepFailed(e.to_string()))?;
    Ok((next, event))
}

pub fn run(cfg: &SimConfig) -> Result<RunResult> {
    Solver::new(cfg)?.run()
}
