use serde::{Deserialize, Serialize};

/// Two time levels of the leapfrog scheme on the radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    /// Size of the step from `u_prev` to `u`.
    pub dt: f64,
    /// Values at level `n` on nodes `0..=nr`.
    pub u: Vec<f64>,
    /// Values at level `n-1`. At `t = 0` this is a ghost level that encodes `u_t(0)`.
    pub u_prev: Vec<f64>,
    /// Second difference from the last step, i.e. `u_tt` centered at level `n-1`.
    pub accel: Vec<f64>,
    pub step: u64,
    /// Nodes `active..` are identically zero.
    pub active: usize,
    /// The active region grows by one node per step while its outermost
    /// node exceeds this magnitude.
    #[serde(default)]
    pub tail_floor: f64,
}

impl State {
    /// Second-order reconstruction of `u_t` at level `n`:
    /// `(u - u_prev)/dt + dt/2 * accel`.
    #[inline]
    pub fn velocity_at(&self, i: usize) -> f64 {
        (self.u[i] - self.u_prev[i]) / self.dt + 0.5 * self.dt * self.accel[i]
    }

    pub fn velocity(&self) -> Vec<f64> {
        (0..self.u.len()).map(|i| self.velocity_at(i)).collect()
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u[..self.active].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_velocity(&self) -> f64 {
        (0..self.active).fold(0.0, |m, i| m.max(self.velocity_at(i).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.u[..self.active].iter().all(|v| v.is_finite())
    }

    /// Largest radius carrying a nonzero value, if any.
    pub fn support_edge(&self, h: f64) -> Option<f64> {
        self.u.iter().rposition(|&v| v != 0.0).map(|i| i as f64 * h)
    }
}
