use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ModelParams;
use crate::quadrature::gl16;
use crate::specfun::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileShape {
    /// `exp(1 - 1/(1 - (r/R)^2))` on `r < R`, zero outside; peak 1 at the origin.
    #[default]
    Bump,
    /// Identically zero data.
    Zero,
}

/// Shapes of `f` and `g` in `u(x,0) = eps f(x)`, `u_t(x,0) = eps g(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialProfile {
    #[serde(default)]
    pub shape: ProfileShape,
    /// Rescale `f` and `g` to unit mass `∫_{R^N} f dx = 1` (resp. `g`).
    #[serde(default)]
    pub normalize: bool,
    pub support_radius: f64,
    #[serde(default = "one")]
    pub f_scale: f64,
    #[serde(default = "one")]
    pub g_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for InitialProfile {
    fn default() -> Self {
        Self {
            shape: ProfileShape::Bump,
            normalize: false,
            support_radius: 1.0,
            f_scale: 1.0,
            g_scale: 1.0,
        }
    }
}

/// Unit-peak smooth bump supported on `[0, radius)`.
pub fn bump(r: f64, radius: f64) -> f64 {
    let x = r / radius;
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

impl InitialProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.support_radius > 0.0) || !self.support_radius.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "profile.support_radius must be > 0, got {}",
                self.support_radius
            )));
        }
        if !(self.f_scale >= 0.0) || !(self.g_scale >= 0.0) {
            return Err(Error::InvalidConfig("profile scales must be nonnegative".into()));
        }
        Ok(())
    }

    fn shape_value(&self, r: f64) -> f64 {
        match self.shape {
            ProfileShape::Bump => bump(r, self.support_radius),
            ProfileShape::Zero => 0.0,
        }
    }

    /// `∫_{R^N}` of the unscaled shape.
    pub fn shape_mass(&self, dimension: u32) -> f64 {
        let k = dimension as i32 - 1;
        let integral = gl16().integrate_panels(0.0, self.support_radius, 64, |r| {
            self.shape_value(r) * r.powi(k)
        });
        sphere_area(dimension - 1) * integral
    }

    fn normalization(&self, dimension: u32) -> f64 {
        if !self.normalize {
            return 1.0;
        }
        let mass = self.shape_mass(dimension);
        if mass > 0.0 {
            1.0 / mass
        } else {
            1.0
        }
    }

    /// Closure evaluating `f(r)` in dimension `N`.
    pub fn f(&self, dimension: u32) -> impl Fn(f64) -> f64 + '_ {
        let scale = self.f_scale * self.normalization(dimension);
        move |r| scale * self.shape_value(r)
    }

    pub fn g(&self, dimension: u32) -> impl Fn(f64) -> f64 + '_ {
        let scale = self.g_scale * self.normalization(dimension);
        move |r| scale * self.shape_value(r)
    }
}

/// A discrete radial Cauchy problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub params: ModelParams,
    pub eps: f64,
    #[serde(default)]
    pub profile: InitialProfile,
    /// Radial extent `L` of the grid; `u = 0` is imposed at `r = L`.
    pub domain_length: f64,
    /// Number of grid cells; nodes are `r_i = i L / nr`, `i = 0..=nr`.
    pub nr: usize,
    /// Fraction of the stability limit used for the time step.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_max: f64,
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_stride")]
    pub monitor_stride: usize,
    /// Numerator of the amplitude-limited step `eta / (|u|^{q-1} + |u_t|^{p-1} + 1)`.
    #[serde(default = "default_eta")]
    pub eta: f64,
}

fn default_cfl() -> f64 {
    0.5
}
fn default_threshold() -> f64 {
    1e6
}
fn default_dt_min() -> f64 {
    1e-10
}
fn default_stride() -> usize {
    4
}
fn default_eta() -> f64 {
    0.5
}

impl SimConfig {
    /// A config with default numerics whose grid spacing is `h` and whose
    /// domain just covers the light cone up to `t_max`.
    pub fn with_spacing(params: ModelParams, eps: f64, t_max: f64, h: f64) -> Self {
        let profile = InitialProfile::default();
        let domain_length = t_max + profile.support_radius + 8.0 * h;
        let nr = ((domain_length / h).ceil() as usize).max(64);
        Self {
            params,
            eps,
            profile,
            domain_length: nr as f64 * h,
            nr,
            cfl: default_cfl(),
            t_max,
            blowup_threshold: default_threshold(),
            dt_min: default_dt_min(),
            monitor_stride: default_stride(),
            eta: default_eta(),
        }
    }

    pub fn h(&self) -> f64 {
        self.domain_length / self.nr as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        self.params.validate()?;
        self.profile.validate()?;
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return bad(format!("eps must be >= 0, got {}", self.eps));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return bad(format!("t_max must be > 0, got {}", self.t_max));
        }
        if self.nr < 64 {
            return bad(format!("nr must be >= 64, got {}", self.nr));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        let needed = self.t_max + self.profile.support_radius;
        if !(self.domain_length >= needed) {
            return bad(format!(
                "domain_length {} must be >= t_max + R = {needed}",
                self.domain_length
            ));
        }
        if !(self.blowup_threshold > 1.0) {
            return bad("blowup_threshold must be > 1".into());
        }
        if !(self.dt_min > 0.0) {
            return bad("dt_min must be > 0".into());
        }
        if self.monitor_stride == 0 {
            return bad("monitor_stride must be >= 1".into());
        }
        if !(self.eta > 0.0) {
            return bad("eta must be > 0".into());
        }
        Ok(())
    }

    /// Same problem on a grid refined by `2^level`. The monitor stride is kept,
    /// so monitor spacing shrinks with the time step.
    pub fn refined(&self, level: u32) -> Self {
        let factor = 1usize << level;
        Self {
            nr: self.nr * factor,
            ..self.clone()
        }
    }
}
