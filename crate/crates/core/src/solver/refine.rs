//! Lifespan estimates from blow-up times on successively refined grids.

use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::run::{run, Outcome};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanEstimate {
    pub t_est: f64,
    /// Magnitude of the last inter-level difference (0 with a single level).
    pub uncertainty: f64,
    /// Detected blow-up time per level, coarsest first.
    pub levels: Vec<f64>,
    /// Observed convergence order used for the extrapolation, if any.
    pub order: Option<f64>,
    /// False when the level sequence was non-monotone and `t_est` is the finest value.
    pub extrapolated: bool,
}

/// Nominal order of the detected blow-up time when only two levels exist.
/// The amplitude-limited tail of the run contributes an O(h) error that
/// dominates the O(h^2) scheme error.
pub const TWO_LEVEL_ORDER: f64 = 1.0;

/// Richardson extrapolation of a sequence of values at spacings `h, h/2, h/4, ...`.
pub fn richardson(levels: &[f64]) -> LifespanEstimate {
    let finest = *levels.last().expect("at least one level");
    let n = levels.len();
    if n == 1 {
        return LifespanEstimate {
            t_est: finest,
            uncertainty: 0.0,
            levels: levels.to_vec(),
            order: None,
            extrapolated: false,
        };
    }
    let d_last = levels[n - 1] - levels[n - 2];
    let uncertainty = d_last.abs();
    let fallback = LifespanEstimate {
        t_est: finest,
        uncertainty,
        levels: levels.to_vec(),
        order: None,
        extrapolated: false,
    };
    if d_last == 0.0 {
        return LifespanEstimate { extrapolated: true, ..fallback };
    }
    let order = if n == 2 {
        TWO_LEVEL_ORDER
    } else {
        let d_prev = levels[n - 2] - levels[n - 3];
        if d_prev * d_last <= 0.0 || d_last.abs() >= d_prev.abs() {
            return fallback;
        }
        (d_prev / d_last).log2()
    };
    let factor = 2f64.powf(order) - 1.0;
    LifespanEstimate {
        t_est: finest + d_last / factor,
        uncertainty,
        levels: levels.to_vec(),
        order: Some(order),
        extrapolated: true,
    }
}

/// Runs `cfg` on `refine` grids (`h, h/2, ...`) and extrapolates the blow-up time.
pub fn measure_lifespan(cfg: &SimConfig, refine: u32) -> Result<LifespanEstimate> {
    if refine < 1 {
        return Err(Error::InvalidConfig("refine must be >= 1".into()));
    }
    let class = crate::exponents::classify(&cfg.params)?;
    if !class.is_blow_up() {
        return Err(Error::NoTheorem);
    }
    let mut times = Vec::with_capacity(refine as usize);
    for level in 0..refine {
        let result = run(&cfg.refined(level))?;
        match result.outcome {
            Outcome::BlowUp { t_num } => times.push(t_num),
            Outcome::ReachedTmax | Outcome::Unstable { .. } => {
                return Err(Error::NoBlowUp {
                    eps: cfg.eps,
                    t_max: cfg.t_max,
                })
            }
        }
    }
    Ok(richardson(&times))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_recovers_known_limit() {
        // T(h) = 5 + 0.3 h^2
        let levels: Vec<f64> = [0.1f64, 0.05, 0.025].iter().map(|h| 5.0 + 0.3 * h * h).collect();
        let est = richardson(&levels);
        assert!((est.t_est - 5.0).abs() < 1e-12);
        assert!((est.order.unwrap() - 2.0).abs() < 1e-9);
        assert!(est.extrapolated);
    }

    #[test]
    fn richardson_first_order_limit() {
        let levels: Vec<f64> = [0.1f64, 0.05, 0.025].iter().map(|h| 2.0 - 0.7 * h).collect();
        let est = richardson(&levels);
        assert!((est.t_est - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_levels_fall_back_to_finest() {
        let est = richardson(&[1.0, 1.1, 1.05]);
        assert_eq!(est.t_est, 1.05);
        assert!(!est.extrapolated);
        assert!((est.uncertainty - 0.05).abs() < 1e-12);
    }

    #[test]
    fn single_level() {
        let est = richardson(&[3.0]);
        assert_eq!(est.t_est, 3.0);
        assert_eq!(est.uncertainty, 0.0);
    }
}
