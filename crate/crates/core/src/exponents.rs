//! Critical exponents and the blow-up region classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for deciding `p == p_G(N + mu)`.
pub const CRITICAL_RTOL: f64 = 1e-9;

/// Coefficients of `u_tt - Δu + mu/(1+t) u_t = a|u_t|^p + b|u|^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "N")]
    pub n: u32,
    pub mu: f64,
    pub p: f64,
    pub q: f64,
    pub a: u8,
    pub b: u8,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n < 1 {
            return bad("N must be >= 1".into());
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return bad(format!("mu must be >= 0, got {}", self.mu));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return bad(format!("p must be > 1, got {}", self.p));
        }
        if !(self.q > 1.0) || !self.q.is_finite() {
            return bad(format!("q must be > 1, got {}", self.q));
        }
        if self.n >= 3 {
            let cap = 2.0 * self.n as f64 / (self.n as f64 - 2.0);
            if self.q > cap {
                return bad(format!("q must be <= 2N/(N-2) = {cap} for N = {}", self.n));
            }
        }
        if self.a > 1 || self.b > 1 {
            return bad("a and b are flags in {0, 1}".into());
        }
        Ok(())
    }

    /// Effective dimension `N + mu`.
    pub fn shifted_dimension(&self) -> f64 {
        self.n as f64 + self.mu
    }

    pub fn has_derivative_term(&self) -> bool {
        self.a == 1
    }

    pub fn has_power_term(&self) -> bool {
        self.b == 1
    }
}

fn check_dimension(d: f64) -> Result<()> {
    if !(d > 1.0) || !d.is_finite() {
        return Err(Error::Domain(format!("critical exponents need d > 1, got {d}")));
    }
    Ok(())
}

/// Strauss exponent: the positive root of `(d-1)q^2 - (d+1)q - 2 = 0`.
///
/// Found by safeguarded Newton iteration on a bracket instead of the closed
/// form, which cancels badly as `d -> 1+`.
pub fn strauss_exponent(d: f64) -> Result<f64> {
    check_dimension(d)?;
    let f = |q: f64| ((d - 1.0) * q - (d + 1.0)) * q - 2.0;
    let df = |q: f64| 2.0 * (d - 1.0) * q - (d + 1.0);
    let mut lo = 1.0; // f(1) = -4
    let mut hi = 2.0;
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut q = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fq = f(q);
        if fq == 0.0 {
            return Ok(q);
        }
        if fq < 0.0 {
            lo = q;
        } else {
            hi = q;
        }
        let step = fq / df(q);
        let newton = q - step;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - q).abs() <= 4.0 * f64::EPSILON * q {
            return Ok(next);
        }
        q = next;
    }
    Ok(q)
}

/// Closed form `(d+1+sqrt(d^2+10d-7)) / (2(d-1))`, kept for cross-checks.
pub fn strauss_exponent_closed_form(d: f64) -> Result<f64> {
    check_dimension(d)?;
    Ok((d + 1.0 + (d * d + 10.0 * d - 7.0).sqrt()) / (2.0 * (d - 1.0)))
}

/// Glassey exponent `1 + 2/(d-1)`.
pub fn glassey_exponent(d: f64) -> Result<f64> {
    check_dimension(d)?;
    Ok(1.0 + 2.0 / (d - 1.0))
}

/// `(q-1)((d-1)p - 2)`; the combined region is where this is below 4.
pub fn lambda_combined(p: f64, q: f64, d: f64) -> f64 {
    (q - 1.0) * ((d - 1.0) * p - 2.0)
}

/// Damping at which `lambda(p, q, N + mu) = 4`. Non-positive values mean the
/// admissible damping interval is empty.
pub fn mu_star(p: f64, q: f64, n: u32) -> f64 {
    2.0 * (q + 1.0) / (p * (q - 1.0)) - n as f64 + 1.0
}

/// Dimension shift from the earlier derivative-nonlinearity result:
/// `2mu` on [0,1), `2` on [1,2), `mu` from 2 on.
pub fn sigma_shift(mu: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::Domain(format!("sigma requires mu >= 0, got {mu}")));
    }
    Ok(if mu < 1.0 {
        2.0 * mu
    } else if mu < 2.0 {
        2.0
    } else {
        mu
    })
}

/// Which blow-up statement covers a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionClassification {
    DerivativeBlowUp,
    PowerBlowUp,
    CombinedBlowUp,
    NoTheorem,
}

impl RegionClassification {
    pub fn is_blow_up(&self) -> bool {
        !matches!(self, RegionClassification::NoTheorem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Algebraic,
    Exponential,
    None,
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BoundKind::Algebraic => "algebraic",
            BoundKind::Exponential => "exponential",
            BoundKind::None => "none",
        };
        f.write_str(s)
    }
}

/// Upper bound on the lifespan: `T <= C eps^{-k}` (algebraic) or
/// `log T <= C eps^{-k}` (exponential).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanBound {
    pub kind: BoundKind,
    pub exponent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Thresholds evaluated at the shifted dimension `N + mu`.
///
/// When `N + mu <= 1` both critical exponents are infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    #[serde(rename = "p_G")]
    pub p_g: f64,
    #[serde(rename = "q_S")]
    pub q_s: f64,
    pub lambda: f64,
    pub mu_star: f64,
}

pub fn thresholds(params: &ModelParams) -> Thresholds {
    let d = params.shifted_dimension();
    Thresholds {
        p_g: glassey_exponent(d).unwrap_or(f64::INFINITY),
        q_s: strauss_exponent(d).unwrap_or(f64::INFINITY),
        lambda: lambda_combined(params.p, params.q, d),
        mu_star: mu_star(params.p, params.q, params.n),
    }
}

fn at_or_below(x: f64, threshold: f64) -> bool {
    x <= threshold || (x - threshold).abs() <= CRITICAL_RTOL * threshold.abs()
}

pub fn classify(params: &ModelParams) -> Result<RegionClassification> {
    params.validate()?;
    let th = thresholds(params);
    let derivative = params.has_derivative_term();
    let power = params.has_power_term();
    Ok(if derivative && at_or_below(params.p, th.p_g) {
        RegionClassification::DerivativeBlowUp
    } else if power && at_or_below(params.q, th.q_s) {
        RegionClassification::PowerBlowUp
    } else if derivative && power && th.lambda < 4.0 && params.p > th.p_g && params.q > th.q_s {
        RegionClassification::CombinedBlowUp
    } else {
        RegionClassification::NoTheorem
    })
}

pub fn lifespan_exponent(params: &ModelParams) -> Result<LifespanBound> {
    let class = classify(params)?;
    let d = params.shifted_dimension();
    let (p, q) = (params.p, params.q);
    match class {
        RegionClassification::NoTheorem => Err(Error::NoTheorem),
        RegionClassification::CombinedBlowUp => Ok(LifespanBound {
            kind: BoundKind::Algebraic,
            exponent: 2.0 * p * (q - 1.0) / (4.0 - lambda_combined(p, q, d)),
            note: None,
        }),
        RegionClassification::DerivativeBlowUp => {
            let p_g = glassey_exponent(d).unwrap_or(f64::INFINITY);
            if p_g.is_finite() && (p - p_g).abs() <= CRITICAL_RTOL * p_g {
                Ok(LifespanBound {
                    kind: BoundKind::Exponential,
                    exponent: p - 1.0,
                    note: None,
                })
            } else {
                Ok(LifespanBound {
                    kind: BoundKind::Algebraic,
                    exponent: 2.0 * (p - 1.0) / (2.0 - (d - 1.0) * (p - 1.0)),
                    note: None,
                })
            }
        }
        RegionClassification::PowerBlowUp => Ok(LifespanBound {
            kind: BoundKind::None,
            exponent: 0.0,
            note: Some(
                "q <= q_S(N+mu): blow-up is known from earlier work; no lifespan exponent is provided here"
                    .into(),
            ),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(n: u32, mu: f64, p: f64, q: f64, a: u8, b: u8) -> ModelParams {
        ModelParams { n, mu, p, q, a, b }
    }

    /// Oracle: plain bisection on the defining quadratic.
    fn quadratic_root_by_bisection(d: f64) -> f64 {
        let f = |q: f64| (d - 1.0) * q * q - (d + 1.0) * q - 2.0;
        let (mut lo, mut hi) = (1.0, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn strauss_examples() {
        let cases = [(3.0, 1.0 + 2f64.sqrt()), (2.0, (3.0 + 17f64.sqrt()) / 2.0), (3.5, (4.5 + 40.25f64.sqrt()) / 5.0)];
        for (d, closed) in cases {
            let q = strauss_exponent(d).unwrap();
            assert_relative_eq!(q, closed, max_relative = 1e-14);
            assert_relative_eq!(q, quadratic_root_by_bisection(d), max_relative = 1e-12);
        }
        assert_relative_eq!(strauss_exponent(3.0).unwrap(), 2.414_213_6, max_relative = 1e-7);
        assert_relative_eq!(strauss_exponent(2.0).unwrap(), 3.561_552_8, max_relative = 1e-7);
        assert_relative_eq!(strauss_exponent(3.5).unwrap(), 2.168_857_8, max_relative = 1e-7);
    }

    #[test]
    fn strauss_solves_quadratic() {
        for d in [1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 10.0] {
            let q = strauss_exponent(d).unwrap();
            let res = (d - 1.0) * q * q - (d + 1.0) * q - 2.0;
            assert!(res.abs() < 1e-12, "d={d}: {res:e}");
            assert_relative_eq!(q, strauss_exponent_closed_form(d).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn strauss_near_one_is_large_and_finite() {
        let q = strauss_exponent(1.0 + 1e-10).unwrap();
        assert!(q > 1e10 && q.is_finite());
    }

    #[test]
    fn exponents_reject_low_dimension() {
        assert!(strauss_exponent(1.0).is_err());
        assert!(glassey_exponent(0.5).is_err());
    }

    #[test]
    fn glassey_examples() {
        assert_eq!(glassey_exponent(2.0).unwrap(), 3.0);
        assert_eq!(glassey_exponent(3.0).unwrap(), 2.0);
        assert_eq!(glassey_exponent(1.5).unwrap(), 5.0);
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_combined(2.0, 2.0, 3.0), 2.0);
        assert_relative_eq!(lambda_combined(1.9, 2.2, 3.5), 3.3, max_relative = 1e-14);
        assert!(lambda_combined(3.0, 1.0 + 1e-12, 3.0).abs() < 1e-10);
    }

    #[test]
    fn lambda_at_glassey_exponent() {
        for d in [1.5, 2.0, 3.0, 4.5] {
            for q in [1.5, 2.0, 3.7] {
                let lam = lambda_combined(glassey_exponent(d).unwrap(), q, d);
                assert_relative_eq!(lam, (q - 1.0) * (d - 1.0), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn mu_star_examples() {
        assert_relative_eq!(mu_star(2.0, 2.0, 2), 2.0, max_relative = 1e-15);
        assert!(mu_star(2.0, 3.0, 3).abs() < 1e-15);
    }

    #[test]
    fn sigma_branches_and_continuity() {
        assert_eq!(sigma_shift(0.5).unwrap(), 1.0);
        assert_eq!(sigma_shift(1.5).unwrap(), 2.0);
        assert_eq!(sigma_shift(3.0).unwrap(), 3.0);
        assert!(sigma_shift(-0.1).is_err());
        let h = 1e-8;
        assert!((sigma_shift(1.0 - h).unwrap() - sigma_shift(1.0 + h).unwrap()).abs() < 1e-7);
        assert!((sigma_shift(2.0 - h).unwrap() - sigma_shift(2.0 + h).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn classify_examples() {
        use RegionClassification::*;
        assert_eq!(classify(&params(1, 0.5, 2.0, 2.0, 1, 0)).unwrap(), DerivativeBlowUp);
        assert_eq!(classify(&params(3, 0.5, 1.9, 2.2, 1, 1)).unwrap(), CombinedBlowUp);
        assert_eq!(classify(&params(3, 0.1, 10.0, 2.9, 1, 1)).unwrap(), NoTheorem);
        assert_eq!(classify(&params(3, 0.5, 3.0, 2.1, 0, 1)).unwrap(), PowerBlowUp);
    }

    #[test]
    fn classify_rejects_invalid() {
        assert!(matches!(classify(&params(3, 0.5, 2.0, 7.0, 1, 1)), Err(Error::InvalidParams(_))));
        assert!(classify(&params(1, 0.5, 1.0, 2.0, 1, 0)).is_err());
        assert!(classify(&params(1, 0.5, 2.0, 2.0, 2, 0)).is_err());
        assert!(classify(&params(1, -1.0, 2.0, 2.0, 1, 0)).is_err());
    }

    #[test]
    fn boundary_cases_are_blow_up() {
        // p exactly at p_G(1.5) = 5; q exactly at q_S(3).
        assert_eq!(classify(&params(1, 0.5, 5.0, 2.0, 1, 0)).unwrap(), RegionClassification::DerivativeBlowUp);
        let qs = strauss_exponent(3.0).unwrap();
        assert_eq!(classify(&params(3, 0.0, 3.0, qs, 0, 1)).unwrap(), RegionClassification::PowerBlowUp);
    }

    #[test]
    fn lifespan_examples() {
        let b = lifespan_exponent(&params(1, 0.5, 2.0, 2.0, 1, 0)).unwrap();
        assert_eq!(b.kind, BoundKind::Algebraic);
        assert_relative_eq!(b.exponent, 4.0 / 3.0, max_relative = 1e-14);

        let b = lifespan_exponent(&params(3, 0.5, 1.9, 2.2, 1, 1)).unwrap();
        assert_eq!(b.kind, BoundKind::Algebraic);
        assert_relative_eq!(b.exponent, 2.0 * 1.9 * 1.2 / 0.7, max_relative = 1e-12);
        assert!((b.exponent - 6.5143).abs() < 1e-4);

        let b = lifespan_exponent(&params(1, 0.5, 5.0, 2.0, 1, 0)).unwrap();
        assert_eq!(b.kind, BoundKind::Exponential);
        assert_eq!(b.exponent, 4.0);

        let b = lifespan_exponent(&params(3, 0.5, 3.0, 2.1, 0, 1)).unwrap();
        assert_eq!(b.kind, BoundKind::None);
        assert!(b.note.is_some());

        assert!(matches!(lifespan_exponent(&params(3, 0.1, 10.0, 2.9, 1, 1)), Err(Error::NoTheorem)));
    }

    proptest! {
        #[test]
        fn mu_star_identity(p in 1.0001f64..4.0, q in 1.0001f64..4.0, n in 1u32..=3) {
            let m = mu_star(p, q, n);
            let lam = lambda_combined(p, q, n as f64 + m);
            prop_assert!((lam - 4.0).abs() < 1e-12, "lambda = {lam}");
        }

        #[test]
        fn strauss_decreasing(d in 1.01f64..20.0, delta in 0.01f64..5.0) {
            prop_assert!(strauss_exponent(d + delta).unwrap() < strauss_exponent(d).unwrap());
            prop_assert!(glassey_exponent(d + delta).unwrap() < glassey_exponent(d).unwrap());
            prop_assert!(strauss_exponent(d).unwrap() > 1.0);
        }

        #[test]
        fn lifespan_exponent_positive_for_blow_up(
            n in 1u32..=3, mu in 0.05f64..3.0, p in 1.05f64..6.0, q in 1.05f64..3.0, a in 0u8..=1, b in 0u8..=1,
        ) {
            prop_assume!(a + b >= 1);
            let prm = params(n, mu, p, q, a, b);
            prop_assume!(prm.validate().is_ok());
            if let Ok(bound) = lifespan_exponent(&prm) {
                if bound.kind != BoundKind::None {
                    prop_assert!(bound.exponent > 0.0);
                }
            }
        }
    }
}
