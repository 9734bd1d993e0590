//! Summable inexactness tolerance sequences `{ε_k}`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToleranceSchedule {
    /// `ε_k = 0`
    Zero,
    /// `ε_k = ε0 * ratio^k`, `0 < ratio < 1`
    Geometric { eps0: f64, ratio: f64 },
    /// `ε_k = ε0 / (k+1)^exponent`, `exponent > 1`
    Power { eps0: f64, exponent: f64 },
}

impl ToleranceSchedule {
    pub fn geometric(eps0: f64, ratio: f64) -> Result<Self> {
        if !(eps0 >= 0.0 && eps0.is_finite()) || !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "geometric schedule needs eps0 >= 0 and ratio in (0,1), got {eps0}, {ratio}"
            )));
        }
        Ok(Self::Geometric { eps0, ratio })
    }

    pub fn power(eps0: f64, exponent: f64) -> Result<Self> {
        if !(eps0 >= 0.0 && eps0.is_finite()) || !(exponent > 1.0 && exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power schedule needs eps0 >= 0 and exponent > 1, got {eps0}, {exponent}"
            )));
        }
        Ok(Self::Power { eps0, exponent })
    }

    pub fn eps(&self, k: usize) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Geometric { eps0, ratio } => eps0 * ratio.powi(k as i32),
            Self::Power { eps0, exponent } => eps0 / ((k + 1) as f64).powf(exponent),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Self::Zero => true,
            Self::Geometric { eps0, .. } | Self::Power { eps0, .. } => eps0 == 0.0,
        }
    }

    /// `E = Σ_k ε_k`
    pub fn total(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Geometric { eps0, ratio } => eps0 / (1.0 - ratio),
            Self::Power { eps0, exponent } => eps0 * zeta(exponent),
        }
    }

    /// `E' = Σ_k ε_k²`
    pub fn total_squares(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Geometric { eps0, ratio } => eps0 * eps0 / (1.0 - ratio * ratio),
            Self::Power { eps0, exponent } => eps0 * eps0 * zeta(2.0 * exponent),
        }
    }

    /// The same schedule multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Self::Zero => Self::Zero,
            Self::Geometric { eps0, ratio } => Self::Geometric {
                eps0: eps0 * factor,
                ratio,
            },
            Self::Power { eps0, exponent } => Self::Power {
                eps0: eps0 * factor,
                exponent,
            },
        }
    }
}

impl Default for ToleranceSchedule {
    fn default() -> Self {
        Self::Geometric {
            eps0: 1e-2,
            ratio: 0.5,
        }
    }
}

/// Riemann zeta for real `s > 1` by Euler-Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    const N: usize = 64;
    let n = N as f64;
    let head: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    // tail Σ_{k>=N} k^{-s} ≈ N^{1-s}/(s-1) + N^{-s}/2 + s N^{-s-1}/12 - s(s+1)(s+2) N^{-s-3}/720
    let tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0;
    head + tail
}

impl fmt::Display for ToleranceSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Geometric { eps0, ratio } => write!(f, "geom:{eps0:e}:{ratio}"),
            Self::Power { eps0, exponent } => write!(f, "pow:{eps0:e}:{exponent}"),
        }
    }
}

/// Parses `zero`, `geom:ε0:r` or `pow:ε0:p`.
impl FromStr for ToleranceSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number `{t}` in schedule `{s}`")))
        };
        match parts.as_slice() {
            ["zero"] => Ok(Self::Zero),
            ["geom", e, r] => Self::geometric(num(e)?, num(r)?),
            ["pow", e, p] => Self::power(num(e)?, num(p)?),
            _ => Err(Error::InvalidParameter(format!(
                "schedule `{s}` is not one of zero | geom:ε0:r | pow:ε0:p"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_known_values() {
        assert!((zeta(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-14);
        assert!((zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-14);
    }

    #[test]
    fn totals_match_partial_sums() {
        for sched in [
            ToleranceSchedule::geometric(1e-2, 0.5).unwrap(),
            ToleranceSchedule::geometric(3.0, 0.9).unwrap(),
        ] {
            let partial: f64 = (0..2000).map(|k| sched.eps(k)).sum();
            assert!((partial - sched.total()).abs() < 1e-12 * sched.total());
            let sq: f64 = (0..2000).map(|k| sched.eps(k).powi(2)).sum();
            assert!((sq - sched.total_squares()).abs() < 1e-12 * sched.total_squares());
        }
        let p = ToleranceSchedule::power(1.0, 3.0).unwrap();
        let partial: f64 = (0..200_000).map(|k| p.eps(k)).sum();
        assert!(partial <= p.total() && p.total() - partial < 1e-9);
    }

    #[test]
    fn parse_round_trip() {
        assert_eq!("zero".parse::<ToleranceSchedule>().unwrap(), ToleranceSchedule::Zero);
        assert_eq!(
            "geom:1e-2:0.5".parse::<ToleranceSchedule>().unwrap(),
            ToleranceSchedule::Geometric { eps0: 1e-2, ratio: 0.5 }
        );
        let p: ToleranceSchedule = "pow:0.1:2".parse().unwrap();
        assert_eq!(p.to_string().parse::<ToleranceSchedule>().unwrap(), p);
        assert!("geom:1:1.5".parse::<ToleranceSchedule>().is_err());
        assert!("pow:1:1".parse::<ToleranceSchedule>().is_err());
        assert!("linear:1".parse::<ToleranceSchedule>().is_err());
    }
}
