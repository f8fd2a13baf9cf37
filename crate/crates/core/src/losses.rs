//! Pairwise ranking losses and the composite mean-teacher objective.
//!
//! Every pairwise loss takes the predictions `p_a`, `p_b` at the two points
//! and the ordinal label `t`. Equality pairs (`t = 0`) are penalized on
//! `p_b - p_a` directly; inequality pairs on the signed difference
//! `t * (p_b - p_a)`.
//!
//! | loss       | `t != 0`                          | `t = 0`        |
//! |------------|-----------------------------------|----------------|
//! | `diw`      | `ln(1 + exp(-t d))`               | `d^2`          |
//! | `snow`     | `ln(1 + exp(-t clip(d, -c, c)))`  | `d^2`          |
//! | `rizz`     | `max(0, L - t d)^2`               | `d^2`          |
//! | `rizz_l1`  | `max(0, L - t d)`                 | `abs(d)`       |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::TraversabilityMap;
use crate::types::Ordinal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLoss {
    Rizz,
    RizzL1,
    Diw,
    Snow,
}

impl PairLoss {
    pub const ALL: [PairLoss; 4] = [PairLoss::Rizz, PairLoss::RizzL1, PairLoss::Diw, PairLoss::Snow];

    pub fn name(self) -> &'static str {
        match self {
            PairLoss::Rizz => "rizz",
            PairLoss::RizzL1 => "rizz_l1",
            PairLoss::Diw => "diw",
            PairLoss::Snow => "snow",
        }
    }

    pub fn value(self, p_a: f64, p_b: f64, t: Ordinal, cfg: &LossConfig) -> f64 {
        self.value_and_grad(p_a, p_b, t, cfg).value
    }

    pub fn value_and_grad(self, p_a: f64, p_b: f64, t: Ordinal, cfg: &LossConfig) -> PairGrad {
        match self {
            PairLoss::Rizz => rizz_grad(p_a, p_b, t, cfg.margin),
            PairLoss::RizzL1 => rizz_l1_grad(p_a, p_b, t, cfg.margin),
            PairLoss::Diw => diw_grad(p_a, p_b, t),
            PairLoss::Snow => snow_grad(p_a, p_b, t, cfg.snow_clamp),
        }
    }
}

impl fmt::Display for PairLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PairLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PairLoss::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss {s:?} (rizz, rizz_l1, diw, snow)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Hinge margin `L` of the rizz losses.
    pub margin: f64,
    /// Clamp bound `c` on the prediction difference in the snow loss.
    pub snow_clamp: f64,
    /// Weight of the teacher/student consistency term.
    pub consistency_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            margin: 0.5,
            snow_clamp: 1.0,
            consistency_weight: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::Config(format!("margin must be > 0, got {}", self.margin)));
        }
        if !(self.snow_clamp > 0.0) {
            return Err(Error::Config(format!("snow clamp must be > 0, got {}", self.snow_clamp)));
        }
        if !(self.consistency_weight >= 0.0) {
            return Err(Error::Config(format!(
                "consistency weight must be >= 0, got {}",
                self.consistency_weight
            )));
        }
        Ok(())
    }
}

/// Loss value with partial derivatives in `p_a` and `p_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGrad {
    pub value: f64,
    pub d_pa: f64,
    pub d_pb: f64,
}

impl PairGrad {
    /// Builds from `f(d)` and `f'(d)` with `d = p_b - p_a`.
    fn from_diff(value: f64, d_diff: f64) -> Self {
        Self {
            value,
            d_pa: -d_diff,
            d_pb: d_diff,
        }
    }
}

/// `ln(1 + exp(z))` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn squared_equality(d: f64) -> PairGrad {
    PairGrad::from_diff(d * d, 2.0 * d)
}

fn diw_grad(p_a: f64, p_b: f64, t: Ordinal) -> PairGrad {
    let d = p_b - p_a;
    if t.is_equality() {
        return squared_equality(d);
    }
    let s = t.sign();
    let z = -s * d;
    PairGrad::from_diff(softplus(z), -s * sigmoid(z))
}

fn snow_grad(p_a: f64, p_b: f64, t: Ordinal, clamp: f64) -> PairGrad {
    let d = p_b - p_a;
    if t.is_equality() {
        return squared_equality(d);
    }
    let s = t.sign();
    let dc = d.clamp(-clamp, clamp);
    let z = -s * dc;
    let inside = d.abs() < clamp;
    PairGrad::from_diff(softplus(z), if inside { -s * sigmoid(z) } else { 0.0 })
}

fn rizz_grad(p_a: f64, p_b: f64, t: Ordinal, margin: f64) -> PairGrad {
    let d = p_b - p_a;
    if t.is_equality() {
        return squared_equality(d);
    }
    let s = t.sign();
    let h = (margin - s * d).max(0.0);
    PairGrad::from_diff(h * h, -2.0 * s * h)
}

fn rizz_l1_grad(p_a: f64, p_b: f64, t: Ordinal, margin: f64) -> PairGrad {
    let d = p_b - p_a;
    if t.is_equality() {
        let g = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        return PairGrad::from_diff(d.abs(), g);
    }
    let s = t.sign();
    let h = margin - s * d;
    if h > 0.0 {
        PairGrad::from_diff(h, -s)
    } else {
        PairGrad::from_diff(0.0, 0.0)
    }
}

pub fn loss_diw(p_a: f64, p_b: f64, t: Ordinal) -> f64 {
    diw_grad(p_a, p_b, t).value
}

pub fn loss_snow(p_a: f64, p_b: f64, t: Ordinal, clamp: f64) -> f64 {
    snow_grad(p_a, p_b, t, clamp).value
}

pub fn loss_rizz(p_a: f64, p_b: f64, t: Ordinal, margin: f64) -> f64 {
    rizz_grad(p_a, p_b, t, margin).value
}

pub fn loss_rizz_l1(p_a: f64, p_b: f64, t: Ordinal, margin: f64) -> f64 {
    rizz_l1_grad(p_a, p_b, t, margin).value
}

/// Mean squared difference between student and teacher maps.
pub fn consistency_loss(student: &TraversabilityMap, teacher: &TraversabilityMap) -> Result<f64> {
    if student.resolution() != teacher.resolution() {
        return Err(Error::shape(teacher.resolution(), student.resolution()));
    }
    Ok(consistency_mse(student.values(), teacher.values()))
}

pub(crate) fn consistency_mse(student: &[f64], teacher: &[f64]) -> f64 {
    let sum: f64 = student
        .iter()
        .zip(teacher)
        .map(|(s, t)| (s - t) * (s - t))
        .sum();
    sum / student.len() as f64
}

/// `acc + lambda * cons`.
pub fn total_loss(acc: f64, cons: f64, consistency_weight: f64) -> f64 {
    acc + consistency_weight * cons
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use Ordinal::*;

    #[test]
    fn diw_examples() {
        assert_eq!(loss_diw(0.5, 0.5, Equal), 0.0);
        assert_abs_diff_eq!(loss_diw(0.5, 0.5, BMore), std::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(loss_diw(0.7, 0.3, BMore), 0.913_015, epsilon = 1e-6);
    }

    #[test]
    fn snow_examples() {
        assert_abs_diff_eq!(loss_snow(0.0, 1.0, BMore, 0.5), 0.474_077, epsilon = 1e-6);
        assert_eq!(loss_snow(0.3, 0.5, BMore, 1.0), loss_diw(0.3, 0.5, BMore));
        assert_eq!(loss_snow(0.2, 0.2, Equal, 1.0), 0.0);
    }

    #[test]
    fn rizz_examples() {
        assert_eq!(loss_rizz(0.1, 0.8, BMore, 0.5), 0.0);
        assert_abs_diff_eq!(loss_rizz(0.5, 0.5, BMore, 0.5), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(loss_rizz(0.3, 0.5, Equal, 0.5), 0.04, epsilon = 1e-15);
    }

    #[test]
    fn rizz_l1_examples() {
        assert_abs_diff_eq!(loss_rizz_l1(0.5, 0.5, BMore, 0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(loss_rizz_l1(0.3, 0.5, Equal, 0.5), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(loss_rizz_l1(0.1, 0.8, AMore, 0.5), 1.2, epsilon = 1e-15);
    }

    #[test]
    fn consistency_examples() {
        let zeros = TraversabilityMap::filled(2, 2, 0.0);
        let ones = TraversabilityMap::filled(2, 2, 1.0);
        assert_eq!(consistency_loss(&zeros, &zeros).unwrap(), 0.0);
        assert_eq!(consistency_loss(&ones, &zeros).unwrap(), 1.0);
        let one_hot = TraversabilityMap::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(consistency_loss(&zeros, &one_hot).unwrap(), 0.25);
        let other = TraversabilityMap::filled(1, 4, 0.0);
        assert!(matches!(consistency_loss(&zeros, &other), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn total_loss_examples() {
        assert_abs_diff_eq!(total_loss(0.5, 0.2, 1.0), 0.7, epsilon = 1e-15);
        assert_eq!(total_loss(0.5, 0.2, 0.0), 0.5);
        assert_eq!(total_loss(0.0, 0.0, 5.0), 0.0);
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert_abs_diff_eq!(softplus(0.0), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn rizz_is_c1_across_hinge_and_l1_is_not() {
        let cfg = LossConfig::default();
        let eps = 1e-9;
        // kink at t * d = L, i.e. p_b = p_a + L for t = 1
        let left = PairLoss::Rizz.value_and_grad(0.2, 0.7 - eps, BMore, &cfg);
        let right = PairLoss::Rizz.value_and_grad(0.2, 0.7 + eps, BMore, &cfg);
        assert!((left.value - right.value).abs() < 1e-12);
        assert!((left.d_pb - right.d_pb).abs() < 1e-8);
        let left = PairLoss::RizzL1.value_and_grad(0.2, 0.7 - eps, BMore, &cfg);
        let right = PairLoss::RizzL1.value_and_grad(0.2, 0.7 + eps, BMore, &cfg);
        assert!((left.value - right.value).abs() < 1e-8);
        assert!((left.d_pb - right.d_pb).abs() > 0.5);
    }

    #[test]
    fn parse_loss_names() {
        for l in PairLoss::ALL {
            assert_eq!(l.name().parse::<PairLoss>().unwrap(), l);
        }
        assert!("hinge".parse::<PairLoss>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        assert!(LossConfig { margin: 0.0, ..Default::default() }.validate().is_err());
        assert!(LossConfig { snow_clamp: -1.0, ..Default::default() }.validate().is_err());
        assert!(LossConfig { consistency_weight: -0.1, ..Default::default() }.validate().is_err());
    }
}
