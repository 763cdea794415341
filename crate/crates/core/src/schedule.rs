//! Ramp policies for the selected-mass fraction `rho`.
//!
//! The sigmoid ramp is `rho(t) = rho0 + (1 - rho0) * exp(-5 (1 - t/T)^2)`,
//! the form commonly used for confidence ramp-up; it starts near `rho0`
//! and reaches exactly 1 at `t = T`. A linear ramp and a constant policy
//! are provided for ablations.

use crate::error::{Error, Result};
use crate::math;

/// Ramp shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampKind {
    Sigmoid,
    Linear,
    Fixed,
}

/// A `rho` schedule over a horizon of `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSchedule {
    pub kind: RampKind,
    /// Starting fraction, in `[0, 1)`.
    pub rho0: f64,
    /// Horizon `T`; sigmoid and linear reach 1 exactly at `t = T`.
    pub total_steps: usize,
}

impl RampSchedule {
    pub fn new(kind: RampKind, rho0: f64, total_steps: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&rho0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "rho0 must lie in [0, 1), got {rho0}"
            )));
        }
        if total_steps == 0 {
            return Err(Error::InvalidConfig(alloc::string::String::from(
                "schedule horizon must be positive",
            )));
        }
        Ok(Self {
            kind,
            rho0,
            total_steps,
        })
    }
}

/// Evaluate the schedule at step `t <= T`.
///
/// The result is clamped to `[min(rho0, 1e-3), 1]`; the floor only matters
/// as a safety net, since each ramp already stays at or above `rho0`.
pub fn rho_at(schedule: &RampSchedule, t: usize) -> Result<f64> {
    let total = schedule.total_steps;
    if t > total {
        return Err(Error::InvalidInput(alloc::format!(
            "step {t} lies beyond the schedule horizon {total}"
        )));
    }
    let rho0 = schedule.rho0;
    let raw = match schedule.kind {
        RampKind::Fixed => rho0,
        RampKind::Sigmoid => {
            if t == total {
                1.0
            } else {
                let frac = t as f64 / total as f64;
                rho0 + (1.0 - rho0) * math::exp(-5.0 * (1.0 - frac) * (1.0 - frac))
            }
        }
        RampKind::Linear => {
            if t == total {
                1.0
            } else {
                rho0 + (1.0 - rho0) * (t as f64 / total as f64)
            }
        }
    };
    Ok(raw.clamp(rho0.min(1e-3), 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigmoid_hits_one_exactly_at_horizon() {
        for rho0 in [0.0, 0.1, 0.37, 0.9] {
            let s = RampSchedule::new(RampKind::Sigmoid, rho0, 123).unwrap();
            assert_eq!(rho_at(&s, 123).unwrap(), 1.0);
            let lin = RampSchedule::new(RampKind::Linear, rho0, 123).unwrap();
            assert_eq!(rho_at(&lin, 123).unwrap(), 1.0);
        }
    }

    #[test]
    fn sigmoid_start_matches_closed_form() {
        let s = RampSchedule::new(RampKind::Sigmoid, 0.1, 400).unwrap();
        // 0.1 + 0.9 e^{-5}
        assert_abs_diff_eq!(rho_at(&s, 0).unwrap(), 0.10606, epsilon = 1e-5);
    }

    #[test]
    fn fixed_is_constant() {
        let s = RampSchedule::new(RampKind::Fixed, 0.2, 50).unwrap();
        for t in [0, 1, 25, 50] {
            assert_eq!(rho_at(&s, t).unwrap(), 0.2);
        }
    }

    #[test]
    fn ramps_are_nondecreasing_and_bounded_below_by_rho0() {
        for kind in [RampKind::Sigmoid, RampKind::Linear] {
            let s = RampSchedule::new(kind, 0.1, 200).unwrap();
            let mut prev = 0.0;
            for t in 0..=200 {
                let r = rho_at(&s, t).unwrap();
                assert!(r >= prev, "{kind:?} decreased at t={t}");
                assert!(r >= 0.1);
                prev = r;
            }
        }
    }

    #[test]
    fn zero_rho0_sigmoid_starts_at_exp_minus_five() {
        let s = RampSchedule::new(RampKind::Sigmoid, 0.0, 100).unwrap();
        assert_abs_diff_eq!(rho_at(&s, 0).unwrap(), math::exp(-5.0), epsilon = 1e-12);
    }

    #[test]
    fn step_beyond_horizon_is_rejected() {
        let s = RampSchedule::new(RampKind::Sigmoid, 0.1, 10).unwrap();
        assert!(matches!(rho_at(&s, 11), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn invalid_rho0_rejected() {
        assert!(RampSchedule::new(RampKind::Sigmoid, 1.0, 10).is_err());
        assert!(RampSchedule::new(RampKind::Sigmoid, -0.1, 10).is_err());
    }
}
