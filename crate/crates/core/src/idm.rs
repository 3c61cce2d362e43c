//! Intelligent Driver Model interaction term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Minimum standstill gap (m).
    #[serde(rename = "s0")]
    pub min_gap: f64,
    /// Safe time headway (s).
    #[serde(rename = "T")]
    pub time_gap: f64,
    /// Maximum acceleration (m/s^2).
    #[serde(rename = "a")]
    pub max_accel: f64,
    /// Comfortable deceleration (m/s^2).
    #[serde(rename = "b")]
    pub comfort_decel: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self { min_gap: 2.0, time_gap: 1.6, max_accel: 0.73, comfort_decel: 1.67 }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("idm.s0", self.min_gap),
            ("idm.T", self.time_gap),
            ("idm.a", self.max_accel),
            ("idm.b", self.comfort_decel),
        ] {
            if !(value > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

/// Desired gap `s0 + v T + v dv / (2 sqrt(a b))`, floored at `s0`.
///
/// `dv` is follower speed minus leader speed.
pub fn desired_gap(v: f64, dv: f64, params: &IdmParams) -> f64 {
    let braking = v * dv / (2.0 * (params.max_accel * params.comfort_decel).sqrt());
    (params.min_gap + v * params.time_gap + braking).max(params.min_gap)
}

/// Interaction deceleration `-a (s* / s)^2`. Always negative.
pub fn interaction_accel(v: f64, dv: f64, gap: f64, params: &IdmParams) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::InvalidGap(gap));
    }
    let ratio = desired_gap(v, dv, params) / gap;
    Ok(-params.max_accel * ratio * ratio)
}
