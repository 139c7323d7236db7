use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::chebyshev::ChebyshevSeries;
use crate::error::Result;

/// Radius along a tube: a smooth Chebyshev baseline plus a sinusoidal
/// modulation, clamped to `[r_min, r_max]`.
///
/// `gamma` is the sinusoid amplitude in voxels and `delta` the number of
/// full cycles over the tube length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessProfile {
    pub poly: ChebyshevSeries,
    pub gamma: f64,
    pub delta: f64,
    pub phase: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl ThicknessProfile {
    pub fn constant(radius: f64) -> Self {
        Self {
            poly: ChebyshevSeries::new(vec![radius], 0.0, 1.0),
            gamma: 0.0,
            delta: 0.0,
            phase: 0.0,
            r_min: radius,
            r_max: radius,
        }
    }

    pub fn radius_at(&self, t: f64) -> Result<f64> {
        let base = self.poly.eval(t)?;
        let u = (t.clamp(-1.0, 1.0) + 1.0) / 2.0;
        let wave = self.gamma * (TAU * self.delta * u + self.phase).sin();
        Ok((base + wave).clamp(self.r_min, self.r_max))
    }
}
