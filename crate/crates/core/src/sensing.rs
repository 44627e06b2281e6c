//! Bearing measurements from a towed line array.
//!
//! Bearings are measured clockwise from true north, so a relative position
//! `(x, y)` (east, north) sits at `atan2(x, y)`. The array cannot tell which
//! side of its axis a contact lies on; every detection at `θ` comes with a
//! mirror at `2h − θ`, `h` being the array heading.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Bearing of a relative state (only the position components are read).
pub fn true_bearing(rel: &DVector<f64>) -> Result<f64> {
    let (x, y) = (rel[0], rel[1]);
    if x == 0.0 && y == 0.0 {
        return Err(Error::ZeroRange);
    }
    Ok(wrap_angle(x.atan2(y)))
}

/// Mirror of `theta_t` about an array axis with heading `h`.
pub fn ghost_bearing(theta_t: f64, h: f64) -> f64 {
    wrap_angle(2.0 * h - theta_t)
}

/// Row vector `∂θ/∂X` sized to the state dimension.
pub fn bearing_jacobian(rel: &DVector<f64>) -> Result<DVector<f64>> {
    let (x, y) = (rel[0], rel[1]);
    let r2 = x * x + y * y;
    if r2 == 0.0 {
        return Err(Error::ZeroRange);
    }
    let mut j = DVector::zeros(rel.len());
    j[0] = y / r2;
    j[1] = -x / r2;
    Ok(j)
}

/// How the mirrored detection is corrupted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GhostNoise {
    /// The ghost is the exact mirror of the noisy detection.
    #[default]
    Mirrored,
    /// The ghost carries its own noise draw.
    Independent,
}

/// The two detections reported by the array at one instant.
///
/// `y1` and `y2` are slots, not labels: either may hold the true bearing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BearingPair {
    pub y1: f64,
    pub y2: f64,
    pub heading: f64,
    pub t: usize,
}

impl BearingPair {
    pub fn get(&self, slot: usize) -> f64 {
        match slot {
            0 => self.y1,
            1 => self.y2,
            _ => panic!("bearing slot {slot} out of range"),
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            y1: self.y2,
            y2: self.y1,
            ..*self
        }
    }
}

/// Draws one detection pair. `y1` is the target-side bearing; the caller
/// decides slot order.
pub fn measure<R: Rng + ?Sized>(
    rel: &DVector<f64>,
    heading: f64,
    noise_std: f64,
    ghost: GhostNoise,
    t: usize,
    rng: &mut R,
) -> Result<BearingPair> {
    let theta = true_bearing(rel)?;
    let nu: f64 = StandardNormal.sample(rng);
    let y1 = wrap_angle(theta + noise_std * nu);
    let y2 = match ghost {
        GhostNoise::Mirrored => ghost_bearing(y1, heading),
        GhostNoise::Independent => {
            let nu2: f64 = StandardNormal.sample(rng);
            wrap_angle(2.0 * heading - theta - noise_std * nu2)
        }
    };
    Ok(BearingPair {
        y1,
        y2,
        heading: wrap_angle(heading),
        t,
    })
}
