//! Left-right ambiguity resolution with a two-filter bank.
//!
//! Each side of the array gets its own Gaussian filter, initialised from and
//! updated with its own bearing slot. At every step the two filters are scored
//! by the likelihood of their measurement, the side weights are updated by
//! Bayes' rule and the two estimates are fused as a two-component Gaussian
//! mixture. The side filters never see the fused estimate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gaussfilt::{bearing_update, predict, FilterKind, FilterOptions, GaussianBelief, RelativeDynamics};
use crate::kinematics::{MotionModel, ModelKind, ObserverState};
use crate::sensing::{wrap_angle, BearingPair};

/// Smallest weight a live hypothesis can decay to.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Polar prior used to initialise a track from its first bearing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitPrior {
    /// Range std, km.
    pub sigma_r: f64,
    /// Speed std, km/min.
    pub sigma_s: f64,
    /// Bearing std, rad.
    pub sigma_theta: f64,
    /// Course std, rad.
    pub sigma_c: f64,
    /// Prior mean range, km.
    pub r_bar: f64,
    /// Prior mean target speed, km/min.
    pub s_bar: f64,
    /// Turn-rate std for CT filters, rad/min (prior mean is zero).
    pub sigma_psi: f64,
}

impl InitPrior {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sigma_r", self.sigma_r),
            ("sigma_s", self.sigma_s),
            ("sigma_theta", self.sigma_theta),
            ("sigma_c", self.sigma_c),
            ("sigma_psi", self.sigma_psi),
            ("r_bar", self.r_bar),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if !(self.s_bar >= 0.0 && self.s_bar.is_finite()) {
            return Err(Error::invalid("s_bar", "must be non-negative"));
        }
        Ok(())
    }
}

/// 2×2 covariance of `a·(sin φ, cos φ)` under independent errors on the
/// magnitude (`sigma_a`) and the angle (`sigma_phi`), linearised at the mean.
fn polar_block(a: f64, (s, c): (f64, f64), sigma_a: f64, sigma_phi: f64) -> [[f64; 2]; 2] {
    let tang = a * a * sigma_phi * sigma_phi;
    let rad = sigma_a * sigma_a;
    let xy = (rad - tang) * s * c;
    [[tang * c * c + rad * s * s, xy], [xy, tang * s * s + rad * c * c]]
}

/// Initial belief for one side from that side's first bearing.
///
/// The target is placed at the prior range along the bearing, heading
/// straight at the observer at the prior speed.
pub fn init_side(
    first_bearing: f64,
    prior: &InitPrior,
    obs: &ObserverState,
    model: &MotionModel,
) -> GaussianBelief {
    let n = model.state_dim();
    let (s, c) = first_bearing.sin_cos();
    // Course θ + π, taken from the negated bearing direction.
    let heading = (-s, -c);

    let mut mean = DVector::zeros(n);
    mean[0] = prior.r_bar * s;
    mean[1] = prior.r_bar * c;
    mean[2] = prior.s_bar * heading.0 - obs.vx;
    mean[3] = prior.s_bar * heading.1 - obs.vy;

    let mut cov = DMatrix::zeros(n, n);
    let pos = polar_block(prior.r_bar, (s, c), prior.sigma_r, prior.sigma_theta);
    let vel = polar_block(prior.s_bar, heading, prior.sigma_s, prior.sigma_c);
    for i in 0..2 {
        for j in 0..2 {
            cov[(i, j)] = pos[i][j];
            cov[(i + 2, j + 2)] = vel[i][j];
        }
    }
    if model.kind == ModelKind::Ct {
        cov[(4, 4)] = prior.sigma_psi * prior.sigma_psi;
    }
    GaussianBelief { mean, cov }
}

/// Scalar Gaussian density of bearing `y` given prediction `pred` and
/// innovation variance `innov_cov`, on the wrapped residual.
pub fn likelihood(y: f64, pred: f64, innov_cov: f64) -> Result<f64> {
    if !(innov_cov > 0.0) {
        return Err(Error::NonPositiveInnovation(innov_cov));
    }
    let e = wrap_angle(y - pred);
    Ok((-0.5 * e * e / innov_cov).exp() / (2.0 * PI * innov_cov).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightUpdate {
    pub weights: [f64; 2],
    /// Both hypotheses had zero posterior mass; the previous weights were kept.
    pub degenerate: bool,
}

/// Bayes update of the two side weights.
pub fn update_weights(prev: [f64; 2], p1: f64, p2: f64) -> WeightUpdate {
    // Exact zeros are absorbing and never revived by the floor.
    let a = if prev[0] == 0.0 { 0.0 } else { p1 * prev[0] };
    let b = if prev[1] == 0.0 { 0.0 } else { p2 * prev[1] };
    let total = a + b;
    if !(total > 0.0 && total.is_finite()) {
        return WeightUpdate {
            weights: prev,
            degenerate: true,
        };
    }
    let mut w = [a / total, b / total];
    for i in 0..2 {
        if prev[i] > 0.0 && w[i] < WEIGHT_FLOOR {
            w[i] = WEIGHT_FLOOR;
            w[1 - i] = 1.0 - WEIGHT_FLOOR;
        }
    }
    WeightUpdate {
        weights: w,
        degenerate: false,
    }
}

/// Moment-matched two-component mixture.
pub fn fuse(b1: &GaussianBelief, b2: &GaussianBelief, w: [f64; 2]) -> Result<GaussianBelief> {
    if b1.dim() != b2.dim() {
        return Err(Error::DimensionMismatch {
            expected: b1.dim(),
            got: b2.dim(),
        });
    }
    let mean = &b1.mean * w[0] + &b2.mean * w[1];
    // Spread of the two-component mixture: w1·w2·d·dᵀ with d = m1 − m2.
    let d = &b1.mean - &b2.mean;
    let c = w[0] * w[1];
    let n = d.len();
    let mut cov = &b1.cov * w[0] + &b2.cov * w[1];
    for j in 0..n {
        for i in 0..n {
            cov[(i, j)] += c * (d[i] * d[j]);
        }
    }
    Ok(GaussianBelief { mean, cov })
}

/// Two side filters, their weights and the fused estimate at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBankState {
    pub sides: [GaussianBelief; 2],
    pub weights: [f64; 2],
    pub fused: GaussianBelief,
    pub t: usize,
    /// Likelihoods used in the last weight update (1 at initialisation).
    pub likelihoods: [f64; 2],
    pub degenerate: bool,
}

impl FilterBankState {
    pub fn max_weight(&self) -> f64 {
        self.weights[0].max(self.weights[1])
    }
}

/// Filter settings shared by both sides of a bank (and by the single-filter
/// known-side baseline).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterBank {
    pub model: MotionModel,
    pub kind: FilterKind,
    pub opts: FilterOptions,
    /// Bearing noise std, rad.
    pub noise_std: f64,
}

impl FilterBank {
    pub fn new(model: MotionModel, kind: FilterKind, opts: FilterOptions, noise_std: f64) -> Self {
        Self {
            model,
            kind,
            opts,
            noise_std,
        }
    }

    pub fn init(&self, pair: &BearingPair, prior: &InitPrior, obs: &ObserverState) -> FilterBankState {
        let sides = [
            init_side(pair.y1, prior, obs, &self.model),
            init_side(pair.y2, prior, obs, &self.model),
        ];
        let weights = [0.5, 0.5];
        let fused = fuse(&sides[0], &sides[1], weights).expect("sides share a dimension");
        FilterBankState {
            sides,
            weights,
            fused,
            t: pair.t,
            likelihoods: [1.0, 1.0],
            degenerate: false,
        }
    }

    /// One predict/update cycle of a single filter on bearing `y`; returns
    /// the posterior and the measurement likelihood.
    pub fn track(
        &self,
        belief: &GaussianBelief,
        y: f64,
        obs_prev: &ObserverState,
        obs_now: &ObserverState,
    ) -> Result<(GaussianBelief, f64)> {
        let dynamics = RelativeDynamics {
            model: &self.model,
            obs_prev,
            obs_now,
        };
        let prior = predict(belief, &dynamics, self.kind, &self.opts)?;
        let out = bearing_update(&prior, y, self.noise_std, self.kind, &self.opts)?;
        let density = match out.likelihood {
            Some(p) => p,
            None => likelihood(y, out.pred_meas, out.innov_cov)?,
        };
        Ok((out.posterior, density))
    }

    pub fn step(
        &self,
        state: &FilterBankState,
        meas: &BearingPair,
        obs_prev: &ObserverState,
        obs_now: &ObserverState,
    ) -> Result<FilterBankState> {
        let (b1, p1) = self.track(&state.sides[0], meas.y1, obs_prev, obs_now)?;
        let (b2, p2) = self.track(&state.sides[1], meas.y2, obs_prev, obs_now)?;
        let wu = update_weights(state.weights, p1, p2);
        let fused = fuse(&b1, &b2, wu.weights)?;
        Ok(FilterBankState {
            sides: [b1, b2],
            weights: wu.weights,
            fused,
            t: meas.t,
            likelihoods: [p1, p2],
            degenerate: wu.degenerate,
        })
    }
}
