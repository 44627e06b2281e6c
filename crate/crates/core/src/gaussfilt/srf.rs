//! Shifted Rayleigh filter measurement update.
//!
//! The bearing is treated as the direction `b = [sin y, cos y]ᵀ` of the
//! noisy position `z = Hx + w`, `w ~ N(0, R)`. Conditioning the Gaussian
//! `z ~ N(Hm, V)` on its direction gives a length along `b` whose law is a
//! shifted Rayleigh variable; its first two moments give the exact
//! conditional mean and covariance of the state.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use std::f64::consts::{PI, SQRT_2};

use super::{GaussianBelief, UpdateOutcome};
use crate::error::{Error, Result};
use crate::sensing::wrap_angle;

fn normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

fn normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / SQRT_2)
}

/// `Φ(−x)/φ(x)` for `x > 0` by its continued fraction.
fn upper_mills_ratio(x: f64) -> f64 {
    let mut t = x;
    for k in (1..=200).rev() {
        t = x + k as f64 / t;
    }
    1.0 / t
}

/// Mean of the shifted Rayleigh law with density `∝ r·exp(−(r − u)²/2)` on
/// `r > 0`:
///
/// `ρ(u) = (u·φ(u) + (1 + u²)·Φ(u)) / (φ(u) + u·Φ(u))`.
///
/// Its second moment is `2 + u·ρ(u)`.
pub fn shifted_rayleigh_mean(u: f64) -> f64 {
    if u > -5.0 {
        let (pdf, cdf) = (normal_pdf(u), normal_cdf(u));
        (u * pdf + (1.0 + u * u) * cdf) / (pdf + u * cdf)
    } else {
        // Divide through by φ(u), which underflows for large |u|.
        let m = upper_mills_ratio(-u);
        (u + (1.0 + u * u) * m) / (1.0 + u * m)
    }
}

/// SRF update with a bearing measurement. The noise on the position is
/// isotropic with variance `σ²(‖Hm‖² + P₁₁ + P₂₂)`.
///
/// Returns the posterior together with the Gaussian density of the
/// conditional mean position `γ·b` under `N(Hm, V)`, which the filter bank
/// uses to score this hypothesis.
pub fn srf_update(belief: &GaussianBelief, y: f64, noise_std: f64) -> Result<UpdateOutcome> {
    let n = belief.dim();
    let m = &belief.mean;
    let p = &belief.cov;
    let hm = Vector2::new(m[0], m[1]);
    let hph = Matrix2::new(p[(0, 0)], p[(0, 1)], p[(1, 0)], p[(1, 1)]);
    let r_m = noise_std * noise_std * (hm.norm_squared() + p[(0, 0)] + p[(1, 1)]);
    let v = hph + Matrix2::identity() * r_m;
    let v_inv = v
        .try_inverse()
        .filter(|_| v.determinant() > 0.0 && v[(0, 0)] > 0.0)
        .ok_or(Error::NotPositiveDefinite("SRF V matrix"))?;

    let b = Vector2::new(y.sin(), y.cos());
    let vib = v_inv * b;
    let bvb = b.dot(&vib);
    let u = vib.dot(&hm) / bvb.sqrt();
    let rho = shifted_rayleigh_mean(u);
    let gamma = rho / bvb.sqrt();
    let delta = (2.0 + u * rho - rho * rho) / bvb;
    if !(gamma.is_finite() && delta.is_finite()) {
        return Err(Error::Numerical(format!("shifted Rayleigh moments at u = {u}")));
    }

    // P Hᵀ: first two columns of P.
    let pht = p.columns(0, 2).into_owned();
    let vinv_dyn = DMatrix::from_column_slice(2, 2, v_inv.as_slice());
    let gain = &pht * &vinv_dyn;
    let e = gamma * b - hm;
    let e_dyn = DVector::from_column_slice(e.as_slice());
    let kb = &gain * DVector::from_column_slice(b.as_slice());

    let mut posterior = GaussianBelief {
        mean: m + &gain * &e_dyn,
        cov: p - &gain * pht.transpose() + &kb * kb.transpose() * delta,
    };
    posterior.symmetrize();
    posterior.ensure_finite()?;

    let maha = e.dot(&(v_inv * e));
    let likelihood = (-0.5 * maha).exp() / (2.0 * PI * v.determinant().sqrt());

    // Angular summaries for reporting: prediction and its linearised variance.
    let range2 = hm.norm_squared();
    let pred_meas = wrap_angle(hm[0].atan2(hm[1]));
    let perp = Vector2::new(hm[1], -hm[0]) / range2;
    let innov_cov = perp.dot(&(v * perp));
    let cross_cov = &pht * DVector::from_column_slice(perp.as_slice());
    debug_assert_eq!(cross_cov.len(), n);
    if !(innov_cov > 0.0) {
        return Err(Error::NonPositiveInnovation(innov_cov));
    }

    Ok(UpdateOutcome {
        posterior,
        pred_meas,
        innov_cov,
        cross_cov,
        likelihood: Some(likelihood),
    })
}
