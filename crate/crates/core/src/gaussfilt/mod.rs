//! Gaussian filters for bearings-only tracking.
//!
//! All filters share one contract: [`predict`] propagates a
//! [`GaussianBelief`] through some [`Dynamics`], and [`update`] (or
//! [`bearing_update`]) folds in one scalar measurement and reports the
//! predicted measurement and innovation variance the filter bank needs to
//! score a hypothesis. The shifted Rayleigh filter only understands bearings
//! and reports its own likelihood.

mod points;
mod srf;

pub use points::{
    cubature_points, default_kappa, gauss_hermite_points, hermite_rule, sqrt_cov,
    unscented_points, WeightedPointSet,
};
pub use srf::{shifted_rayleigh_mean, srf_update};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{observer_input, process_jacobian, process_noise_cov, MotionModel, ModelKind, ObserverState};
use crate::sensing::{bearing_jacobian, true_bearing, wrap_angle};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: cov.nrows(),
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn symmetrize(&mut self) {
        let t = self.cov.transpose();
        self.cov += t;
        self.cov *= 0.5;
    }

    fn ensure_finite(&self) -> Result<()> {
        if self.mean.iter().chain(self.cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite belief".into()));
        }
        if self.cov.diagonal().iter().any(|&d| d < 0.0) {
            return Err(Error::NotPositiveDefinite("negative variance"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Ekf,
    Ukf,
    Ckf,
    Ghf,
    Srf,
}

impl FilterKind {
    pub const ALL: [FilterKind; 5] = [
        FilterKind::Ekf,
        FilterKind::Ukf,
        FilterKind::Ckf,
        FilterKind::Ghf,
        FilterKind::Srf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Ekf => "ekf",
            FilterKind::Ukf => "ukf",
            FilterKind::Ckf => "ckf",
            FilterKind::Ghf => "ghf",
            FilterKind::Srf => "srf",
        }
    }
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("filter", format!("unknown filter `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterOptions {
    /// Unscented κ; `None` picks [`default_kappa`] for the state dimension.
    pub ukf_kappa: Option<f64>,
    pub ghf_order: usize,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            ukf_kappa: None,
            ghf_order: 3,
        }
    }
}

/// Sample points for a point-based filter; `None` for the EKF.
fn sample_points(
    belief: &GaussianBelief,
    kind: FilterKind,
    opts: &FilterOptions,
) -> Result<Option<WeightedPointSet>> {
    Ok(match kind {
        FilterKind::Ekf => None,
        FilterKind::Ukf => Some(unscented_points(
            belief,
            opts.ukf_kappa.unwrap_or_else(|| default_kappa(belief.dim())),
        )?),
        // The SRF propagates its prior with cubature points.
        FilterKind::Ckf | FilterKind::Srf => Some(cubature_points(belief)?),
        FilterKind::Ghf => Some(gauss_hermite_points(belief, opts.ghf_order)?),
    })
}

/// Discrete-time process model `x_k = g(x_{k-1}) + w`, `w ~ N(0, Q)`.
pub trait Dynamics {
    fn dim(&self) -> usize;
    fn propagate(&self, x: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
    fn noise_cov(&self) -> DMatrix<f64>;
}

/// Relative target dynamics between two observer samples:
/// `g(X) = f(X) − ℧(ψ)`, with the observer input evaluated at each state's
/// own turn rate.
#[derive(Clone, Copy, Debug)]
pub struct RelativeDynamics<'a> {
    pub model: &'a MotionModel,
    pub obs_prev: &'a ObserverState,
    pub obs_now: &'a ObserverState,
}

impl Dynamics for RelativeDynamics<'_> {
    fn dim(&self) -> usize {
        self.model.state_dim()
    }

    fn propagate(&self, x: &DVector<f64>) -> DVector<f64> {
        let psi = if self.model.kind == ModelKind::Ct { x[4] } else { 0.0 };
        self.model.propagate(x) - observer_input(self.obs_prev, self.obs_now, self.model, psi)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        // ℧(ψ) = X^o_k − F(ψ)X^o_{k−1}, so g(X) = F(ψ)(X + X^o_{k−1}) − X^o_k.
        let mut absolute = x.clone();
        for (i, v) in self.obs_prev.kinematic_vector().into_iter().enumerate() {
            absolute[i] += v;
        }
        process_jacobian(self.model, &absolute)
    }

    fn noise_cov(&self) -> DMatrix<f64> {
        process_noise_cov(self.model)
    }
}

/// `x_k = F x_{k−1} + w`.
#[derive(Clone, Debug)]
pub struct LinearDynamics {
    pub f: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl Dynamics for LinearDynamics {
    fn dim(&self) -> usize {
        self.f.nrows()
    }

    fn propagate(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.f * x
    }

    fn jacobian(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.f.clone())
    }

    fn noise_cov(&self) -> DMatrix<f64> {
        self.q.clone()
    }
}

pub fn predict<D: Dynamics + ?Sized>(
    belief: &GaussianBelief,
    dynamics: &D,
    kind: FilterKind,
    opts: &FilterOptions,
) -> Result<GaussianBelief> {
    if belief.dim() != dynamics.dim() {
        return Err(Error::DimensionMismatch {
            expected: dynamics.dim(),
            got: belief.dim(),
        });
    }
    let q = dynamics.noise_cov();
    let mut prior = match sample_points(belief, kind, opts)? {
        None => {
            let jac = dynamics.jacobian(&belief.mean)?;
            GaussianBelief {
                mean: dynamics.propagate(&belief.mean),
                cov: &jac * &belief.cov * jac.transpose() + q,
            }
        }
        Some(set) => {
            let moved = set.map(|p| dynamics.propagate(p));
            let mean = moved.mean();
            let cov = moved.covariance_about(&mean) + q;
            GaussianBelief { mean, cov }
        }
    };
    prior.symmetrize();
    prior.ensure_finite()?;
    Ok(prior)
}

/// Scalar measurement `y = h(x) + v`, `v ~ N(0, σ²)`.
pub trait ScalarMeasurement {
    fn predict(&self, x: &DVector<f64>) -> Result<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// `a − b` in measurement space.
    fn residual(&self, a: f64, b: f64) -> f64 {
        a - b
    }

    /// Weighted mean of predicted measurements; `anchor` is the prediction
    /// at the belief mean.
    fn weighted_mean(&self, values: &[f64], set: &WeightedPointSet, _anchor: f64) -> f64 {
        set.weighted_sum(values)
    }
}

/// The bearing `atan2(x, y)` of a relative state.
#[derive(Clone, Copy, Debug, Default)]
pub struct Bearing;

impl ScalarMeasurement for Bearing {
    fn predict(&self, x: &DVector<f64>) -> Result<f64> {
        true_bearing(x)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        bearing_jacobian(x)
    }

    fn residual(&self, a: f64, b: f64) -> f64 {
        wrap_angle(a - b)
    }

    fn weighted_mean(&self, values: &[f64], set: &WeightedPointSet, anchor: f64) -> f64 {
        let offsets: Vec<f64> = values.iter().map(|v| wrap_angle(v - anchor)).collect();
        wrap_angle(anchor + set.weighted_sum(&offsets))
    }
}

/// `y = cᵀx`.
#[derive(Clone, Debug)]
pub struct LinearMeasurement(pub DVector<f64>);

impl ScalarMeasurement for LinearMeasurement {
    fn predict(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.0.dot(x))
    }

    fn jacobian(&self, _x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.0.clone())
    }
}

#[derive(Clone, Debug)]
pub struct UpdateOutcome {
    pub posterior: GaussianBelief,
    /// Predicted measurement ŷ_{k|k−1}.
    pub pred_meas: f64,
    /// Innovation variance P_yy, including measurement noise.
    pub innov_cov: f64,
    /// State–measurement cross covariance P_xy.
    pub cross_cov: DVector<f64>,
    /// Measurement likelihood, when the filter defines its own (SRF).
    pub likelihood: Option<f64>,
}

/// Gaussian moment-matching measurement update. The SRF is bearing-only; use
/// [`bearing_update`] or [`srf_update`] for it.
pub fn update<M: ScalarMeasurement + ?Sized>(
    belief: &GaussianBelief,
    meas: &M,
    y: f64,
    noise_std: f64,
    kind: FilterKind,
    opts: &FilterOptions,
) -> Result<UpdateOutcome> {
    if kind == FilterKind::Srf {
        return Err(Error::Unsupported("SRF handles bearing measurements only"));
    }
    let r = noise_std * noise_std;
    let (pred_meas, innov_cov, cross_cov) = match sample_points(belief, kind, opts)? {
        None => {
            let h = meas.jacobian(&belief.mean)?;
            let pxy = &belief.cov * &h;
            let pyy = h.dot(&pxy) + r;
            (meas.predict(&belief.mean)?, pyy, pxy)
        }
        Some(set) => {
            let anchor = meas.predict(&belief.mean)?;
            let z = set
                .points
                .iter()
                .map(|p| meas.predict(p))
                .collect::<Result<Vec<_>>>()?;
            let zhat = meas.weighted_mean(&z, &set, anchor);
            let dz: Vec<f64> = z.iter().map(|&zi| meas.residual(zi, zhat)).collect();
            let sq: Vec<f64> = dz.iter().map(|d| d * d).collect();
            let cross: Vec<DVector<f64>> = set.points.iter().zip(&dz).map(|(p, &d)| (p - &belief.mean) * d).collect();
            (zhat, set.weighted_sum(&sq) + r, set.weighted_sum(&cross))
        }
    };
    if !(innov_cov > 0.0) {
        return Err(Error::NonPositiveInnovation(innov_cov));
    }
    let gain = &cross_cov / innov_cov;
    let innovation = meas.residual(y, pred_meas);
    let mut posterior = GaussianBelief {
        mean: &belief.mean + &gain * innovation,
        cov: &belief.cov - &gain * gain.transpose() * innov_cov,
    };
    posterior.symmetrize();
    posterior.ensure_finite()?;
    Ok(UpdateOutcome {
        posterior,
        pred_meas,
        innov_cov,
        cross_cov,
        likelihood: None,
    })
}

/// Bearing update for any filter kind.
pub fn bearing_update(
    belief: &GaussianBelief,
    y: f64,
    noise_std: f64,
    kind: FilterKind,
    opts: &FilterOptions,
) -> Result<UpdateOutcome> {
    match kind {
        FilterKind::Srf => srf_update(belief, y, noise_std),
        _ => update(belief, &Bearing, y, noise_std, kind, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::MotionModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const POINT_FILTERS: [FilterKind; 4] =
        [FilterKind::Ekf, FilterKind::Ukf, FilterKind::Ckf, FilterKind::Ghf];

    fn prior4() -> GaussianBelief {
        let mean = DVector::from_vec(vec![3.0, 4.0, -0.05, 0.02]);
        let mut cov = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.4, 1e-3, 2e-3]));
        cov[(0, 1)] = 0.1;
        cov[(1, 0)] = 0.1;
        cov[(0, 2)] = 0.005;
        cov[(2, 0)] = 0.005;
        GaussianBelief::new(mean, cov).unwrap()
    }

    fn observers() -> (ObserverState, ObserverState) {
        let a = ObserverState::from_course(0.0, 0.0, 0.08, 1.0);
        let b = ObserverState::from_course(0.07, 0.04, 0.08, 0.6);
        (a, b)
    }

    #[test]
    fn linear_prediction_is_exact_for_every_filter() {
        let model = MotionModel::cv(1.0, 0.0).unwrap();
        let dynamics = LinearDynamics {
            f: model.transition_matrix(0.0),
            q: DMatrix::zeros(4, 4),
        };
        let b = prior4();
        let exact_mean = &dynamics.f * &b.mean;
        let exact_cov = &dynamics.f * &b.cov * dynamics.f.transpose();
        for kind in FilterKind::ALL {
            let p = predict(&b, &dynamics, kind, &FilterOptions::default()).unwrap();
            assert!((&p.mean - &exact_mean).amax() < 1e-12, "{kind}");
            assert!((&p.cov - &exact_cov).amax() < 1e-12, "{kind}");
        }
    }

    #[test]
    fn cv_relative_prediction_agrees_across_filters() {
        let model = MotionModel::cv(1.0, 1.944e-6).unwrap();
        let (a, b) = observers();
        let dynamics = RelativeDynamics { model: &model, obs_prev: &a, obs_now: &b };
        let reference = predict(&prior4(), &dynamics, FilterKind::Ekf, &FilterOptions::default()).unwrap();
        for kind in FilterKind::ALL {
            let p = predict(&prior4(), &dynamics, kind, &FilterOptions::default()).unwrap();
            assert!((&p.mean - &reference.mean).amax() < 1e-9);
            assert!((&p.cov - &reference.cov).amax() < 1e-9);
        }
    }

    #[test]
    fn ct_ukf_prediction_matches_monte_carlo() {
        let model = MotionModel::ct(1.0, 1.944e-6, 3.78e-7).unwrap();
        let (a, b) = observers();
        let dynamics = RelativeDynamics { model: &model, obs_prev: &a, obs_now: &b };
        let mut mean = prior4().mean.as_slice().to_vec();
        mean.push(0.05);
        let mut cov = DMatrix::zeros(5, 5);
        cov.view_mut((0, 0), (4, 4)).copy_from(&prior4().cov);
        cov[(4, 4)] = 0.02f64.powi(2);
        let belief = GaussianBelief::new(DVector::from_vec(mean), cov).unwrap();
        let ukf = predict(&belief, &dynamics, FilterKind::Ukf, &FilterOptions::default()).unwrap();

        let l = sqrt_cov(&belief.cov).unwrap();
        let lq = sqrt_cov(&(dynamics.noise_cov() + DMatrix::identity(5, 5) * 1e-30)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut sum = DVector::zeros(5);
        let mut sumsq = DVector::zeros(5);
        for _ in 0..n {
            let z = DVector::from_fn(5, |_, _| StandardNormal.sample(&mut rng));
            let w = DVector::from_fn(5, |_, _| StandardNormal.sample(&mut rng));
            let x = dynamics.propagate(&(&belief.mean + &l * z)) + &lq * w;
            sumsq += x.component_mul(&x);
            sum += x;
        }
        let mc_mean = &sum / n as f64;
        for i in 0..5 {
            let var = sumsq[i] / n as f64 - mc_mean[i] * mc_mean[i];
            let se = (var / n as f64).sqrt();
            assert!(
                (ukf.mean[i] - mc_mean[i]).abs() < 3.0 * se,
                "component {i}: ukf {} mc {} se {se}",
                ukf.mean[i],
                mc_mean[i]
            );
        }
    }

    #[test]
    fn zero_innovation_leaves_mean() {
        let b = prior4();
        for kind in POINT_FILTERS {
            let pred = bearing_update(&b, 0.0, 0.02, kind, &FilterOptions::default())
                .unwrap()
                .pred_meas;
            let out = bearing_update(&b, pred, 0.02, kind, &FilterOptions::default()).unwrap();
            assert!((&out.posterior.mean - &b.mean).amax() < 1e-14, "{kind}");
            assert!(out.posterior.cov.trace() < b.cov.trace());
            assert!(out.likelihood.is_none());
        }
    }

    #[test]
    fn linear_measurement_reproduces_kalman_update() {
        let b = prior4();
        let c = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let r: f64 = 0.3;
        let y = 3.4;
        let s = c.dot(&(&b.cov * &c)) + r * r;
        let k = &b.cov * &c / s;
        let mean = &b.mean + &k * (y - c.dot(&b.mean));
        let cov = &b.cov - &k * c.transpose() * &b.cov;
        for kind in POINT_FILTERS {
            let out = update(&b, &LinearMeasurement(c.clone()), y, r, kind, &FilterOptions::default()).unwrap();
            assert!((&out.posterior.mean - &mean).amax() < 1e-9, "{kind}");
            assert!((&out.posterior.cov - &cov).amax() < 1e-9, "{kind}");
        }
        let srf = update(&b, &LinearMeasurement(c), y, r, FilterKind::Srf, &FilterOptions::default());
        assert!(matches!(srf, Err(Error::Unsupported(_))));
    }

    #[test]
    fn ekf_linearization_is_bearing_jacobian() {
        let b = prior4();
        let out = bearing_update(&b, 0.7, 0.02, FilterKind::Ekf, &FilterOptions::default()).unwrap();
        let h = bearing_jacobian(&b.mean).unwrap();
        assert!((&out.cross_cov - &b.cov * &h).amax() < 1e-15);
        assert!((out.innov_cov - h.dot(&(&b.cov * &h)) - 0.02f64.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn bearing_mean_wraps_across_south() {
        // Prior straddling due south: sigma-point bearings land on both sides of ±π.
        let mean = DVector::from_vec(vec![0.0, -5.0, 0.0, 0.0]);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.1, 1e-4, 1e-4]));
        let b = GaussianBelief::new(mean, cov).unwrap();
        for kind in POINT_FILTERS {
            let out = bearing_update(&b, std::f64::consts::PI, 0.02, kind, &FilterOptions::default()).unwrap();
            assert!(wrap_angle(out.pred_meas - std::f64::consts::PI).abs() < 1e-9, "{kind}");
            assert!(out.innov_cov < 0.1);
        }
    }
}
