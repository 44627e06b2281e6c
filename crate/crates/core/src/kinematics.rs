//! Discrete-time relative motion between target and towing ship.
//!
//! States are expressed relative to the observer: `X = X_target - X_observer`,
//! east/north positions in km and velocities in km/min. The CT model appends
//! the (unknown) turn rate in rad/min as a fifth component.
//!
//! Turn rate sign follows the rotation matrix of the CT model: a positive
//! rate rotates the velocity vector counter-clockwise in the east/north plane,
//! which *decreases* a compass course.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::wrap_angle;

/// One international knot in km/min.
pub const KNOT_KM_PER_MIN: f64 = 1.852 / 60.0;

/// Below this turn rate the CT coefficients fall back to their Taylor limits.
pub const TURN_RATE_EPS: f64 = 1e-8;

pub fn knots_to_km_per_min(knots: f64) -> f64 {
    knots * KNOT_KM_PER_MIN
}

/// Velocity vector for a compass course (clockwise from north) and speed.
pub fn course_to_velocity(course: f64, speed: f64) -> (f64, f64) {
    (speed * course.sin(), speed * course.cos())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cv,
    Ct,
}

impl ModelKind {
    pub fn state_dim(self) -> usize {
        match self {
            ModelKind::Cv => 4,
            ModelKind::Ct => 5,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Cv => "cv",
            ModelKind::Ct => "ct",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cv" => Ok(ModelKind::Cv),
            "ct" => Ok(ModelKind::Ct),
            other => Err(Error::invalid("case", format!("unknown model `{other}`"))),
        }
    }
}

/// Relative target-observer state, 4 components (CV) or 5 (CT).
#[derive(Clone, Debug, PartialEq)]
pub struct RelativeState(DVector<f64>);

impl RelativeState {
    pub fn cv(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self(DVector::from_vec(vec![x, y, vx, vy]))
    }

    pub fn ct(x: f64, y: f64, vx: f64, vy: f64, psi: f64) -> Self {
        Self(DVector::from_vec(vec![x, y, vx, vy, psi]))
    }

    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        if v.len() != 4 && v.len() != 5 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: v.len(),
            });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("non-finite state component".into()));
        }
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn vx(&self) -> f64 {
        self.0[2]
    }

    pub fn vy(&self) -> f64 {
        self.0[3]
    }

    pub fn psi(&self) -> Option<f64> {
        (self.0.len() == 5).then(|| self.0[4])
    }

    pub fn range(&self) -> f64 {
        self.x().hypot(self.y())
    }
}

/// Ownship (towed array midpoint) state. Heading is the array axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub heading: f64,
}

impl ObserverState {
    pub fn from_course(x: f64, y: f64, speed: f64, course: f64) -> Self {
        let (vx, vy) = course_to_velocity(course, speed);
        Self {
            x,
            y,
            vx,
            vy,
            heading: wrap_angle(course),
        }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn kinematic_vector(&self) -> [f64; 4] {
        [self.x, self.y, self.vx, self.vy]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    pub kind: ModelKind,
    /// Sampling interval, minutes.
    pub dt: f64,
    /// CV acceleration noise intensity, km²/min³.
    pub q1: f64,
    /// Turn-rate noise intensity, min⁻³.
    pub q2: f64,
}

impl MotionModel {
    pub fn new(kind: ModelKind, dt: f64, q1: f64, q2: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", "sampling interval must be positive"));
        }
        if !(q1 >= 0.0 && q1.is_finite()) {
            return Err(Error::invalid("q1", "must be non-negative"));
        }
        if !(q2 >= 0.0 && q2.is_finite()) {
            return Err(Error::invalid("q2", "must be non-negative"));
        }
        Ok(Self { kind, dt, q1, q2 })
    }

    pub fn cv(dt: f64, q1: f64) -> Result<Self> {
        Self::new(ModelKind::Cv, dt, q1, 0.0)
    }

    pub fn ct(dt: f64, q1: f64, q2: f64) -> Result<Self> {
        Self::new(ModelKind::Ct, dt, q1, q2)
    }

    pub fn state_dim(&self) -> usize {
        self.kind.state_dim()
    }

    /// Transition matrix; `psi` is ignored for CV.
    pub fn transition_matrix(&self, psi: f64) -> DMatrix<f64> {
        let n = self.state_dim();
        let mut f = DMatrix::identity(n, n);
        match self.kind {
            ModelKind::Cv => {
                f[(0, 2)] = self.dt;
                f[(1, 3)] = self.dt;
            }
            ModelKind::Ct => {
                let c = TurnCoefficients::new(psi, self.dt);
                f[(0, 2)] = c.sin_over;
                f[(0, 3)] = -c.one_minus_cos_over;
                f[(1, 2)] = c.one_minus_cos_over;
                f[(1, 3)] = c.sin_over;
                f[(2, 2)] = c.cos;
                f[(2, 3)] = -c.sin;
                f[(3, 2)] = c.sin;
                f[(3, 3)] = c.cos;
            }
        }
        f
    }

    /// Deterministic one-step transition of a raw state vector (no noise, no
    /// observer input). For CT the turn rate is read from the fifth component.
    pub fn propagate(&self, state: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(state.len(), self.state_dim());
        let (x, y, vx, vy) = (state[0], state[1], state[2], state[3]);
        match self.kind {
            ModelKind::Cv => DVector::from_vec(vec![
                x + self.dt * vx,
                y + self.dt * vy,
                vx,
                vy,
            ]),
            ModelKind::Ct => {
                let psi = state[4];
                let c = TurnCoefficients::new(psi, self.dt);
                DVector::from_vec(vec![
                    x + c.sin_over * vx - c.one_minus_cos_over * vy,
                    y + c.one_minus_cos_over * vx + c.sin_over * vy,
                    c.cos * vx - c.sin * vy,
                    c.sin * vx + c.cos * vy,
                    psi,
                ])
            }
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Trigonometric entries of the CT transition for one `(psi, dt)` pair.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TurnCoefficients {
    sin: f64,
    cos: f64,
    /// sin(ψT)/ψ
    sin_over: f64,
    /// (1 − cos(ψT))/ψ
    one_minus_cos_over: f64,
}

impl TurnCoefficients {
    pub(crate) fn new(psi: f64, dt: f64) -> Self {
        let (sin, cos) = (psi * dt).sin_cos();
        if psi.abs() < TURN_RATE_EPS {
            Self {
                sin,
                cos,
                sin_over: dt,
                one_minus_cos_over: psi * dt * dt / 2.0,
            }
        } else {
            Self {
                sin,
                cos,
                sin_over: sin / psi,
                // 1 − cos x = 2 sin²(x/2) without cancellation near the threshold.
                one_minus_cos_over: 2.0 * (0.5 * psi * dt).sin().powi(2) / psi,
            }
        }
    }
}

/// `d/dψ` of `sin(ψT)/ψ` and `(1 − cos(ψT))/ψ`.
fn turn_coefficient_derivatives(psi: f64, dt: f64) -> (f64, f64) {
    // The closed forms lose precision to cancellation for small ψT.
    let a = psi * dt;
    if a.abs() < 1e-3 {
        let t2 = dt * dt;
        let d_sin_over = -psi * t2 * dt / 3.0 + psi.powi(3) * t2 * t2 * dt / 30.0;
        let d_omc_over = t2 / 2.0 - psi * psi * t2 * t2 / 8.0 + psi.powi(4) * t2 * t2 * t2 / 144.0;
        (d_sin_over, d_omc_over)
    } else {
        let (s, c) = a.sin_cos();
        let p2 = psi * psi;
        ((dt * c * psi - s) / p2, (dt * s * psi - (1.0 - c)) / p2)
    }
}

pub fn cv_transition(state: &RelativeState, dt: f64) -> Result<RelativeState> {
    let model = MotionModel::cv(dt, 0.0)?;
    model.check_dim(state.dim())?;
    Ok(RelativeState(model.propagate(state.as_vector())))
}

pub fn ct_transition(state: &RelativeState, dt: f64) -> Result<RelativeState> {
    let model = MotionModel::ct(dt, 0.0, 0.0)?;
    model.check_dim(state.dim())?;
    Ok(RelativeState(model.propagate(state.as_vector())))
}

/// Observer input vector `℧_{k-1,k} = X^o_k − F(ψ)·X^o_{k-1}`.
///
/// For CT the input depends on the turn rate hypothesis `psi`; the fifth
/// entry is always zero. `psi` is ignored for CV.
pub fn observer_input(
    prev: &ObserverState,
    now: &ObserverState,
    model: &MotionModel,
    psi: f64,
) -> DVector<f64> {
    let dt = model.dt;
    match model.kind {
        ModelKind::Cv => DVector::from_vec(vec![
            now.x - prev.x - dt * prev.vx,
            now.y - prev.y - dt * prev.vy,
            now.vx - prev.vx,
            now.vy - prev.vy,
        ]),
        ModelKind::Ct => {
            let c = TurnCoefficients::new(psi, dt);
            DVector::from_vec(vec![
                now.x - prev.x - c.sin_over * prev.vx + c.one_minus_cos_over * prev.vy,
                now.y - prev.y - c.one_minus_cos_over * prev.vx - c.sin_over * prev.vy,
                now.vx - c.cos * prev.vx + c.sin * prev.vy,
                now.vy - c.sin * prev.vx - c.cos * prev.vy,
                0.0,
            ])
        }
    }
}

pub fn process_noise_cov(model: &MotionModel) -> DMatrix<f64> {
    let t = model.dt;
    let n = model.state_dim();
    let mut q = DMatrix::zeros(n, n);
    let pp = t.powi(3) / 3.0 * model.q1;
    let pv = t * t / 2.0 * model.q1;
    let vv = t * model.q1;
    for i in 0..2 {
        q[(i, i)] = pp;
        q[(i, i + 2)] = pv;
        q[(i + 2, i)] = pv;
        q[(i + 2, i + 2)] = vv;
    }
    if model.kind == ModelKind::Ct {
        q[(4, 4)] = model.q2 * t;
    }
    q
}

/// Jacobian of [`MotionModel::propagate`] at `state`.
pub fn process_jacobian(model: &MotionModel, state: &DVector<f64>) -> Result<DMatrix<f64>> {
    model.check_dim(state.len())?;
    let psi = if model.kind == ModelKind::Ct { state[4] } else { 0.0 };
    let mut jac = model.transition_matrix(psi);
    if model.kind == ModelKind::Ct {
        let dt = model.dt;
        let (vx, vy) = (state[2], state[3]);
        let (s, c) = (psi * dt).sin_cos();
        let (d_so, d_omc) = turn_coefficient_derivatives(psi, dt);
        jac[(0, 4)] = d_so * vx - d_omc * vy;
        jac[(1, 4)] = d_omc * vx + d_so * vy;
        jac[(2, 4)] = -dt * s * vx - dt * c * vy;
        jac[(3, 4)] = dt * c * vx - dt * s * vy;
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // Power series, independent of libm's sin/cos.
    fn series_sin(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for k in 1..30 {
            term *= -x * x / ((2 * k) as f64 * (2 * k + 1) as f64);
            sum += term;
        }
        sum
    }

    fn series_cos(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            term *= -x * x / ((2 * k - 1) as f64 * (2 * k) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn cv_transition_examples() {
        let out = cv_transition(&RelativeState::cv(1.0, 2.0, 0.06, 0.0), 1.0).unwrap();
        assert_eq!(out.as_vector().as_slice(), &[1.06, 2.0, 0.06, 0.0]);
        let zero = cv_transition(&RelativeState::cv(0.0, 0.0, 0.0, 0.0), 3.7).unwrap();
        assert!(zero.as_vector().iter().all(|&c| c == 0.0));
        assert!(matches!(
            cv_transition(&RelativeState::ct(0.0, 0.0, 0.0, 0.0, 0.0), 1.0),
            Err(Error::DimensionMismatch { expected: 4, got: 5 })
        ));
    }

    #[test]
    fn cv_transition_matches_matrix_product() {
        let dt = 0.75;
        let mut f = DMatrix::<f64>::identity(4, 4);
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        let s = DVector::from_vec(vec![3.1, -2.4, 0.11, -0.07]);
        let expected = &f * &s;
        let got = cv_transition(&RelativeState::from_vector(s).unwrap(), dt).unwrap();
        assert!((got.as_vector() - expected).amax() < 1e-15);
    }

    #[test]
    fn ct_zero_rate_reduces_to_cv() {
        let ct = ct_transition(&RelativeState::ct(1.0, 2.0, 0.06, -0.03, 0.0), 1.0).unwrap();
        let cv = cv_transition(&RelativeState::cv(1.0, 2.0, 0.06, -0.03), 1.0).unwrap();
        for i in 0..4 {
            assert!(close(ct.as_vector()[i], cv.as_vector()[i], 1e-15));
        }
        assert_eq!(ct.psi(), Some(0.0));
    }

    #[test]
    fn ct_half_turn_reverses_velocity() {
        let dt = 2.0;
        let v = 0.1;
        let out = ct_transition(&RelativeState::ct(0.0, 0.0, v, 0.0, PI / dt), dt).unwrap();
        assert!(close(out.vx(), -v, 1e-15));
        assert!(close(out.vy(), 0.0, 1e-15));
    }

    #[test]
    fn ct_matrix_entries_at_three_degrees_per_minute() {
        let psi = 3f64.to_radians();
        let f = MotionModel::ct(1.0, 0.0, 0.0).unwrap().transition_matrix(psi);
        let (s, c) = (series_sin(psi), series_cos(psi));
        assert!(close(f[(0, 2)], s / psi, 1e-14));
        assert!(close(f[(0, 3)], -(1.0 - c) / psi, 1e-13));
        assert!(close(f[(1, 2)], (1.0 - c) / psi, 1e-13));
        assert!(close(f[(2, 2)], c, 1e-15));
        assert!(close(f[(2, 3)], -s, 1e-15));
        assert!(close(f[(3, 2)], s, 1e-15));
        assert!(close(f[(4, 4)], 1.0, 0.0));
    }

    #[test]
    fn ct_taylor_fallback_is_continuous() {
        let base = [1.3, -0.4, 0.08, 0.05];
        for psi in [0.99e-8, 1.01e-8, -0.99e-8, -1.01e-8] {
            let ct = ct_transition(
                &RelativeState::ct(base[0], base[1], base[2], base[3], psi),
                1.0,
            )
            .unwrap();
            let cv = cv_transition(&RelativeState::cv(base[0], base[1], base[2], base[3]), 1.0)
                .unwrap();
            for i in 0..4 {
                assert!(close(ct.as_vector()[i], cv.as_vector()[i], 1e-9));
            }
        }
    }

    #[test]
    fn observer_input_vanishes_for_homogeneous_motion() {
        let cv = MotionModel::cv(1.0, 0.0).unwrap();
        let still = ObserverState::from_course(1.0, 2.0, 0.0, 0.3);
        assert!(observer_input(&still, &still, &cv, 0.0).amax() == 0.0);

        let prev = ObserverState::from_course(1.0, 2.0, 0.08, 0.7);
        let now = ObserverState {
            x: prev.x + prev.vx,
            y: prev.y + prev.vy,
            ..prev
        };
        assert!(observer_input(&prev, &now, &cv, 0.0).amax() < 1e-15);

        // Observer advanced with the CT rotation itself.
        let psi = -0.3;
        let ct = MotionModel::ct(1.0, 0.0, 0.0).unwrap();
        let f = ct.transition_matrix(psi);
        let xo = DVector::from_vec(vec![prev.x, prev.y, prev.vx, prev.vy, psi]);
        let next = &f * &xo;
        let now = ObserverState {
            x: next[0],
            y: next[1],
            vx: next[2],
            vy: next[3],
            heading: 0.0,
        };
        let u = observer_input(&prev, &now, &ct, psi);
        assert_eq!(u.len(), 5);
        assert!(u.amax() < 1e-15);
    }

    #[test]
    fn process_noise_entries() {
        let q1 = 1.944e-6;
        let q = process_noise_cov(&MotionModel::cv(1.0, q1).unwrap());
        assert!(close(q[(0, 0)], q1 / 3.0, 1e-22));
        assert!(close(q[(0, 2)], q1 / 2.0, 1e-22));
        assert!(close(q[(2, 2)], q1, 1e-22));
        assert_eq!(q[(0, 1)], 0.0);

        let zero = process_noise_cov(&MotionModel::cv(2.0, 0.0).unwrap());
        assert!(zero.iter().all(|&v| v == 0.0));

        let q = process_noise_cov(&MotionModel::ct(1.0, q1, 3.78e-7).unwrap());
        assert_eq!(q.nrows(), 5);
        assert!(close(q[(4, 4)], 3.78e-7, 1e-22));
        for i in 0..4 {
            assert_eq!(q[(i, 4)], 0.0);
            assert_eq!(q[(4, i)], 0.0);
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(MotionModel::cv(0.0, 1.0).is_err());
        assert!(MotionModel::cv(1.0, -1.0).is_err());
        assert!(MotionModel::ct(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn cv_jacobian_is_transition_matrix() {
        let m = MotionModel::cv(1.5, 1e-3).unwrap();
        let s = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(process_jacobian(&m, &s).unwrap(), m.transition_matrix(0.0));
    }

    #[test]
    fn ct_jacobian_psi_column_zero_without_velocity() {
        let m = MotionModel::ct(1.0, 0.0, 0.0).unwrap();
        let s = DVector::from_vec(vec![1.0, 2.0, 0.0, 0.0, 0.04]);
        let j = process_jacobian(&m, &s).unwrap();
        for i in 0..4 {
            assert_eq!(j[(i, 4)], 0.0);
        }
    }

    fn fd_jacobian(m: &MotionModel, s: &DVector<f64>) -> DMatrix<f64> {
        let n = s.len();
        let mut j = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = 1e-6 * s[k].abs().max(1e-2);
            let mut a = s.clone();
            let mut b = s.clone();
            a[k] += h;
            b[k] -= h;
            let col = (m.propagate(&a) - m.propagate(&b)) / (2.0 * h);
            j.set_column(k, &col);
        }
        j
    }

    proptest! {
        #[test]
        fn process_noise_is_psd(q1 in 0.0..1e-2f64, q2 in 0.0..1e-3f64, dt in 0.01..10.0f64) {
            let q = process_noise_cov(&MotionModel::ct(dt, q1, q2).unwrap());
            prop_assert!((&q - q.transpose()).amax() == 0.0);
            let eig = q.symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&e| e >= -1e-12));
        }

        #[test]
        fn ct_jacobian_matches_finite_differences(
            x in -10.0..10.0f64, y in -10.0..10.0f64,
            vx in -0.3..0.3f64, vy in -0.3..0.3f64,
            psi in -0.2..0.2f64, dt in 0.2..3.0f64,
        ) {
            let m = MotionModel::ct(dt, 0.0, 0.0).unwrap();
            let s = DVector::from_vec(vec![x, y, vx, vy, psi]);
            let j = process_jacobian(&m, &s).unwrap();
            let fd = fd_jacobian(&m, &s);
            let scale = j.amax().max(1.0);
            prop_assert!((&j - &fd).amax() / scale < 1e-6);
        }
    }
}
