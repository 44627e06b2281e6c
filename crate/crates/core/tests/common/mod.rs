//! Helpers shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use towtrack::gaussfilt::GaussianBelief;
use towtrack::kinematics::ObserverState;
use towtrack::sensing::BearingPair;
use towtrack::simkit::Scenario;

pub fn reflect_vec(v: &DVector<f64>) -> DVector<f64> {
    let mut r = v.clone();
    r[0] = -r[0];
    r[2] = -r[2];
    if r.len() == 5 {
        r[4] = -r[4];
    }
    r
}

/// x ↦ −x on the state: flips east position, east velocity and turn rate.
pub fn reflect_belief(b: &GaussianBelief) -> GaussianBelief {
    let n = b.mean.len();
    let sign = DVector::from_fn(n, |i, _| if i == 0 || i == 2 || i == 4 { -1.0 } else { 1.0 });
    let cov = DMatrix::from_fn(n, n, |i, j| sign[i] * sign[j] * b.cov[(i, j)]);
    GaussianBelief {
        mean: reflect_vec(&b.mean),
        cov,
    }
}

pub fn reflect_observer(o: &ObserverState) -> ObserverState {
    ObserverState {
        x: -o.x,
        y: o.y,
        vx: -o.vx,
        vy: o.vy,
        heading: -o.heading,
    }
}

/// Mirror image of a scenario whose noise stream is reflected with it.
pub fn reflect_scenario(s: &Scenario) -> Scenario {
    Scenario {
        observer: s.observer.iter().map(reflect_observer).collect(),
        target: s.target.iter().map(reflect_vec).collect(),
        truth: s.truth.iter().map(reflect_vec).collect(),
        measurements: s
            .measurements
            .iter()
            .map(|m| BearingPair {
                y1: -m.y1,
                y2: -m.y2,
                heading: -m.heading,
                t: m.t,
            })
            .collect(),
        true_slot: s.true_slot,
    }
}
