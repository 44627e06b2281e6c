//! Deterministic sample point sets: unscented, cubature and Gauss–Hermite.

use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector};

use super::GaussianBelief;
use crate::error::{Error, Result};

/// Order in which a point set is reduced. Mirror-image points are added
/// together before they are weighted, so flipping the sign of any
/// square-root column leaves every weighted sum bit-identical.
#[derive(Clone, Debug, PartialEq)]
enum Layout {
    /// Optional centre point, then `mean + cᵢ` for all columns, then `mean − cᵢ`.
    Symmetric { centre: bool, side_weight: f64 },
    /// Tensor grid, first axis varying fastest.
    Grid { node_weights: Vec<f64>, dim: usize },
}

#[derive(Clone, Debug)]
pub struct WeightedPointSet {
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
    layout: Layout,
}

impl WeightedPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ wᵢ·vᵢ` over values given in point order.
    pub fn weighted_sum<T>(&self, values: &[T]) -> T
    where
        T: Clone + Add<Output = T> + Mul<f64, Output = T>,
    {
        assert_eq!(values.len(), self.points.len(), "one value per point");
        match &self.layout {
            Layout::Symmetric { centre, side_weight } => {
                let c = usize::from(*centre);
                let n = (values.len() - c) / 2;
                let mut acc = (values[c].clone() + values[c + n].clone()) * *side_weight;
                for i in 1..n {
                    acc = acc + (values[c + i].clone() + values[c + n + i].clone()) * *side_weight;
                }
                if *centre {
                    acc = values[0].clone() * self.weights[0] + acc;
                }
                acc
            }
            Layout::Grid { node_weights, dim } => grid_sum(values, node_weights, *dim),
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        self.weighted_sum(&self.points)
    }

    pub fn covariance_about(&self, mean: &DVector<f64>) -> DMatrix<f64> {
        let outer: Vec<DMatrix<f64>> = self
            .points
            .iter()
            .map(|p| {
                let d = p - mean;
                &d * d.transpose()
            })
            .collect();
        self.weighted_sum(&outer)
    }

    pub fn map<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&DVector<f64>) -> DVector<f64>,
    {
        Self {
            points: self.points.iter().map(&mut f).collect(),
            weights: self.weights.clone(),
            layout: self.layout.clone(),
        }
    }
}

/// Reduces the slowest axis last, pairing nodes `i` and `order − 1 − i`.
fn grid_sum<T>(values: &[T], node_weights: &[f64], dim: usize) -> T
where
    T: Clone + Add<Output = T> + Mul<f64, Output = T>,
{
    if dim == 0 {
        return values[0].clone();
    }
    let order = node_weights.len();
    let block = values.len() / order;
    let sub = |i: usize| grid_sum(&values[i * block..(i + 1) * block], node_weights, dim - 1);
    let mut acc = (sub(0) + sub(order - 1)) * node_weights[0];
    for i in 1..order / 2 {
        acc = acc + (sub(i) + sub(order - 1 - i)) * node_weights[i];
    }
    if order % 2 == 1 {
        acc = acc + sub(order / 2) * node_weights[order / 2];
    }
    acc
}

/// Lower Cholesky factor of `cov`; retries once with diagonal jitter of
/// `1e-10 · trace/n`.
pub fn sqrt_cov(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(ch.l());
    }
    let n = cov.nrows();
    let jitter = 1e-10 * cov.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    let jittered = cov + DMatrix::identity(n, n) * jitter;
    jittered
        .cholesky()
        .map(|ch| ch.l())
        .ok_or(Error::NotPositiveDefinite("covariance square root"))
}

/// Default unscented κ: `3 − n` below three dimensions, zero otherwise so the
/// centre weight never goes negative.
pub fn default_kappa(n: usize) -> f64 {
    if n < 3 {
        3.0 - n as f64
    } else {
        0.0
    }
}

fn symmetric_set(
    belief: &GaussianBelief,
    scale: f64,
    centre_weight: Option<f64>,
    side_weight: f64,
) -> Result<WeightedPointSet> {
    let n = belief.dim();
    let l = sqrt_cov(&belief.cov)? * scale;
    let extra = usize::from(centre_weight.is_some());
    let mut points = Vec::with_capacity(2 * n + extra);
    let mut weights = Vec::with_capacity(2 * n + extra);
    if let Some(w0) = centre_weight {
        points.push(belief.mean.clone());
        weights.push(w0);
    }
    for i in 0..n {
        let col = l.column(i);
        points.push(&belief.mean + col);
        weights.push(side_weight);
    }
    for i in 0..n {
        let col = l.column(i);
        points.push(&belief.mean - col);
        weights.push(side_weight);
    }
    Ok(WeightedPointSet {
        points,
        weights,
        layout: Layout::Symmetric {
            centre: centre_weight.is_some(),
            side_weight,
        },
    })
}

pub fn unscented_points(belief: &GaussianBelief, kappa: f64) -> Result<WeightedPointSet> {
    let n = belief.dim() as f64;
    if n + kappa <= 0.0 {
        return Err(Error::invalid("ukf_kappa", format!("n + kappa must be positive (n = {n})")));
    }
    symmetric_set(
        belief,
        (n + kappa).sqrt(),
        Some(kappa / (n + kappa)),
        1.0 / (2.0 * (n + kappa)),
    )
}

pub fn cubature_points(belief: &GaussianBelief) -> Result<WeightedPointSet> {
    let n = belief.dim() as f64;
    symmetric_set(belief, n.sqrt(), None, 1.0 / (2.0 * n))
}

/// Univariate Gauss–Hermite rule for the standard normal weight, via the
/// eigen-decomposition of the Jacobi matrix of the probabilists' Hermite
/// polynomials.
pub fn hermite_rule(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order < 2 {
        return Err(Error::invalid("ghf_order", "Gauss-Hermite order must be at least 2"));
    }
    let mut jacobi = DMatrix::zeros(order, order);
    for i in 1..order {
        let b = (i as f64).sqrt();
        jacobi[(i - 1, i)] = b;
        jacobi[(i, i - 1)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut rule: Vec<(f64, f64)> = (0..order)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrise: the rule is exactly symmetric about zero.
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let x = 0.5 * (rule[j].0 - rule[i].0);
        let w = 0.5 * (rule[j].1 + rule[i].1);
        rule[i] = (-x, w);
        rule[j] = (x, w);
    }
    if order % 2 == 1 {
        rule[order / 2].0 = 0.0;
    }
    let total: f64 = rule.iter().map(|r| r.1).sum();
    Ok(rule.into_iter().map(|(x, w)| (x, w / total)).unzip())
}

pub fn gauss_hermite_points(belief: &GaussianBelief, order: usize) -> Result<WeightedPointSet> {
    let (nodes, node_weights) = hermite_rule(order)?;
    let n = belief.dim();
    let l = sqrt_cov(&belief.cov)?;
    let count = order.pow(n as u32);
    let mut points = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut idx = vec![0usize; n];
    let mut xi = DVector::zeros(n);
    for _ in 0..count {
        let mut w = 1.0;
        for (d, &i) in idx.iter().enumerate() {
            xi[d] = nodes[i];
            w *= node_weights[i];
        }
        points.push(&belief.mean + &l * &xi);
        weights.push(w);
        // Odometer increment over the tensor grid.
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < order {
                break;
            }
            *slot = 0;
        }
    }
    Ok(WeightedPointSet {
        points,
        weights,
        layout: Layout::Grid {
            node_weights,
            dim: n,
        },
    })
}
