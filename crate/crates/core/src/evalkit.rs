//! Monte Carlo performance metrics: RMSE, bias norm, track loss and
//! relative execution time.
//!
//! RMSE and bias are computed over runs that neither diverged nor failed.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gaussfilt::FilterKind;
use crate::kinematics::ModelKind;
use crate::simkit::{Mode, RunSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Position,
    Velocity,
}

impl Component {
    fn offset(self) -> usize {
        match self {
            Component::Position => 0,
            Component::Velocity => 2,
        }
    }
}

/// Per-sample metric values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub values: Vec<f64>,
    /// Runs that contributed.
    pub included: usize,
    pub total: usize,
}

impl MetricSeries {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("series is never empty")
    }
}

fn included(runs: &[RunSummary]) -> Result<Vec<&RunSummary>> {
    let kept: Vec<_> = runs.iter().filter(|r| !r.diverged && !r.failed()).collect();
    if kept.is_empty() || kept[0].errors.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(kept)
}

pub fn rmse(runs: &[RunSummary], component: Component) -> Result<MetricSeries> {
    let kept = included(runs)?;
    let len = kept[0].errors.len();
    let o = component.offset();
    let values = (0..len)
        .map(|k| {
            let ss: f64 = kept.iter().map(|r| r.errors[k][o].powi(2) + r.errors[k][o + 1].powi(2)).sum();
            (ss / kept.len() as f64).sqrt()
        })
        .collect();
    Ok(MetricSeries {
        values,
        included: kept.len(),
        total: runs.len(),
    })
}

fn bias(runs: &[RunSummary], component: Component) -> Result<MetricSeries> {
    let kept = included(runs)?;
    let len = kept[0].errors.len();
    let o = component.offset();
    let n = kept.len() as f64;
    let values = (0..len)
        .map(|k| {
            let (sx, sy) = kept
                .iter()
                .fold((0.0, 0.0), |(a, b), r| (a + r.errors[k][o], b + r.errors[k][o + 1]));
            (sx / n).hypot(sy / n)
        })
        .collect();
    Ok(MetricSeries {
        values,
        included: kept.len(),
        total: runs.len(),
    })
}

/// Norm of the ensemble-mean position error.
pub fn bias_norm(runs: &[RunSummary]) -> Result<MetricSeries> {
    bias(runs, Component::Position)
}

/// Norm of the ensemble-mean velocity error (auxiliary output).
pub fn velocity_bias_norm(runs: &[RunSummary]) -> Result<MetricSeries> {
    bias(runs, Component::Velocity)
}

/// Percentage of runs whose terminal error exceeds `bound` (km), counting
/// numerically failed runs as lost.
pub fn track_loss_pct(runs: &[RunSummary], bound: f64) -> f64 {
    if runs.is_empty() {
        return 0.0;
    }
    let lost = runs
        .iter()
        .filter(|r| r.failed() || !(r.terminal_error <= bound))
        .count();
    100.0 * lost as f64 / runs.len() as f64
}

/// Fraction of non-diverged runs whose final larger weight is at least
/// `threshold`.
pub fn resolved_fraction(runs: &[RunSummary], threshold: f64) -> Result<f64> {
    let kept = included(runs)?;
    let ok = kept
        .iter()
        .filter(|r| r.final_weights[0].max(r.final_weights[1]) >= threshold)
        .count();
    Ok(ok as f64 / kept.len() as f64)
}

/// Median sample index at which the bank first resolved, over runs that did.
pub fn median_resolution_step(runs: &[RunSummary]) -> Option<usize> {
    let mut steps: Vec<usize> = runs.iter().filter_map(|r| r.resolved_at).collect();
    if steps.is_empty() {
        return None;
    }
    steps.sort_unstable();
    Some(steps[steps.len() / 2])
}

pub fn total_wall_time(runs: &[RunSummary]) -> f64 {
    runs.iter().map(|r| r.wall_time).sum()
}

/// Each timing divided by the baseline timing.
pub fn relative_execution_time(
    timings: &BTreeMap<String, f64>,
    baseline_key: &str,
) -> Result<BTreeMap<String, f64>> {
    let base = *timings
        .get(baseline_key)
        .filter(|&&b| b > 0.0)
        .ok_or_else(|| Error::MissingBaseline(baseline_key.to_string()))?;
    Ok(timings.iter().map(|(k, v)| (k.clone(), v / base)).collect())
}

/// Key used for timing tables, e.g. `ekf/cv/known-side`.
pub fn cell_key(filter: FilterKind, case: ModelKind, mode: Mode) -> String {
    format!("{filter}/{case}/{mode}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub filter: FilterKind,
    pub case: ModelKind,
    pub mode: Mode,
    pub runs: usize,
    pub track_loss_pct: f64,
    pub terminal_rmse_position_km: Option<f64>,
    pub terminal_rmse_velocity_km_per_min: Option<f64>,
    pub terminal_bias_norm_km: Option<f64>,
    pub resolved_fraction: Option<f64>,
    pub failed_runs: usize,
    /// Mean filter time per run, seconds.
    pub mean_run_time_s: f64,
    pub relative_execution_time: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn push_cell(&mut self, filter: FilterKind, case: ModelKind, mode: Mode, runs: &[RunSummary], bound: f64) {
        let rmse_p = rmse(runs, Component::Position).ok();
        let rmse_v = rmse(runs, Component::Velocity).ok();
        let bias = bias_norm(runs).ok();
        self.rows.push(BenchmarkRow {
            filter,
            case,
            mode,
            runs: runs.len(),
            track_loss_pct: track_loss_pct(runs, bound),
            terminal_rmse_position_km: rmse_p.map(|s| s.terminal()),
            terminal_rmse_velocity_km_per_min: rmse_v.map(|s| s.terminal()),
            terminal_bias_norm_km: bias.map(|s| s.terminal()),
            resolved_fraction: match mode {
                Mode::Resolved => resolved_fraction(runs, crate::simkit::RESOLVED_WEIGHT).ok(),
                Mode::KnownSide => None,
            },
            failed_runs: runs.iter().filter(|r| r.failed()).count(),
            mean_run_time_s: total_wall_time(runs) / runs.len().max(1) as f64,
            relative_execution_time: None,
        });
    }

    /// Fills `relative_execution_time` against the row matching `baseline`;
    /// falls back to the first row when the baseline cell was not run.
    pub fn fill_relative_times(&mut self, baseline: (FilterKind, ModelKind, Mode)) {
        let base = self
            .rows
            .iter()
            .find(|r| (r.filter, r.case, r.mode) == baseline)
            .or(self.rows.first())
            .map(|r| r.mean_run_time_s);
        if let Some(b) = base.filter(|&b| b > 0.0) {
            for r in &mut self.rows {
                r.relative_execution_time = Some(r.mean_run_time_s / b);
            }
        }
    }
}
