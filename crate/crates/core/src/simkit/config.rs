//! Scenario configuration, in the units an operator would write: knots,
//! degrees, minutes and kilometres. Conversion to internal units happens in
//! the accessor methods.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gaussfilt::{FilterKind, FilterOptions};
use crate::kinematics::{knots_to_km_per_min, ModelKind, MotionModel};
use crate::lrtma::InitPrior;
use crate::sensing::GhostNoise;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Two-filter bank fed both bearing slots.
    Resolved,
    /// Single filter fed only the true-side bearing.
    KnownSide,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Resolved, Mode::KnownSide];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Resolved => "resolved",
            Mode::KnownSide => "known-side",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("mode", format!("unknown mode `{s}`")))
    }
}

/// Which terminal error decides track loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceMetric {
    /// |estimated range − true range|
    #[default]
    Range,
    /// Euclidean position error.
    Position,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub sigma_range_km: f64,
    pub sigma_speed_kn: f64,
    pub sigma_bearing_deg: f64,
    pub sigma_course_rad: f64,
    /// Defaults to the scenario's initial range when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_range_km: Option<f64>,
    pub mean_speed_kn: f64,
    pub sigma_turn_rate_deg_per_min: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            sigma_range_km: 2.0,
            sigma_speed_kn: 2.0,
            sigma_bearing_deg: 1.5,
            sigma_course_rad: PI / 12f64.sqrt(),
            mean_range_km: None,
            mean_speed_kn: 4.0,
            sigma_turn_rate_deg_per_min: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sampling_time_min: f64,
    pub horizon_steps: usize,
    pub target_speed_kn: f64,
    pub observer_speed_kn: f64,
    pub target_course_deg: f64,
    pub observer_course_deg: f64,
    pub observer_final_course_deg: f64,
    pub maneuver_start_min: f64,
    pub maneuver_end_min: f64,
    /// Case II course rate, positive clockwise.
    pub target_turn_rate_deg_per_min: f64,
    pub q1: f64,
    pub q2: f64,
    pub bearing_noise_deg: f64,
    pub initial_range_km: f64,
    pub initial_bearing_deg: f64,
    pub track_bound_km: f64,
    pub divergence_metric: DivergenceMetric,
    pub seed: u64,
    pub runs: usize,
    pub filter: FilterKind,
    pub case: ModelKind,
    pub mode: Mode,
    pub ghost_noise: GhostNoise,
    /// Perturb the true turn rate with the q2 noise in Case II.
    pub truth_turn_noise: bool,
    /// Draw a fresh truth trajectory per run rather than one per master seed.
    pub resample_truth: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ukf_kappa: Option<f64>,
    pub ghf_order: usize,
    pub prior: PriorConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            sampling_time_min: 1.0,
            horizon_steps: 30,
            target_speed_kn: 4.0,
            observer_speed_kn: 5.0,
            target_course_deg: -140.0,
            observer_course_deg: 140.0,
            observer_final_course_deg: 20.0,
            maneuver_start_min: 13.0,
            maneuver_end_min: 17.0,
            target_turn_rate_deg_per_min: 3.0,
            q1: 1.944e-6,
            q2: 3.78e-7,
            bearing_noise_deg: 1.5,
            initial_range_km: 5.0,
            initial_bearing_deg: 45.0,
            track_bound_km: 1.0,
            divergence_metric: DivergenceMetric::Range,
            seed: 1,
            runs: 500,
            filter: FilterKind::Ukf,
            case: ModelKind::Cv,
            mode: Mode::Resolved,
            ghost_noise: GhostNoise::Mirrored,
            truth_turn_noise: true,
            resample_truth: true,
            ukf_kappa: None,
            ghf_order: 3,
            prior: PriorConfig::default(),
        }
    }
}

fn require(cond: bool, field: &str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(field, reason))
    }
}

fn positive(v: f64, field: &str, unit: &str) -> Result<()> {
    require(v > 0.0 && v.is_finite(), field, format!("must be a positive number of {unit}, got {v}"))
}

fn non_negative(v: f64, field: &str, unit: &str) -> Result<()> {
    require(v >= 0.0 && v.is_finite(), field, format!("must be a non-negative number of {unit}, got {v}"))
}

fn finite(v: f64, field: &str) -> Result<()> {
    require(v.is_finite(), field, format!("must be finite, got {v}"))
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| {
            Error::invalid("config", e.message().to_string() + &span_hint(s, e.span()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        positive(self.sampling_time_min, "sampling_time_min", "minutes")?;
        require(self.horizon_steps >= 1, "horizon_steps", "must be at least 1")?;
        positive(self.target_speed_kn, "target_speed_kn", "knots")?;
        positive(self.observer_speed_kn, "observer_speed_kn", "knots")?;
        finite(self.target_course_deg, "target_course_deg")?;
        finite(self.observer_course_deg, "observer_course_deg")?;
        finite(self.observer_final_course_deg, "observer_final_course_deg")?;
        finite(self.target_turn_rate_deg_per_min, "target_turn_rate_deg_per_min")?;
        finite(self.initial_bearing_deg, "initial_bearing_deg")?;
        positive(self.maneuver_start_min, "maneuver_start_min", "minutes")?;
        require(
            self.maneuver_end_min > self.maneuver_start_min,
            "maneuver_end_min",
            format!(
                "must be after maneuver_start_min ({} min), got {}",
                self.maneuver_start_min, self.maneuver_end_min
            ),
        )?;
        let span = self.horizon_steps as f64 * self.sampling_time_min;
        require(
            self.maneuver_end_min <= span,
            "maneuver_end_min",
            format!("must not exceed the scenario length of {span} min"),
        )?;
        non_negative(self.q1, "q1", "km²/min³")?;
        non_negative(self.q2, "q2", "1/min³")?;
        non_negative(self.bearing_noise_deg, "bearing_noise_deg", "degrees")?;
        positive(self.initial_range_km, "initial_range_km", "km")?;
        non_negative(self.track_bound_km, "track_bound_km", "km")?;
        require(self.runs >= 1, "runs", "must be at least 1")?;
        require(self.ghf_order >= 2, "ghf_order", "must be at least 2")?;
        if let Some(k) = self.ukf_kappa {
            let n = self.case.state_dim() as f64;
            require(n + k > 0.0, "ukf_kappa", format!("state dimension + kappa must be positive (dimension {n})"))?;
        }
        let p = &self.prior;
        positive(p.sigma_range_km, "prior.sigma_range_km", "km")?;
        positive(p.sigma_speed_kn, "prior.sigma_speed_kn", "knots")?;
        positive(p.sigma_bearing_deg, "prior.sigma_bearing_deg", "degrees")?;
        positive(p.sigma_course_rad, "prior.sigma_course_rad", "radians")?;
        if let Some(r) = p.mean_range_km {
            positive(r, "prior.mean_range_km", "km")?;
        }
        non_negative(p.mean_speed_kn, "prior.mean_speed_kn", "knots")?;
        positive(p.sigma_turn_rate_deg_per_min, "prior.sigma_turn_rate_deg_per_min", "deg/min")?;
        Ok(())
    }

    pub fn motion_model(&self) -> MotionModel {
        MotionModel {
            kind: self.case,
            dt: self.sampling_time_min,
            q1: self.q1,
            q2: self.q2,
        }
    }

    pub fn filter_options(&self) -> FilterOptions {
        FilterOptions {
            ukf_kappa: self.ukf_kappa,
            ghf_order: self.ghf_order,
        }
    }

    pub fn bearing_noise(&self) -> f64 {
        self.bearing_noise_deg.to_radians()
    }

    pub fn init_prior(&self) -> InitPrior {
        let p = &self.prior;
        InitPrior {
            sigma_r: p.sigma_range_km,
            sigma_s: knots_to_km_per_min(p.sigma_speed_kn),
            sigma_theta: p.sigma_bearing_deg.to_radians(),
            sigma_c: p.sigma_course_rad,
            r_bar: p.mean_range_km.unwrap_or(self.initial_range_km),
            s_bar: knots_to_km_per_min(p.mean_speed_kn),
            sigma_psi: p.sigma_turn_rate_deg_per_min.to_radians(),
        }
    }

    /// Sample instants, `0, T, …, horizon·T`.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.horizon_steps).map(move |k| k as f64 * self.sampling_time_min)
    }
}

fn span_hint(src: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = src[..r.start.min(src.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}
