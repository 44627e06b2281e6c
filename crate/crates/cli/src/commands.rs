use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;
use towtrack::evalkit::{bias_norm, rmse, velocity_bias_norm, BenchmarkTable, Component, MetricSeries};
use towtrack::gaussfilt::{FilterKind, GaussianBelief};
use towtrack::kinematics::ModelKind;
use towtrack::simkit::{run_monte_carlo, run_seed, simulate_run, Mode, RunRecord, RunSummary, ScenarioConfig};

use crate::manifest::RunManifest;
use crate::{CliError, CommonArgs};

const DEG_PER_RAD: f64 = 180.0 / std::f64::consts::PI;

pub const TRACK_FILE: &str = "track.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub const TRACK_COLUMNS: [&str; 44] = [
    "step",
    "t_min",
    "obs_x_km",
    "obs_y_km",
    "obs_vx_km_per_min",
    "obs_vy_km_per_min",
    "obs_heading_deg",
    "true_x_km",
    "true_y_km",
    "true_vx_km_per_min",
    "true_vy_km_per_min",
    "true_psi_deg_per_min",
    "y1_deg",
    "y2_deg",
    "h_deg",
    "true_slot",
    "s1_x_km",
    "s1_y_km",
    "s1_vx_km_per_min",
    "s1_vy_km_per_min",
    "s1_psi_deg_per_min",
    "s2_x_km",
    "s2_y_km",
    "s2_vx_km_per_min",
    "s2_vy_km_per_min",
    "s2_psi_deg_per_min",
    "w1",
    "w2",
    "fused_x_km",
    "fused_y_km",
    "fused_vx_km_per_min",
    "fused_vy_km_per_min",
    "fused_psi_deg_per_min",
    "var_x_km2",
    "var_y_km2",
    "var_vx_km2_per_min2",
    "var_vy_km2_per_min2",
    "var_psi_deg2_per_min2",
    "true_range_km",
    "true_bearing_deg",
    "fused_range_km",
    "fused_bearing_deg",
    "range_error_km",
    "position_error_km",
];

pub const SERIES_COLUMNS: [&str; 8] = [
    "step",
    "t_min",
    "rmse_position_km",
    "rmse_velocity_km_per_min",
    "bias_norm_km",
    "velocity_bias_norm_km_per_min",
    "included_runs",
    "total_runs",
];

/// Shortest round-trip decimal; locale independent.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn load_config(args: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ScenarioConfig::from_toml_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Some(f) = args.filter {
        cfg.filter = f;
    }
    if let Some(c) = args.case {
        cfg.case = c;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn psi_deg(v: &DVector<f64>) -> Option<f64> {
    (v.len() == 5).then(|| v[4].to_degrees())
}

fn belief_fields(b: Option<&GaussianBelief>) -> [String; 5] {
    match b {
        Some(b) => {
            let m = &b.mean;
            [num(m[0]), num(m[1]), num(m[2]), num(m[3]), opt(psi_deg(m))]
        }
        None => Default::default(),
    }
}

fn track_rows(rec: &RunRecord, dt: f64) -> Vec<Vec<String>> {
    let sc = &rec.scenario;
    rec.estimates
        .iter()
        .enumerate()
        .map(|(k, est)| {
            let o = &sc.observer[k];
            let x = &sc.truth[k];
            let z = &sc.measurements[k];
            let f = &est.fused;
            let sides = est.sides.as_ref();
            let var = |i: usize| f.cov[(i, i)];
            let true_range = x[0].hypot(x[1]);
            let fused_range = f.mean[0].hypot(f.mean[1]);
            let mut row = vec![
                k.to_string(),
                num(z.t as f64 * dt),
                num(o.x),
                num(o.y),
                num(o.vx),
                num(o.vy),
                num(o.heading.to_degrees()),
                num(x[0]),
                num(x[1]),
                num(x[2]),
                num(x[3]),
                opt(psi_deg(x)),
                num(z.y1.to_degrees()),
                num(z.y2.to_degrees()),
                num(z.heading.to_degrees()),
                (sc.true_slot + 1).to_string(),
            ];
            row.extend(belief_fields(sides.map(|s| &s[0])));
            row.extend(belief_fields(sides.map(|s| &s[1])));
            row.extend([num(est.weights[0]), num(est.weights[1])]);
            row.extend(belief_fields(Some(f)));
            row.extend([num(var(0)), num(var(1)), num(var(2)), num(var(3))]);
            row.push(if f.mean.len() == 5 { num(var(4) * DEG_PER_RAD * DEG_PER_RAD) } else { String::new() });
            row.extend([
                num(true_range),
                num(x[0].atan2(x[1]).to_degrees()),
                num(fused_range),
                num(f.mean[0].atan2(f.mean[1]).to_degrees()),
                num((fused_range - true_range).abs()),
                num((f.mean[0] - x[0]).hypot(f.mean[1] - x[1])),
            ]);
            row
        })
        .collect()
}

/// Writes the rows produced before any filter failure, then reports it.
pub fn track(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let mut manifest = RunManifest::new("track", &cfg);
    manifest.cells.push(towtrack::evalkit::cell_key(cfg.filter, cfg.case, cfg.mode));
    create_dir(&args.out)?;
    let seed = run_seed(cfg.seed, 0);
    let rec = simulate_run(&cfg, seed).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut w = csv::Writer::from_path(args.out.join(TRACK_FILE))?;
    w.write_record(TRACK_COLUMNS)?;
    for row in track_rows(&rec, cfg.sampling_time_min) {
        w.write_record(&row)?;
    }
    w.flush()?;
    manifest.outputs.push(TRACK_FILE.into());
    manifest.finish(&args.out)?;
    match &rec.failure {
        Some(f) => Err(CliError::Runtime(format!("filter failure after {} samples: {f}", rec.estimates.len()))),
        None => Ok(()),
    }
}

pub fn series_file(filter: FilterKind, case: ModelKind, mode: Mode) -> String {
    format!("series_{filter}_{case}_{mode}.csv")
}

fn write_series(path: &Path, cfg: &ScenarioConfig, runs: &[RunSummary]) -> Result<(), CliError> {
    let p = rmse(runs, Component::Position).ok();
    let v = rmse(runs, Component::Velocity).ok();
    let b = bias_norm(runs).ok();
    let bv = velocity_bias_norm(runs).ok();
    let at = |s: &Option<MetricSeries>, k: usize| opt(s.as_ref().map(|s| s.values[k]));
    let included = p.as_ref().map_or(0, |s| s.included);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SERIES_COLUMNS)?;
    for (k, t) in cfg.times().enumerate() {
        w.write_record([
            k.to_string(),
            num(t),
            at(&p, k),
            at(&v, k),
            at(&b, k),
            at(&bv, k),
            included.to_string(),
            runs.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    config_hash: &'a str,
    seed: u64,
    runs: usize,
    track_bound_km: f64,
    table: &'a BenchmarkTable,
}

pub fn montecarlo(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let filters = args.filter.map_or(FilterKind::ALL.to_vec(), |f| vec![f]);
    let cases = args.case.map_or(vec![ModelKind::Cv, ModelKind::Ct], |c| vec![c]);
    let modes = args.mode.map_or(Mode::ALL.to_vec(), |m| vec![m]);
    let mut manifest = RunManifest::new("montecarlo", &cfg);
    create_dir(&args.out)?;
    let mut table = BenchmarkTable::default();
    for &filter in &filters {
        for &case in &cases {
            for &mode in &modes {
                let cell = ScenarioConfig {
                    filter,
                    case,
                    mode,
                    ..cfg.clone()
                };
                let runs = run_monte_carlo(&cell, args.workers).map_err(|e| CliError::Runtime(e.to_string()))?;
                let name = series_file(filter, case, mode);
                write_series(&args.out.join(&name), &cell, &runs)?;
                table.push_cell(filter, case, mode, &runs, cfg.track_bound_km);
                let row = table.rows.last().expect("row just pushed");
                eprintln!(
                    "{:<22} track loss {:6.2}%  terminal rmse {} km",
                    towtrack::evalkit::cell_key(filter, case, mode),
                    row.track_loss_pct,
                    opt(row.terminal_rmse_position_km),
                );
                manifest.cells.push(towtrack::evalkit::cell_key(filter, case, mode));
                manifest.outputs.push(name);
            }
        }
    }
    table.fill_relative_times((FilterKind::Ekf, ModelKind::Cv, Mode::KnownSide));
    let summary = Summary {
        config_hash: &manifest.config_hash,
        seed: cfg.seed,
        runs: cfg.runs,
        track_bound_km: cfg.track_bound_km,
        table: &table,
    };
    std::fs::write(args.out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)? + "\n")?;
    manifest.outputs.push(SUMMARY_FILE.into());
    manifest.finish(&args.out)
}
