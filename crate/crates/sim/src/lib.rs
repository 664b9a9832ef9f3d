//! File-level driver for the reverse-parking planner: scenario configs,
//! trajectory logs, metrics, SVG charts and scenario suites.

// `!(x > 0.0)` is used on purpose so that NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod plot;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use trailer_core::kinematics::{track_virtual_steer, TrackingReport};
use trailer_core::orchestrator::run_parking;
use trailer_core::{ParkingOutcome, Stage, StageMetrics};

use config::{IkConfig, ScenarioConfig};
use output::{rows_from_outcome, MetricsReport, TrajectoryRow};
use plot::PlotContext;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error("bad log: {0}")]
    Log(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario {name} failed: {reason}")]
    Scenario { name: String, reason: String },
}

impl SimError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Scenario { .. } => 1,
            Self::Io { .. } | Self::Log(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Log(_) => "log",
            Self::Io { .. } => "io",
            Self::Scenario { .. } => "scenario",
        }
    }
}

impl From<&ScenarioConfig> for PlotContext {
    fn from(cfg: &ScenarioConfig) -> Self {
        let ocp = cfg.ocp.config();
        Self { params: cfg.vehicle.params(), steer_limits: ocp.steer_limits, ..Self::default() }
    }
}

/// A finished scenario with its log in file form.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub outcome: ParkingOutcome,
    pub rows: Vec<TrajectoryRow>,
}

impl ScenarioRun {
    pub fn metrics(&self) -> MetricsReport {
        MetricsReport::new(&self.config, &self.outcome)
    }

    /// Stage-1 metrics, and those of the last reverse stage if the
    /// repositioning cycle ran.
    pub fn first_and_last_reverse(&self) -> (Option<&StageMetrics>, Option<&StageMetrics>) {
        let first = self.outcome.stages.iter().find(|m| m.kind == Stage::Reverse);
        let last = if self.outcome.repositioned { self.outcome.final_metrics() } else { None };
        (first, last)
    }

    /// Writes `trajectory.csv`, `metrics.json` and, if asked, the charts.
    pub fn write(&self, dir: &Path, plots: bool) -> Result<(), SimError> {
        std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        output::write_csv(&self.rows, &dir.join("trajectory.csv"))?;
        output::write_json(&self.metrics(), &dir.join("metrics.json"))?;
        if plots {
            plot::write_plots(&self.rows, &PlotContext::from(&self.config), dir)?;
        }
        Ok(())
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> ScenarioRun {
    let setup = cfg.setup();
    let outcome = run_parking(&cfg.initial_state(), &setup);
    let rows = rows_from_outcome(&outcome, &setup.plant.params);
    ScenarioRun { config: cfg.clone(), outcome, rows }
}

/// Re-renders the charts for an existing log. The plot context comes from
/// the `metrics.json` next to the log when there is one.
pub fn plot_log(log: &Path, out: &Path) -> Result<(), SimError> {
    let rows = output::read_csv(log)?;
    let metrics = log.with_file_name("metrics.json");
    let ctx = if metrics.exists() {
        let text = std::fs::read_to_string(&metrics).map_err(|e| SimError::io(&metrics, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| SimError::Log(format!("{}: {e}", metrics.display())))?;
        let cfg: ScenarioConfig = serde_json::from_value(value["config"].clone())
            .map_err(|e| SimError::Log(format!("{}: config block: {e}", metrics.display())))?;
        PlotContext::from(&cfg)
    } else {
        PlotContext::default()
    };
    std::fs::create_dir_all(out).map_err(|e| SimError::io(out, e))?;
    plot::write_plots(&rows, &ctx, out)
}

#[derive(Debug, Clone, Serialize)]
pub struct IkSummary {
    pub name: String,
    pub max_error_rad: f64,
    pub tolerance_rad: f64,
    pub samples: usize,
    pub passed: bool,
}

pub fn run_ik(cfg: &IkConfig) -> Result<TrackingReport, SimError> {
    track_virtual_steer(&cfg.plant(), cfg.rear_speed, &cfg.profile(), cfg.sample_period)
        .map_err(|e| SimError::Scenario { name: cfg.name.clone(), reason: e.to_string() })
}

/// Writes `tracking.csv`, `tracking.json` and `tracking.svg` for an IK run.
pub fn write_ik(cfg: &IkConfig, report: &TrackingReport, dir: &Path) -> Result<IkSummary, SimError> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let path = dir.join("tracking.csv");
    let mut text = String::from("t,desired_delta_T,measured_delta_T,delta_f,hitch\n");
    for s in &report.samples {
        let _ = writeln!(text, "{},{},{},{},{}", s.t, s.desired, s.measured, s.steer, s.hitch);
    }
    std::fs::write(&path, text).map_err(|e| SimError::io(&path, e))?;
    let summary = IkSummary {
        name: cfg.name.clone(),
        max_error_rad: report.max_error,
        tolerance_rad: cfg.tolerance,
        samples: report.samples.len(),
        passed: report.max_error < cfg.tolerance,
    };
    output::write_json(&summary, &dir.join("tracking.json"))?;
    let path = dir.join("tracking.svg");
    std::fs::write(&path, plot::tracking_svg(report)).map_err(|e| SimError::io(&path, e))?;
    Ok(summary)
}

/// Scenario files (`*.toml`) of a directory in name order.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| SimError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads every scenario of `dir` and runs them on parallel threads. Results
/// come back in file-name order.
pub fn run_suite(dir: &Path, max_steps: Option<usize>) -> Result<Vec<ScenarioRun>, SimError> {
    let mut configs = Vec::new();
    for path in scenario_files(dir)? {
        let mut cfg = ScenarioConfig::load(&path)?;
        if let Some(n) = max_steps {
            cfg.set_max_steps(n);
        }
        configs.push(cfg);
    }
    let mut names: Vec<&str> = configs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(SimError::Config(format!("two scenarios named {:?} in {}", w[0], dir.display())));
    }
    Ok(std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|cfg| s.spawn(move || run_scenario(cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    }))
}

fn num(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.4e}")
    } else {
        format!("{v:.4}")
    }
}

fn cells(m: Option<&StageMetrics>) -> String {
    match m {
        Some(m) => format!(
            "{} | {} | {}",
            num(m.distance_error),
            num(m.orientation_error.to_degrees()),
            num(m.final_hitch.to_degrees())
        ),
        None => "- | - | -".into(),
    }
}

/// Markdown results table: one row per scenario, stage 1 and stage 3 side
/// by side.
pub fn summary_table(runs: &[ScenarioRun]) -> String {
    let mut md = String::from("# Suite results\n\n");
    md.push_str("| Scenario | Stage 1 distance [m] | Stage 1 orientation [deg] | Stage 1 hitch [deg] ");
    md.push_str("| Stage 3 distance [m] | Stage 3 orientation [deg] | Stage 3 hitch [deg] | Success |\n");
    md.push_str("|---|---|---|---|---|---|---|---|\n");
    for run in runs {
        let (first, last) = run.first_and_last_reverse();
        let status = match &run.outcome.error {
            Some(e) => format!("no ({e})"),
            None if run.outcome.success => "yes".into(),
            None => "no".into(),
        };
        let _ = writeln!(md, "| {} | {} | {} | {} |", run.config.name, cells(first), cells(last), status);
    }
    md
}
