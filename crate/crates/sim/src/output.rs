//! Trajectory CSV and metrics JSON.
//!
//! The CSV stores SI units with angles in radians. Floats are written in
//! their shortest round-trip form, so reading a log back gives the exact
//! values that were simulated.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use trailer_core::model::derive_poses;
use trailer_core::{ParkingOutcome, Stage, StageMetrics, VehicleTrailerParams};

use crate::config::ScenarioConfig;
use crate::SimError;

pub const CSV_HEADER: [&str; 13] =
    ["t", "X_R", "Y_R", "psi_1", "psi_2", "X_T", "Y_T", "delta_f", "V_R", "delta_T", "V_T", "ocp_cost", "stage"];

/// One line of `trajectory.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x_r: f64,
    pub y_r: f64,
    pub psi_1: f64,
    pub psi_2: f64,
    pub x_t: f64,
    pub y_t: f64,
    pub delta_f: f64,
    pub v_r: f64,
    pub delta_t: f64,
    pub v_t: f64,
    /// NaN on forward rows.
    pub ocp_cost: f64,
    pub stage: usize,
}

impl TrajectoryRow {
    fn fields(&self) -> [f64; 12] {
        [
            self.t,
            self.x_r,
            self.y_r,
            self.psi_1,
            self.psi_2,
            self.x_t,
            self.y_t,
            self.delta_f,
            self.v_r,
            self.delta_t,
            self.v_t,
            self.ocp_cost,
        ]
    }

    pub fn hitch(&self) -> f64 {
        self.psi_1 - self.psi_2
    }

    pub fn is_reverse(&self) -> bool {
        !self.ocp_cost.is_nan()
    }
}

pub fn rows_from_outcome(outcome: &ParkingOutcome, params: &VehicleTrailerParams) -> Vec<TrajectoryRow> {
    outcome
        .log
        .iter()
        .map(|r| {
            let trailer = derive_poses(&r.state, params).trailer;
            TrajectoryRow {
                t: r.t,
                x_r: r.state.x,
                y_r: r.state.y,
                psi_1: r.state.yaw,
                psi_2: r.state.trailer_yaw,
                x_t: trailer.0,
                y_t: trailer.1,
                delta_f: r.control.steer,
                v_r: r.control.speed,
                delta_t: r.virtual_input.steer,
                v_t: r.virtual_input.speed,
                ocp_cost: r.cost,
                stage: r.stage,
            }
        })
        .collect()
}

pub fn write_csv(rows: &[TrajectoryRow], path: &Path) -> Result<(), SimError> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io = |e: csv::Error| SimError::io(path, e.into());
    w.write_record(CSV_HEADER).map_err(io)?;
    for row in rows {
        let mut rec: Vec<String> = row.fields().iter().map(|v| v.to_string()).collect();
        rec.push(row.stage.to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| SimError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<TrajectoryRow>, SimError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| SimError::io(path, e.into()))?;
    let bad = |msg: String| SimError::Log(format!("{}: {msg}", path.display()));
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |k: usize| -> Result<f64, SimError> {
            rec[k].parse().map_err(|_| bad(format!("line {}: bad number {:?}", i + 2, &rec[k])))
        };
        rows.push(TrajectoryRow {
            t: num(0)?,
            x_r: num(1)?,
            y_r: num(2)?,
            psi_1: num(3)?,
            psi_2: num(4)?,
            x_t: num(5)?,
            y_t: num(6)?,
            delta_f: num(7)?,
            v_r: num(8)?,
            delta_t: num(9)?,
            v_t: num(10)?,
            ocp_cost: num(11)?,
            stage: rec[12].parse().map_err(|_| bad(format!("line {}: bad stage {:?}", i + 2, &rec[12])))?,
        });
    }
    Ok(rows)
}

/// Per-stage block of `metrics.json`, in the units of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: usize,
    pub kind: Stage,
    pub distance_error_m: f64,
    pub orientation_error_deg: f64,
    pub final_hitch_deg: f64,
    pub steps: usize,
}

impl From<&StageMetrics> for StageReport {
    fn from(m: &StageMetrics) -> Self {
        Self {
            stage: m.stage,
            kind: m.kind,
            distance_error_m: m.distance_error,
            orientation_error_deg: m.orientation_error.to_degrees(),
            final_hitch_deg: m.final_hitch.to_degrees(),
            steps: m.steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub success: bool,
    pub repositioned: bool,
    pub error: Option<String>,
    pub stages: Vec<StageReport>,
    /// The fully resolved scenario, defaults included.
    pub config: ScenarioConfig,
}

impl MetricsReport {
    pub fn new(cfg: &ScenarioConfig, outcome: &ParkingOutcome) -> Self {
        Self {
            scenario: cfg.name.clone(),
            success: outcome.success,
            repositioned: outcome.repositioned,
            error: outcome.error.as_ref().map(|e| e.to_string()),
            stages: outcome.stages.iter().map(StageReport::from).collect(),
            config: cfg.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), SimError> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| SimError::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| SimError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use trailer_core::orchestrator::run_parking;
    use trailer_core::{ParkingSetup, SystemState};

    #[test]
    fn goal_start_logs_one_row_and_round_trips() {
        let p = VehicleTrailerParams::default();
        let out = run_parking(&SystemState::from_trailer_pose(0.0, 0.0, 0.0, 0.0, &p), &ParkingSetup::new(p));
        let rows = rows_from_outcome(&out, &p);
        assert_eq!(rows.len(), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectory.csv");
        write_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "t,X_R,Y_R,psi_1,psi_2,X_T,Y_T,delta_f,V_R,delta_T,V_T,ocp_cost,stage"
        );
        assert_eq!(text.lines().count(), 2);
        assert_eq!(read_csv(&path).unwrap(), rows);
    }

    #[test]
    fn floats_round_trip_exactly() {
        let row = TrajectoryRow {
            t: 0.30000000000000004,
            x_r: 1.0 / 3.0,
            y_r: -1e-300,
            psi_1: std::f64::consts::PI,
            psi_2: -0.0,
            x_t: 1e22,
            y_t: 5e-324,
            delta_f: 0.75,
            v_r: -1.035276180410083,
            delta_t: 0.1,
            v_t: -1.0,
            ocp_cost: f64::NAN,
            stage: 2,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&[row], &path).unwrap();
        let back = read_csv(&path).unwrap()[0];
        assert_eq!(back.fields().map(f64::to_bits), row.fields().map(f64::to_bits));
        assert_eq!(back.stage, 2);
    }

    #[test]
    fn bad_header_is_a_log_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_csv(&path), Err(SimError::Log(_))));
    }
}
