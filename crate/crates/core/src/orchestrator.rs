//! Staged parking flow: NMPC reverse, optional pure-pursuit forward leg,
//! NMPC reverse again.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{measured_virtual_steer, VirtualInput};
use crate::model::{derive_poses, trailer_speed, ControlInput, Plant, SystemState, VehicleTrailerParams};
use crate::nmpc::{stage_terminated, OcpConfig, Planner};
use crate::pursuit::{forward_terminated, pursuit_steer, ForwardConfig, ForwardPath};
use crate::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Reverse,
    Forward,
}

/// One control period of the closed loop. `control` is held from `t` to
/// `t + dt` starting at `state`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    /// 1-based stage index.
    pub stage: usize,
    pub state: SystemState,
    pub control: ControlInput,
    pub virtual_input: VirtualInput,
    /// Optimal horizon cost; NaN on forward stages.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub stage: usize,
    pub kind: Stage,
    /// Distance of the trailer axle from the goal, m.
    pub distance_error: f64,
    /// Wrapped trailer yaw, rad.
    pub orientation_error: f64,
    /// Hitch angle at stage end, rad.
    pub final_hitch: f64,
    pub steps: usize,
    /// Wall-clock time spent in the stage, s. Not serialised so that metrics
    /// files stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl StageMetrics {
    fn measure(
        stage: usize,
        kind: Stage,
        state: &SystemState,
        params: &VehicleTrailerParams,
        steps: usize,
        wall_time: f64,
    ) -> Self {
        let trailer = derive_poses(state, params).trailer;
        Self {
            stage,
            kind,
            distance_error: trailer.0.hypot(trailer.1),
            orientation_error: wrap_angle(state.trailer_yaw),
            final_hitch: wrap_angle(state.hitch_angle()),
            steps,
            wall_time,
        }
    }
}

/// Stage-1 results inside these limits skip the repositioning cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceThresholds {
    pub max_distance: f64,
    pub max_orientation: f64,
    pub max_hitch: f64,
}

impl Default for AcceptanceThresholds {
    fn default() -> Self {
        Self { max_distance: 0.05, max_orientation: 1f64.to_radians(), max_hitch: 5f64.to_radians() }
    }
}

impl AcceptanceThresholds {
    pub fn accepts(&self, m: &StageMetrics) -> bool {
        m.distance_error <= self.max_distance
            && m.orientation_error.abs() <= self.max_orientation
            && m.final_hitch.abs() <= self.max_hitch
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.max_distance, self.max_orientation, self.max_hitch] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("acceptance thresholds must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Everything the closed loop needs besides the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParkingSetup {
    pub plant: Plant,
    pub ocp: OcpConfig,
    pub forward: ForwardConfig,
    pub path: ForwardPath,
    pub thresholds: AcceptanceThresholds,
    /// Forward/reverse repositioning cycles allowed after stage 1.
    pub max_cycles: usize,
}

impl ParkingSetup {
    pub fn new(params: VehicleTrailerParams) -> Self {
        Self {
            plant: Plant::new(params),
            ocp: OcpConfig::default(),
            forward: ForwardConfig::default(),
            path: ForwardPath::default(),
            thresholds: AcceptanceThresholds::default(),
            max_cycles: 1,
        }
    }

    pub fn params(&self) -> &VehicleTrailerParams {
        &self.plant.params
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.params.validate()?;
        if self.plant.substeps == 0 || !(self.plant.jackknife_limit > 0.0) {
            return Err(Error::InvalidParameter("plant substeps and jackknife limit must be positive".into()));
        }
        self.ocp.validate()?;
        self.forward.validate()?;
        self.thresholds.validate()?;
        let (dx, dy) = self.path.direction;
        if ((dx * dx + dy * dy).sqrt() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("forward path direction must be a unit vector".into()));
        }
        if self.max_cycles == 0 {
            return Err(Error::InvalidParameter("at least one repositioning cycle is required".into()));
        }
        Ok(())
    }
}

/// Result of a single stage. `error` is set when the stage aborted; the
/// metrics then describe the last state reached.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRun {
    pub final_state: SystemState,
    pub metrics: StageMetrics,
    pub log: Vec<LogRow>,
    pub error: Option<Error>,
}

struct Clock {
    dt: f64,
    tick: usize,
}

impl Clock {
    fn now(&self) -> f64 {
        self.tick as f64 * self.dt
    }
}

fn finish(
    stage: usize,
    kind: Stage,
    state: SystemState,
    log: Vec<LogRow>,
    error: Option<Error>,
    setup: &ParkingSetup,
    started: Instant,
) -> StageRun {
    let metrics =
        StageMetrics::measure(stage, kind, &state, setup.params(), log.len(), started.elapsed().as_secs_f64());
    StageRun { final_state: state, metrics, log, error }
}

fn reverse_stage(start: &SystemState, setup: &ParkingSetup, stage: usize, clock: &mut Clock) -> StageRun {
    let started = Instant::now();
    let mut planner = Planner::new(setup.ocp.clone(), setup.plant.params);
    let mut state = *start;
    let mut log = Vec::new();
    let dt = setup.ocp.step;
    for _ in 0..setup.ocp.max_steps {
        let out = match planner.step(&state) {
            Ok(o) => o,
            Err(e) => return finish(stage, Stage::Reverse, state, log, Some(e), setup, started),
        };
        let stop = stage_terminated(&out.result, &setup.ocp);
        let control = if stop { ControlInput::new(0.0, out.control.steer) } else { out.control };
        log.push(LogRow {
            t: clock.now(),
            stage,
            state,
            control,
            virtual_input: out.virtual_input,
            cost: out.result.cost,
        });
        clock.tick += 1;
        if stop {
            return finish(stage, Stage::Reverse, state, log, None, setup, started);
        }
        match setup.plant.integrate(&state, &control, dt) {
            Ok(s) => state = s,
            Err(e) => return finish(stage, Stage::Reverse, state, log, Some(e), setup, started),
        }
    }
    let err = Error::StepCap { stage: "reverse", cap: setup.ocp.max_steps };
    finish(stage, Stage::Reverse, state, log, Some(err), setup, started)
}

fn forward_stage(start: &SystemState, setup: &ParkingSetup, stage: usize, clock: &mut Clock) -> StageRun {
    let started = Instant::now();
    let params = setup.plant.params;
    let mut state = *start;
    let mut log = Vec::new();
    let dt = setup.ocp.step;
    if forward_terminated(&state, &setup.forward, &params) {
        return finish(stage, Stage::Forward, state, log, None, setup, started);
    }
    for _ in 0..setup.forward.max_steps {
        let steer = pursuit_steer(&state, &setup.path, &setup.forward, &params, setup.ocp.steer_limits);
        let control = ControlInput::new(setup.forward.speed, steer);
        let realised = VirtualInput::new(
            trailer_speed(&state, &control, &params),
            measured_virtual_steer(&state, &control, &params).unwrap_or(0.0),
        );
        log.push(LogRow { t: clock.now(), stage, state, control, virtual_input: realised, cost: f64::NAN });
        clock.tick += 1;
        match setup.plant.integrate(&state, &control, dt) {
            Ok(s) => state = s,
            Err(e) => return finish(stage, Stage::Forward, state, log, Some(e), setup, started),
        }
        if forward_terminated(&state, &setup.forward, &params) {
            return finish(stage, Stage::Forward, state, log, None, setup, started);
        }
    }
    let err = Error::StepCap { stage: "forward", cap: setup.forward.max_steps };
    finish(stage, Stage::Forward, state, log, Some(err), setup, started)
}

/// Runs one NMPC reverse stage from `start` with the log clock at zero.
pub fn run_stage_reverse(start: &SystemState, setup: &ParkingSetup) -> StageRun {
    reverse_stage(start, setup, 1, &mut Clock { dt: setup.ocp.step, tick: 0 })
}

/// Runs one pure-pursuit forward stage from `start` with the log clock at zero.
pub fn run_stage_forward(start: &SystemState, setup: &ParkingSetup) -> StageRun {
    forward_stage(start, setup, 1, &mut Clock { dt: setup.ocp.step, tick: 0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParkingOutcome {
    pub initial_state: SystemState,
    pub final_state: SystemState,
    pub stages: Vec<StageMetrics>,
    pub repositioned: bool,
    pub log: Vec<LogRow>,
    pub success: bool,
    pub error: Option<Error>,
}

impl ParkingOutcome {
    /// Metrics of the last reverse stage.
    pub fn final_metrics(&self) -> Option<&StageMetrics> {
        self.stages.iter().rev().find(|m| m.kind == Stage::Reverse)
    }
}

/// Full flow: reverse; if the result is not acceptable, forward then
/// reverse, up to `max_cycles` times.
pub fn run_parking(initial: &SystemState, setup: &ParkingSetup) -> ParkingOutcome {
    let mut outcome = ParkingOutcome {
        initial_state: *initial,
        final_state: *initial,
        stages: Vec::new(),
        repositioned: false,
        log: Vec::new(),
        success: false,
        error: None,
    };
    if let Err(e) = setup.validate().and_then(|_| setup.plant.check_guard(initial)) {
        outcome.error = Some(e);
        return outcome;
    }

    let mut clock = Clock { dt: setup.ocp.step, tick: 0 };
    let absorb = |outcome: &mut ParkingOutcome, run: StageRun| -> bool {
        outcome.final_state = run.final_state;
        outcome.stages.push(run.metrics);
        outcome.log.extend(run.log);
        if let Some(e) = run.error {
            outcome.error = Some(e);
            return false;
        }
        true
    };

    let run = reverse_stage(initial, setup, 1, &mut clock);
    let mut accepted = setup.thresholds.accepts(&run.metrics);
    if !absorb(&mut outcome, run) {
        return outcome;
    }
    let mut stage = 1;
    for _ in 0..setup.max_cycles {
        if accepted {
            break;
        }
        outcome.repositioned = true;
        stage += 1;
        let run = forward_stage(&outcome.final_state, setup, stage, &mut clock);
        if !absorb(&mut outcome, run) {
            return outcome;
        }
        stage += 1;
        let run = reverse_stage(&outcome.final_state, setup, stage, &mut clock);
        accepted = setup.thresholds.accepts(&run.metrics);
        if !absorb(&mut outcome, run) {
            return outcome;
        }
    }
    outcome.success = accepted;
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_goal_stops_immediately() {
        let p = VehicleTrailerParams::default();
        let setup = ParkingSetup::new(p);
        let s = SystemState::from_trailer_pose(0.0, 0.0, 0.0, 0.0, &p);
        let run = run_stage_reverse(&s, &setup);
        assert!(run.error.is_none());
        assert_eq!(run.log.len(), 1);
        assert!(run.metrics.distance_error < 1e-6);

        let outcome = run_parking(&s, &setup);
        assert!(outcome.success);
        assert!(!outcome.repositioned);
        assert_eq!(outcome.stages.len(), 1);
    }

    #[test]
    fn forward_stage_noop_when_already_out() {
        let p = VehicleTrailerParams::default();
        let setup = ParkingSetup::new(p);
        let s = SystemState::from_trailer_pose(12.0, 0.0, 0.0, 0.0, &p);
        let run = run_stage_forward(&s, &setup);
        assert!(run.error.is_none());
        assert_eq!(run.metrics.steps, 0);
        assert_eq!(run.final_state, s);
    }

    #[test]
    fn jackknifed_start_is_rejected() {
        let p = VehicleTrailerParams::default();
        let s = SystemState::from_trailer_pose(5.0, 1.0, 0.0, 80f64.to_radians(), &p);
        let outcome = run_parking(&s, &ParkingSetup::new(p));
        assert!(!outcome.success);
        assert!(matches!(outcome.error, Some(Error::Jackknife { .. })));
        assert!(outcome.log.is_empty());
    }

    #[test]
    fn thresholds_accept() {
        let t = AcceptanceThresholds::default();
        let m = |d: f64, o: f64, h: f64| StageMetrics {
            stage: 1,
            kind: Stage::Reverse,
            distance_error: d,
            orientation_error: o.to_radians(),
            final_hitch: h.to_radians(),
            steps: 1,
            wall_time: 0.0,
        };
        assert!(t.accepts(&m(0.01, 0.5, 3.0)));
        assert!(!t.accepts(&m(0.06, 0.5, 3.0)));
        assert!(!t.accepts(&m(0.01, -1.5, 3.0)));
        assert!(!t.accepts(&m(0.01, 0.5, -6.0)));
    }
}
