//! Receding-horizon reverse planner.
//!
//! The planner optimises virtual trailer inputs over a short horizon using a
//! single-shooting transcription of the trailer-only model, then maps the
//! first planned input to tractor steer and speed. Steering bounds are
//! recomputed from the measured hitch angle at every control period so the
//! mapped tractor steer always stays inside its limits.

mod ocp;
pub mod solver;

use nalgebra::DVector;

pub use ocp::{
    compute_input_bounds, cost_and_gradient, mapped_steer_interval, pack, predict_step, rollout, trajectory_cost,
    unpack, InputBounds, OcpConfig, TrailerState,
};

use crate::error::{Error, Result};
use crate::kinematics::{virtual_to_actual_speed, virtual_to_actual_steer, VirtualInput};
use crate::model::{derive_poses, ControlInput, SystemState, VehicleTrailerParams};
use solver::BoxMinimizer;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Optimised inputs `U_0 .. U_{N-1}`.
    pub inputs: Vec<VirtualInput>,
    /// Predicted states `X_1 .. X_N`.
    pub predicted: Vec<TrailerState>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveResult {
    pub fn first(&self) -> VirtualInput {
        self.inputs[0]
    }

    /// The sequence advanced by one step with its last entry repeated.
    pub fn shifted(&self) -> Vec<VirtualInput> {
        let mut out: Vec<_> = self.inputs.iter().skip(1).copied().collect();
        out.push(*self.inputs.last().expect("non-empty horizon"));
        out
    }
}

/// Trailer pose of the plant state in the parking frame.
pub fn trailer_state(state: &SystemState, params: &VehicleTrailerParams) -> TrailerState {
    let p = derive_poses(state, params).trailer;
    TrailerState::new(p.0, p.1, state.trailer_yaw)
}

/// Solves the horizon problem from `x0` inside `bounds`.
///
/// Several deterministic starting sequences are tried (the warm start, rest,
/// and full reverse at the steer extremes) and the best local optimum wins,
/// so the returned cost never exceeds that of the warm start or of the
/// projected zero sequence.
pub fn solve_ocp(
    x0: &TrailerState,
    bounds: &InputBounds,
    cfg: &OcpConfig,
    params: &VehicleTrailerParams,
    warm_start: Option<&[VirtualInput]>,
) -> Result<SolveResult> {
    if bounds.speed_lo > bounds.speed_hi || bounds.steer_lo > bounds.steer_hi {
        return Err(Error::EmptyBounds { lo: bounds.steer_lo, hi: bounds.steer_hi });
    }
    if !(x0.x.is_finite() && x0.y.is_finite() && x0.yaw.is_finite()) {
        return Err(Error::NonFinite("trailer state"));
    }
    let n = cfg.horizon;
    let lo = DVector::from_iterator(2 * n, (0..n).flat_map(|_| [bounds.speed_lo, bounds.steer_lo]));
    let hi = DVector::from_iterator(2 * n, (0..n).flat_map(|_| [bounds.speed_hi, bounds.steer_hi]));

    let mut starts: Vec<Vec<VirtualInput>> = Vec::with_capacity(5);
    if let Some(w) = warm_start {
        if w.len() != n {
            return Err(Error::InvalidParameter(format!("warm start has {} entries, horizon is {n}", w.len())));
        }
        starts.push(w.to_vec());
    }
    starts.push(vec![VirtualInput::default(); n]);
    for steer in [0.0, bounds.steer_lo, bounds.steer_hi] {
        starts.push(vec![VirtualInput::new(bounds.speed_lo, steer); n]);
    }

    let minimizer = BoxMinimizer::new(cfg.grad_tol, cfg.max_iterations);
    let objective = |z: &DVector<f64>| {
        let (j, g) = cost_and_gradient(x0, z.as_slice(), cfg, params);
        (j, DVector::from_vec(g))
    };
    let mut best: Option<solver::Minimum> = None;
    for start in &starts {
        let z0 = DVector::from_vec(pack(start));
        let m = minimizer.minimize(objective, &z0, &lo, &hi);
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");

    let inputs = unpack(best.x.as_slice());
    let mut predicted = rollout(x0, &inputs, cfg.step, params);
    predicted.remove(0);
    Ok(SolveResult {
        cost: trajectory_cost(x0, &inputs, cfg, params),
        inputs,
        predicted,
        iterations: best.iterations,
        converged: best.converged,
    })
}

/// True once the planner chooses (numerically) zero trailer speed.
pub fn stage_terminated(result: &SolveResult, cfg: &OcpConfig) -> bool {
    result.first().speed.abs() < cfg.stop_speed
}

/// Output of one control period.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerStep {
    pub control: ControlInput,
    pub virtual_input: VirtualInput,
    pub bounds: InputBounds,
    pub result: SolveResult,
}

/// Plans from the plant state and maps the first virtual input to the tractor.
pub fn nmpc_step(
    state: &SystemState,
    cfg: &OcpConfig,
    params: &VehicleTrailerParams,
    warm: Option<&[VirtualInput]>,
) -> Result<PlannerStep> {
    let hitch = state.hitch_angle();
    let x0 = trailer_state(state, params);
    let bounds = compute_input_bounds(hitch, cfg, params)?;
    let result = solve_ocp(&x0, &bounds, cfg, params, warm)?;
    let u0 = result.first();
    let steer = virtual_to_actual_steer(u0.steer, hitch, params)?;
    // the bounds make this a no-op up to rounding
    let steer = steer.clamp(cfg.steer_limits.0, cfg.steer_limits.1);
    let speed = virtual_to_actual_speed(u0.speed, u0.steer, hitch);
    Ok(PlannerStep { control: ControlInput::new(speed, steer), virtual_input: u0, bounds, result })
}

/// Stateful planner that carries the warm start between control periods.
#[derive(Debug, Clone)]
pub struct Planner {
    pub cfg: OcpConfig,
    pub params: VehicleTrailerParams,
    warm: Option<Vec<VirtualInput>>,
}

impl Planner {
    pub fn new(cfg: OcpConfig, params: VehicleTrailerParams) -> Self {
        Self { cfg, params, warm: None }
    }

    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn step(&mut self, state: &SystemState) -> Result<PlannerStep> {
        let out = nmpc_step(state, &self.cfg, &self.params, self.warm.as_deref())?;
        self.warm = Some(out.result.shifted());
        Ok(out)
    }
}
