//! Optimal control problem over the trailer-only model.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::{actual_to_virtual_steer, steer_map_denominator, VirtualInput, SINGULAR_TOL};
use crate::model::VehicleTrailerParams;

/// Trailer-axle pose in the parking frame. The goal is the origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrailerState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl TrailerState {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw }
    }

    fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.yaw)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpConfig {
    /// Prediction step, s. Also the control period.
    pub step: f64,
    pub horizon: usize,
    pub state_weight: Matrix3<f64>,
    pub terminal_weight: Matrix3<f64>,
    /// Weight on (speed, virtual steer). Positive semidefinite.
    pub input_weight: Matrix2<f64>,
    /// Trailer-axle speed bounds, m/s.
    pub speed_bounds: (f64, f64),
    /// Static virtual steer limits, rad.
    pub virtual_steer_limits: (f64, f64),
    /// Tractor front-wheel steer limits, rad.
    pub steer_limits: (f64, f64),
    /// Projected-gradient infinity norm at which a solve counts as converged.
    pub grad_tol: f64,
    pub max_iterations: usize,
    /// A stage ends once |first planned trailer speed| drops below this, m/s.
    pub stop_speed: f64,
    /// Closed-loop step cap per reverse stage.
    pub max_steps: usize,
}

impl Default for OcpConfig {
    fn default() -> Self {
        let q = Matrix3::from_diagonal(&Vector3::new(1.0, 10.0, 10.0));
        Self {
            step: 0.1,
            horizon: 10,
            state_weight: q,
            terminal_weight: q,
            input_weight: Matrix2::from_diagonal(&Vector2::new(0.0, 0.1)),
            speed_bounds: (-1.0, 0.0),
            virtual_steer_limits: (-0.5, 0.5),
            steer_limits: (-0.75, 0.75),
            grad_tol: 1e-9,
            max_iterations: 300,
            stop_speed: 1e-3,
            max_steps: 1200,
        }
    }
}

fn is_symmetric<const D: usize>(m: &nalgebra::SMatrix<f64, D, D>) -> bool {
    (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0)
}

impl OcpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return bad(format!("prediction step must be positive, got {}", self.step));
        }
        for (name, m) in [("state weight", &self.state_weight), ("terminal weight", &self.terminal_weight)] {
            if !is_symmetric(m) || m.cholesky().is_none() {
                return bad(format!("{name} must be symmetric positive definite"));
            }
        }
        let r = &self.input_weight;
        if !is_symmetric(r) || r.symmetric_eigenvalues().min() < -1e-12 {
            return bad("input weight must be symmetric positive semidefinite".into());
        }
        let (vlo, vhi) = self.speed_bounds;
        if !(vlo <= vhi) {
            return bad(format!("speed bounds [{vlo}, {vhi}] are empty"));
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        for (name, (lo, hi)) in [("virtual steer", self.virtual_steer_limits), ("steer", self.steer_limits)] {
            if !(lo <= hi) || lo <= -half_pi || hi >= half_pi {
                return bad(format!("{name} limits [{lo}, {hi}] must be ordered and inside (-pi/2, pi/2)"));
            }
        }
        if !(self.grad_tol > 0.0) || self.max_iterations == 0 {
            return bad("solver tolerance and iteration cap must be positive".into());
        }
        if !(self.stop_speed >= 0.0) || self.max_steps == 0 {
            return bad("stop speed must be non-negative and step cap positive".into());
        }
        Ok(())
    }
}

/// Per-step box on the virtual inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputBounds {
    pub speed_lo: f64,
    pub speed_hi: f64,
    pub steer_lo: f64,
    pub steer_hi: f64,
}

impl InputBounds {
    pub fn contains(&self, v: &VirtualInput) -> bool {
        v.speed >= self.speed_lo && v.speed <= self.speed_hi && v.steer >= self.steer_lo && v.steer <= self.steer_hi
    }

    pub fn clamp(&self, v: &VirtualInput) -> VirtualInput {
        VirtualInput::new(v.speed.clamp(self.speed_lo, self.speed_hi), v.steer.clamp(self.steer_lo, self.steer_hi))
    }
}

/// Image of the tractor steer range under the tractor-to-virtual steer map at
/// the given hitch angle, sorted ascending.
pub fn mapped_steer_interval(hitch: f64, cfg: &OcpConfig, params: &VehicleTrailerParams) -> Result<(f64, f64)> {
    let (lo, hi) = cfg.steer_limits;
    for steer in [lo, hi] {
        // the denominator is monotone in tan(steer), so checking both ends covers the range
        let den = steer_map_denominator(steer, hitch, params);
        if den < SINGULAR_TOL {
            return Err(Error::SingularSteering { hitch, denominator: den });
        }
    }
    let a = actual_to_virtual_steer(lo, hitch, params)?;
    let b = actual_to_virtual_steer(hi, hitch, params)?;
    Ok((a.min(b), a.max(b)))
}

/// Virtual input box at the current hitch angle: the mapped tractor steer
/// range intersected with the static virtual limits.
pub fn compute_input_bounds(hitch: f64, cfg: &OcpConfig, params: &VehicleTrailerParams) -> Result<InputBounds> {
    let (mapped_lo, mapped_hi) = mapped_steer_interval(hitch, cfg, params)?;
    let lo = mapped_lo.max(cfg.virtual_steer_limits.0);
    let hi = mapped_hi.min(cfg.virtual_steer_limits.1);
    if lo > hi {
        return Err(Error::EmptyBounds { lo, hi });
    }
    Ok(InputBounds { speed_lo: cfg.speed_bounds.0, speed_hi: cfg.speed_bounds.1, steer_lo: lo, steer_hi: hi })
}

/// One forward-Euler step of the trailer model.
pub fn predict_step(x: &TrailerState, u: &VirtualInput, dt: f64, params: &VehicleTrailerParams) -> TrailerState {
    let (s, c) = x.yaw.sin_cos();
    TrailerState {
        x: x.x + dt * (u.speed * c),
        y: x.y + dt * (u.speed * s),
        yaw: x.yaw + dt * (u.speed / params.trailer_length * u.steer.tan()),
    }
}

/// States `X_0 .. X_N` visited by `inputs` from `x0`.
pub fn rollout(
    x0: &TrailerState,
    inputs: &[VirtualInput],
    dt: f64,
    params: &VehicleTrailerParams,
) -> Vec<TrailerState> {
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(*x0);
    let mut x = *x0;
    for u in inputs {
        x = predict_step(&x, u, dt, params);
        states.push(x);
    }
    states
}

fn quad3(m: &Matrix3<f64>, x: &TrailerState) -> f64 {
    let v = x.as_vector();
    v.dot(&(m * v))
}

fn quad2(m: &Matrix2<f64>, u: &VirtualInput) -> f64 {
    let v = Vector2::new(u.speed, u.steer);
    v.dot(&(m * v))
}

/// Quadratic horizon cost, including the constant stage term of `x0`.
pub fn trajectory_cost(
    x0: &TrailerState,
    inputs: &[VirtualInput],
    cfg: &OcpConfig,
    params: &VehicleTrailerParams,
) -> f64 {
    summed_cost(&rollout(x0, inputs, cfg.step, params), inputs, cfg)
}

// one summation order for every caller, so costs compare bit-exactly
fn summed_cost(states: &[TrailerState], inputs: &[VirtualInput], cfg: &OcpConfig) -> f64 {
    let running: f64 =
        inputs.iter().zip(states).map(|(u, x)| quad3(&cfg.state_weight, x) + quad2(&cfg.input_weight, u)).sum();
    running + quad3(&cfg.terminal_weight, &states[inputs.len()])
}

/// Unpacks a decision vector `[V_0, d_0, V_1, d_1, ...]`.
pub fn unpack(z: &[f64]) -> Vec<VirtualInput> {
    z.chunks_exact(2).map(|c| VirtualInput::new(c[0], c[1])).collect()
}

pub fn pack(inputs: &[VirtualInput]) -> Vec<f64> {
    inputs.iter().flat_map(|u| [u.speed, u.steer]).collect()
}

/// Cost and its gradient with respect to the packed decision vector,
/// accumulated backwards through the rollout.
pub fn cost_and_gradient(
    x0: &TrailerState,
    z: &[f64],
    cfg: &OcpConfig,
    params: &VehicleTrailerParams,
) -> (f64, Vec<f64>) {
    let inputs = unpack(z);
    let n = inputs.len();
    let dt = cfg.step;
    let states = rollout(x0, &inputs, dt, params);

    let q_sym = cfg.state_weight + cfg.state_weight.transpose();
    let p_sym = cfg.terminal_weight + cfg.terminal_weight.transpose();
    let r_sym = cfg.input_weight + cfg.input_weight.transpose();

    let mut lambda = p_sym * states[n].as_vector();
    let mut grad = vec![0.0; 2 * n];
    for k in (0..n).rev() {
        let x = &states[k];
        let u = &inputs[k];

        let (s, c) = x.yaw.sin_cos();
        let t = u.steer.tan();
        let ru = r_sym * Vector2::new(u.speed, u.steer);
        // d x_{k+1} / d u_k
        let dv = Vector3::new(c, s, t / params.trailer_length) * dt;
        let dd = Vector3::new(0.0, 0.0, u.speed * (1.0 + t * t) / params.trailer_length) * dt;
        grad[2 * k] = ru[0] + dv.dot(&lambda);
        grad[2 * k + 1] = ru[1] + dd.dot(&lambda);

        // d x_{k+1} / d x_k = I + dt * [0 0 -V s; 0 0 V c; 0 0 0]
        let dyaw = lambda[2] + dt * u.speed * (-s * lambda[0] + c * lambda[1]);
        lambda = q_sym * x.as_vector() + Vector3::new(lambda[0], lambda[1], dyaw);
    }
    (summed_cost(&states, &inputs, cfg), grad)
}
