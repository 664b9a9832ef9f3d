//! Kinematic vehicle-trailer plant.
//!
//! The plant state is the tractor rear-axle pose plus the trailer yaw. Hitch,
//! front-axle and trailer-axle positions are derived from it algebraically, so
//! the rigid links never drift under integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric constants of the tractor and its trailer, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrailerParams {
    /// Tractor wheelbase.
    pub wheelbase: f64,
    /// Rear axle to hitch joint, positive behind the axle.
    pub hitch_offset: f64,
    /// Hitch joint to trailer axle.
    pub trailer_length: f64,
    /// Centre of gravity to front axle. Not used by the kinematic model.
    pub cg_to_front: f64,
    /// Centre of gravity to rear axle. Not used by the kinematic model.
    pub cg_to_rear: f64,
}

impl VehicleTrailerParams {
    /// Parameters with the centre of gravity placed mid-wheelbase.
    pub fn new(wheelbase: f64, hitch_offset: f64, trailer_length: f64) -> Self {
        Self { wheelbase, hitch_offset, trailer_length, cg_to_front: 0.5 * wheelbase, cg_to_rear: 0.5 * wheelbase }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("wheelbase", self.wheelbase),
            ("hitch_offset", self.hitch_offset),
            ("trailer_length", self.trailer_length),
        ];
        for (name, v) in checks {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.cg_to_front.is_finite() || !self.cg_to_rear.is_finite() {
            return Err(Error::NonFinite("cg offsets"));
        }
        Ok(())
    }
}

impl Default for VehicleTrailerParams {
    /// Mid-size passenger vehicle with a utility trailer.
    fn default() -> Self {
        Self::new(2.896, 1.159, 2.693)
    }
}

/// Full plant state. Angles are stored unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemState {
    /// Rear-axle centre, m.
    pub x: f64,
    pub y: f64,
    /// Tractor yaw, rad.
    pub yaw: f64,
    /// Trailer yaw, rad.
    pub trailer_yaw: f64,
}

impl SystemState {
    pub fn new(x: f64, y: f64, yaw: f64, trailer_yaw: f64) -> Self {
        Self { x, y, yaw, trailer_yaw }
    }

    /// Builds the state that puts the trailer axle at `(x, y)` with yaw
    /// `trailer_yaw` and the given hitch angle.
    pub fn from_trailer_pose(x: f64, y: f64, trailer_yaw: f64, hitch: f64, params: &VehicleTrailerParams) -> Self {
        let yaw = trailer_yaw + hitch;
        let hx = x + params.trailer_length * trailer_yaw.cos();
        let hy = y + params.trailer_length * trailer_yaw.sin();
        Self { x: hx + params.hitch_offset * yaw.cos(), y: hy + params.hitch_offset * yaw.sin(), yaw, trailer_yaw }
    }

    /// Tractor yaw minus trailer yaw.
    pub fn hitch_angle(&self) -> f64 {
        self.yaw - self.trailer_yaw
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite() && self.trailer_yaw.is_finite()
    }

    fn axpy(&self, h: f64, d: &StateRate) -> Self {
        Self {
            x: self.x + h * d.x,
            y: self.y + h * d.y,
            yaw: self.yaw + h * d.yaw,
            trailer_yaw: self.trailer_yaw + h * d.trailer_yaw,
        }
    }
}

/// Tractor command: signed rear-axle speed (negative reverses) and front-wheel steer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub speed: f64,
    pub steer: f64,
}

impl ControlInput {
    pub fn new(speed: f64, steer: f64) -> Self {
        Self { speed, steer }
    }
}

/// Time derivative of [`SystemState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateRate {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub trailer_yaw: f64,
}

/// Positions of the four key points of the combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSet {
    pub front: (f64, f64),
    pub rear: (f64, f64),
    pub hitch: (f64, f64),
    pub trailer: (f64, f64),
}

pub fn derive_poses(state: &SystemState, params: &VehicleTrailerParams) -> PoseSet {
    let (s1, c1) = state.yaw.sin_cos();
    let (s2, c2) = state.trailer_yaw.sin_cos();
    let rear = (state.x, state.y);
    let front = (state.x + params.wheelbase * c1, state.y + params.wheelbase * s1);
    let hitch = (state.x - params.hitch_offset * c1, state.y - params.hitch_offset * s1);
    let trailer = (hitch.0 - params.trailer_length * c2, hitch.1 - params.trailer_length * s2);
    PoseSet { front, rear, hitch, trailer }
}

/// Signed trailer-axle speed induced by the tractor command.
pub fn trailer_speed(state: &SystemState, u: &ControlInput, params: &VehicleTrailerParams) -> f64 {
    let (s, c) = state.hitch_angle().sin_cos();
    u.speed * (c + params.hitch_offset / params.wheelbase * s * u.steer.tan())
}

pub fn plant_derivative(state: &SystemState, u: &ControlInput, params: &VehicleTrailerParams) -> Result<StateRate> {
    if !state.is_finite() {
        return Err(Error::NonFinite("state"));
    }
    if !u.speed.is_finite() || !u.steer.is_finite() {
        return Err(Error::NonFinite("control input"));
    }
    if u.steer.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::InvalidParameter(format!("steer angle {} rad outside (-pi/2, pi/2)", u.steer)));
    }
    Ok(rate_unchecked(state, u, params))
}

fn rate_unchecked(state: &SystemState, u: &ControlInput, params: &VehicleTrailerParams) -> StateRate {
    let (s1, c1) = state.yaw.sin_cos();
    let (sh, ch) = state.hitch_angle().sin_cos();
    let tan_steer = u.steer.tan();
    StateRate {
        x: u.speed * c1,
        y: u.speed * s1,
        yaw: u.speed / params.wheelbase * tan_steer,
        trailer_yaw: u.speed / params.trailer_length * (sh - params.hitch_offset / params.wheelbase * ch * tan_steer),
    }
}

/// Trailer-axle velocity in the world frame.
///
/// Only used to cross-check the derived trailer pose; the trailer position is
/// never integrated directly.
pub fn trailer_velocity(state: &SystemState, u: &ControlInput, params: &VehicleTrailerParams) -> (f64, f64) {
    let v = trailer_speed(state, u, params);
    let (s2, c2) = state.trailer_yaw.sin_cos();
    (v * c2, v * s2)
}

/// One classic RK4 step of `f` over `h`.
pub fn rk4_step<F>(state: &SystemState, h: f64, mut f: F) -> Result<SystemState>
where
    F: FnMut(&SystemState) -> Result<StateRate>,
{
    let k1 = f(state)?;
    let k2 = f(&state.axpy(0.5 * h, &k1))?;
    let k3 = f(&state.axpy(0.5 * h, &k2))?;
    let k4 = f(&state.axpy(h, &k3))?;
    Ok(SystemState {
        x: state.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        y: state.y + h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
        yaw: state.yaw + h / 6.0 * (k1.yaw + 2.0 * k2.yaw + 2.0 * k3.yaw + k4.yaw),
        trailer_yaw: state.trailer_yaw
            + h / 6.0 * (k1.trailer_yaw + 2.0 * k2.trailer_yaw + 2.0 * k3.trailer_yaw + k4.trailer_yaw),
    })
}

/// Plant propagation settings: geometry, RK4 substeps per call and the
/// jackknife guard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub params: VehicleTrailerParams,
    pub substeps: usize,
    /// Largest admissible |hitch angle|, rad.
    pub jackknife_limit: f64,
}

impl Plant {
    pub const DEFAULT_SUBSTEPS: usize = 10;
    pub const DEFAULT_JACKKNIFE_LIMIT_DEG: f64 = 75.0;

    pub fn new(params: VehicleTrailerParams) -> Self {
        Self {
            params,
            substeps: Self::DEFAULT_SUBSTEPS,
            jackknife_limit: Self::DEFAULT_JACKKNIFE_LIMIT_DEG.to_radians(),
        }
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    pub fn check_guard(&self, state: &SystemState) -> Result<()> {
        let hitch = state.hitch_angle();
        if !hitch.is_finite() {
            return Err(Error::NonFinite("hitch angle"));
        }
        if hitch.abs() > self.jackknife_limit {
            return Err(Error::Jackknife { state: *state, hitch, limit: self.jackknife_limit });
        }
        Ok(())
    }

    /// Holds `u` for `dt` seconds.
    pub fn integrate(&self, state: &SystemState, u: &ControlInput, dt: f64) -> Result<SystemState> {
        let u = *u;
        let params = self.params;
        self.integrate_with(state, dt, move |_| Ok(u), &params)
    }

    /// Integrates with a state-feedback law evaluated at every RK4 stage.
    pub fn integrate_with<C>(
        &self,
        state: &SystemState,
        dt: f64,
        mut control: C,
        params: &VehicleTrailerParams,
    ) -> Result<SystemState>
    where
        C: FnMut(&SystemState) -> Result<ControlInput>,
    {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidParameter("substeps must be at least 1".into()));
        }
        let h = dt / self.substeps as f64;
        let mut s = *state;
        for _ in 0..self.substeps {
            s = rk4_step(&s, h, |x| plant_derivative(x, &control(x)?, params))?;
            self.check_guard(&s)?;
        }
        Ok(s)
    }
}
