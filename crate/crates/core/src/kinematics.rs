//! Virtual trailer steering.
//!
//! The trailer is treated as a standalone vehicle with a steerable axle at the
//! hitch. Its virtual inputs (trailer-axle speed and hitch steer angle) map to
//! the tractor's rear-axle speed and front-wheel steer through the functions
//! here, and [`track_virtual_steer`] checks the mapping in closed loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{plant_derivative, trailer_speed, ControlInput, Plant, SystemState, VehicleTrailerParams};

/// Denominators below this magnitude are treated as singular.
pub const SINGULAR_TOL: f64 = 1e-9;

/// Trailer-side input: signed axle speed and virtual steer at the hitch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VirtualInput {
    pub speed: f64,
    pub steer: f64,
}

impl VirtualInput {
    pub fn new(speed: f64, steer: f64) -> Self {
        Self { speed, steer }
    }
}

/// Tractor front-wheel steer that realises the virtual steer `virtual_steer`
/// at hitch angle `hitch`.
pub fn virtual_to_actual_steer(virtual_steer: f64, hitch: f64, params: &VehicleTrailerParams) -> Result<f64> {
    let (s, c) = hitch.sin_cos();
    let t = virtual_steer.tan();
    let den = c + s * t;
    if den.abs() < SINGULAR_TOL {
        return Err(Error::SingularSteering { hitch, denominator: den });
    }
    Ok((params.wheelbase / params.hitch_offset * (s - c * t) / den).atan())
}

/// Virtual steer produced by the tractor steer `steer` at hitch angle `hitch`.
pub fn actual_to_virtual_steer(steer: f64, hitch: f64, params: &VehicleTrailerParams) -> Result<f64> {
    let (s, c) = hitch.sin_cos();
    let t = steer.tan();
    let den = params.wheelbase * c + params.hitch_offset * s * t;
    if den.abs() < SINGULAR_TOL {
        return Err(Error::SingularSteering { hitch, denominator: den });
    }
    Ok(((params.wheelbase * s - params.hitch_offset * c * t) / den).atan())
}

/// Denominator of [`actual_to_virtual_steer`]. Its sign is the sign of
/// `V_T / V_R`.
pub(crate) fn steer_map_denominator(steer: f64, hitch: f64, params: &VehicleTrailerParams) -> f64 {
    let (s, c) = hitch.sin_cos();
    params.wheelbase * c + params.hitch_offset * s * steer.tan()
}

/// Rear-axle speed that drives the trailer axle at `trailer_speed`.
pub fn virtual_to_actual_speed(trailer_speed: f64, virtual_steer: f64, hitch: f64) -> f64 {
    let (s, c) = hitch.sin_cos();
    trailer_speed * (c + s * virtual_steer.tan())
}

/// Trailer-axle speed for a given rear-axle speed, from the virtual side.
pub fn actual_to_virtual_speed(rear_speed: f64, virtual_steer: f64, hitch: f64) -> Result<f64> {
    let (s, c) = hitch.sin_cos();
    let den = c + s * virtual_steer.tan();
    if den.abs() < SINGULAR_TOL {
        return Err(Error::SingularSteering { hitch, denominator: den });
    }
    Ok(rear_speed / den)
}

/// Yaw rates `(trailer, tractor)` implied by a virtual input.
pub fn desired_yaw_rates(v: &VirtualInput, hitch: f64, params: &VehicleTrailerParams) -> (f64, f64) {
    let (s, c) = hitch.sin_cos();
    let t = v.steer.tan();
    let trailer = v.speed / params.trailer_length * t;
    let tractor = v.speed / params.hitch_offset * (s - c * t);
    (trailer, tractor)
}

/// Virtual steer actually realised by the plant: the angle between the hitch
/// velocity and the trailer axis.
pub fn measured_virtual_steer(state: &SystemState, u: &ControlInput, params: &VehicleTrailerParams) -> Result<f64> {
    let rate = plant_derivative(state, u, params)?;
    // hitch velocity in the trailer frame: longitudinal V_T, lateral L_T * yaw rate
    let lon = trailer_speed(state, u, params);
    let lat = params.trailer_length * rate.trailer_yaw;
    if lon.hypot(lat) < SINGULAR_TOL {
        return Err(Error::AtRest);
    }
    if lon == 0.0 {
        return Ok(std::f64::consts::FRAC_PI_2.copysign(lat));
    }
    Ok((lat / lon).atan())
}

/// Piecewise-constant virtual steer profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    pub levels: Vec<f64>,
    /// Duration of each level, s.
    pub segment: f64,
}

impl StepProfile {
    pub fn duration(&self) -> f64 {
        self.segment * self.levels.len() as f64
    }

    pub fn value(&self, t: f64) -> f64 {
        let idx = ((t / self.segment).floor().max(0.0) as usize).min(self.levels.len() - 1);
        self.levels[idx]
    }

    /// Distance from `t` to the nearest level switch.
    pub fn distance_to_switch(&self, t: f64) -> f64 {
        (1..self.levels.len()).map(|k| (t - k as f64 * self.segment).abs()).fold(f64::INFINITY, f64::min)
    }
}

impl Default for StepProfile {
    /// +/-0.2 rad alternating every 5 s for 20 s.
    fn default() -> Self {
        Self { levels: vec![0.2, -0.2, 0.2, -0.2], segment: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackingSample {
    pub t: f64,
    pub desired: f64,
    pub measured: f64,
    pub steer: f64,
    pub hitch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingReport {
    pub samples: Vec<TrackingSample>,
    /// Largest |measured - desired| over samples at least one sample period
    /// away from a profile switch.
    pub max_error: f64,
}

/// Drives the plant with tractor steering computed from a desired virtual
/// steer profile and records the virtual steer the plant actually realises.
///
/// The steering map is evaluated at every RK4 stage, so the loop behaves as a
/// continuous-time feedback.
pub fn track_virtual_steer(
    plant: &Plant,
    rear_speed: f64,
    profile: &StepProfile,
    sample_period: f64,
) -> Result<TrackingReport> {
    if !(sample_period > 0.0) {
        return Err(Error::InvalidParameter("sample period must be positive".into()));
    }
    let params = plant.params;
    let steps = (profile.duration() / sample_period).round() as usize;
    let mut state = SystemState::default();
    let mut samples = Vec::with_capacity(steps + 1);
    let mut max_error: f64 = 0.0;
    for k in 0..=steps {
        let t = k as f64 * sample_period;
        let desired = profile.value(t);
        let steer = virtual_to_actual_steer(desired, state.hitch_angle(), &params)?;
        let u = ControlInput::new(rear_speed, steer);
        let measured = measured_virtual_steer(&state, &u, &params)?;
        if profile.distance_to_switch(t) >= sample_period - 1e-12 {
            max_error = max_error.max((measured - desired).abs());
        }
        samples.push(TrackingSample { t, desired, measured, steer, hitch: state.hitch_angle() });
        if k == steps {
            break;
        }
        // level is constant over [t, t + sample_period) when the period divides the segment
        let level = profile.value(t + 0.5 * sample_period);
        state = plant.integrate_with(
            &state,
            sample_period,
            |s| Ok(ControlInput::new(rear_speed, virtual_to_actual_steer(level, s.hitch_angle(), &params)?)),
            &params,
        )?;
    }
    Ok(TrackingReport { samples, max_error })
}
