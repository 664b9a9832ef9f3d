//! Reverse-parking planner for a car towing a single-axle trailer.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the vehicle-trailer geometry, the kinematic plant and its
//!   RK4 propagation.
//! * [`kinematics`] maps the trailer's virtual steering/speed to tractor
//!   steering/speed and back.
//! * [`nmpc`] is the receding-horizon planner that drives the trailer to the
//!   origin of the parking frame.
//! * [`pursuit`] is the forward repositioning controller.
//! * [`orchestrator`] chains reverse, forward and reverse stages.

// `!(x > 0.0)` is used on purpose so that NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kinematics;
pub mod model;
pub mod nmpc;
pub mod orchestrator;
pub mod pursuit;

pub use error::{Error, Result};
pub use kinematics::VirtualInput;
pub use model::{ControlInput, Plant, PoseSet, SystemState, VehicleTrailerParams};
pub use nmpc::{InputBounds, OcpConfig, Planner, SolveResult, TrailerState};
pub use orchestrator::{AcceptanceThresholds, LogRow, ParkingOutcome, ParkingSetup, Stage, StageMetrics};
pub use pursuit::{ForwardConfig, ForwardPath};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
    }
}
