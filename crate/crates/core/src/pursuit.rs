//! Forward repositioning: the tractor alone tracks a straight exit line with
//! geometric pure pursuit, and the trailer is simply towed.

use serde::{Deserialize, Serialize};

use crate::model::{derive_poses, SystemState, VehicleTrailerParams};
use crate::wrap_angle;

/// Straight line out of the parking space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardPath {
    pub anchor: (f64, f64),
    /// Unit vector.
    pub direction: (f64, f64),
}

impl ForwardPath {
    /// Line through `anchor` with heading `heading` (rad).
    pub fn new(anchor: (f64, f64), heading: f64) -> Self {
        Self { anchor, direction: (heading.cos(), heading.sin()) }
    }

    /// Signed lateral offset of `p`, positive to the left of the line.
    pub fn lateral_offset(&self, p: (f64, f64)) -> f64 {
        let (dx, dy) = (p.0 - self.anchor.0, p.1 - self.anchor.1);
        self.direction.0 * dy - self.direction.1 * dx
    }

    fn along(&self, p: (f64, f64)) -> f64 {
        (p.0 - self.anchor.0) * self.direction.0 + (p.1 - self.anchor.1) * self.direction.1
    }

    fn point_at(&self, s: f64) -> (f64, f64) {
        (self.anchor.0 + s * self.direction.0, self.anchor.1 + s * self.direction.1)
    }
}

impl Default for ForwardPath {
    /// The +X axis of the parking frame.
    fn default() -> Self {
        Self { anchor: (0.0, 0.0), direction: (1.0, 0.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    /// Lookahead distance, m.
    pub lookahead: f64,
    /// Rear-axle speed, m/s, positive.
    pub speed: f64,
    /// Stop once |hitch angle| is below this, rad ...
    pub hitch_threshold: f64,
    /// ... and the trailer axle is further than this from the goal, m.
    pub distance_threshold: f64,
    pub max_steps: usize,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self {
            lookahead: 5.0,
            speed: 1.0,
            hitch_threshold: 2f64.to_radians(),
            distance_threshold: 8.0,
            max_steps: 1200,
        }
    }
}

impl ForwardConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let fields = [
            ("lookahead", self.lookahead),
            ("speed", self.speed),
            ("hitch threshold", self.hitch_threshold),
            ("distance threshold", self.distance_threshold),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(crate::Error::InvalidParameter(format!("forward {name} must be positive, got {v}")));
            }
        }
        if self.max_steps == 0 {
            return Err(crate::Error::InvalidParameter("forward step cap must be positive".into()));
        }
        Ok(())
    }
}

/// Pure-pursuit front-wheel steer toward the point of the line that lies one
/// lookahead distance from the rear axle, clamped to `steer_limits`.
pub fn pursuit_steer(
    state: &SystemState,
    path: &ForwardPath,
    cfg: &ForwardConfig,
    params: &VehicleTrailerParams,
    steer_limits: (f64, f64),
) -> f64 {
    let rear = (state.x, state.y);
    let offset = path.lateral_offset(rear);
    let along = path.along(rear);
    let target = if offset.abs() < cfg.lookahead {
        path.point_at(along + (cfg.lookahead * cfg.lookahead - offset * offset).sqrt())
    } else {
        // too far for the lookahead circle to reach the line: head for the foot point
        path.point_at(along)
    };
    let (tx, ty) = (target.0 - rear.0, target.1 - rear.1);
    let chord = tx.hypot(ty).max(f64::EPSILON);
    let alpha = wrap_angle(ty.atan2(tx) - state.yaw);
    let steer = (2.0 * params.wheelbase * alpha.sin() / chord).atan();
    steer.clamp(steer_limits.0, steer_limits.1)
}

/// Both exit conditions: small hitch angle and trailer far enough out.
pub fn forward_terminated(state: &SystemState, cfg: &ForwardConfig, params: &VehicleTrailerParams) -> bool {
    let trailer = derive_poses(state, params).trailer;
    wrap_angle(state.hitch_angle()).abs() < cfg.hitch_threshold && trailer.0.hypot(trailer.1) > cfg.distance_threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ControlInput, Plant};
    use approx::assert_abs_diff_eq;

    const LIMITS: (f64, f64) = (-0.75, 0.75);

    #[test]
    fn on_line_no_steer() {
        let p = VehicleTrailerParams::default();
        let s = SystemState::new(3.0, 0.0, 0.0, 0.0);
        assert_eq!(pursuit_steer(&s, &ForwardPath::default(), &ForwardConfig::default(), &p, LIMITS), 0.0);
    }

    #[test]
    fn lateral_offset_chord_geometry() {
        let p = VehicleTrailerParams::default();
        let s = SystemState::new(0.0, 1.0, 0.0, 0.0);
        let d = pursuit_steer(&s, &ForwardPath::default(), &ForwardConfig::default(), &p, LIMITS);
        assert_abs_diff_eq!(d, (2.0 * 2.896 * -0.2f64 / 5.0).atan(), epsilon = 1e-12);
        assert_abs_diff_eq!(d, -0.22766339441885466, epsilon = 1e-12);
    }

    #[test]
    fn perpendicular_heading_saturates() {
        let p = VehicleTrailerParams::default();
        let s = SystemState::new(0.0, 0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
        let d = pursuit_steer(&s, &ForwardPath::default(), &ForwardConfig::default(), &p, LIMITS);
        assert_eq!(d, -0.75);
        let s = SystemState::new(0.0, 0.0, -std::f64::consts::FRAC_PI_2, 0.0);
        assert_eq!(pursuit_steer(&s, &ForwardPath::default(), &ForwardConfig::default(), &p, LIMITS), 0.75);
    }

    #[test]
    fn far_from_line_still_steers_toward_it() {
        let p = VehicleTrailerParams::default();
        let s = SystemState::new(0.0, 12.0, 0.0, 0.0);
        let d = pursuit_steer(&s, &ForwardPath::default(), &ForwardConfig::default(), &p, LIMITS);
        // aims at the foot point: alpha = -90 deg over a 12 m chord
        assert_abs_diff_eq!(d, (-2.0 * 2.896f64 / 12.0).atan(), epsilon = 1e-12);
    }

    #[test]
    fn termination_conditions() {
        let p = VehicleTrailerParams::default();
        let cfg = ForwardConfig::default();
        let at = |hitch_deg: f64, x: f64| SystemState::from_trailer_pose(x, 0.0, 0.0, hitch_deg.to_radians(), &p);
        assert!(forward_terminated(&at(0.0, 20.0), &cfg, &p));
        assert!(!forward_terminated(&at(10.0, 20.0), &cfg, &p));
        assert!(!forward_terminated(&at(0.5, 5.0), &cfg, &p));
    }

    #[test]
    fn converges_to_line() {
        let p = VehicleTrailerParams::default();
        let plant = Plant::new(p);
        let cfg = ForwardConfig::default();
        let path = ForwardPath::default();
        for (y0, heading) in [(3.0, 0.0), (-3.0, 0.7), (2.0, -0.7), (-1.0, -0.3)] {
            let mut s = SystemState::new(0.0, y0, heading, heading);
            let mut offsets = Vec::new();
            for _ in 0..300 {
                let steer = pursuit_steer(&s, &path, &cfg, &p, LIMITS);
                assert!(steer.abs() <= 0.75);
                s = plant.integrate(&s, &ControlInput::new(cfg.speed, steer), 0.1).unwrap();
                offsets.push(path.lateral_offset((s.x, s.y)));
            }
            assert!(offsets.last().unwrap().abs() < 0.05, "start {y0} {heading}: {}", offsets.last().unwrap());
            // after the first crossing (if any) and the peak that follows it, |offset| only shrinks
            let crossing = offsets.windows(2).position(|w| w[0].signum() != w[1].signum()).map_or(0, |i| i + 1);
            let tail: Vec<f64> = offsets[crossing..].iter().map(|o| o.abs()).collect();
            let peak = tail.iter().enumerate().fold(0, |best, (i, v)| if *v > tail[best] { i } else { best });
            // monotone down to the 5 cm band, inside it afterwards
            let settled = tail[peak..].iter().position(|v| *v < 0.05).unwrap();
            for w in tail[peak..peak + settled + 1].windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "offset grew after settling from start {y0} {heading}");
            }
            assert!(tail[peak + settled..].iter().all(|v| *v < 0.05));
        }
    }
}
