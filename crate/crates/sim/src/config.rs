//! Scenario files.
//!
//! Scenarios are TOML. Every key is optional except `name` and the
//! `[initial]` pose; missing keys take the defaults of the planner. Angles
//! are written in degrees and converted to radians here, nowhere else.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use trailer_core::kinematics::StepProfile;
use trailer_core::{
    AcceptanceThresholds, ForwardConfig, ForwardPath, OcpConfig, ParkingSetup, Plant, SystemState, VehicleTrailerParams,
};

use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSection {
    pub wheelbase: f64,
    pub hitch_offset: f64,
    pub trailer_length: f64,
    pub cg_to_front: f64,
    pub cg_to_rear: f64,
}

impl Default for VehicleSection {
    fn default() -> Self {
        Self::from(VehicleTrailerParams::default())
    }
}

impl From<VehicleTrailerParams> for VehicleSection {
    fn from(p: VehicleTrailerParams) -> Self {
        Self {
            wheelbase: p.wheelbase,
            hitch_offset: p.hitch_offset,
            trailer_length: p.trailer_length,
            cg_to_front: p.cg_to_front,
            cg_to_rear: p.cg_to_rear,
        }
    }
}

impl VehicleSection {
    pub fn params(&self) -> VehicleTrailerParams {
        VehicleTrailerParams {
            wheelbase: self.wheelbase,
            hitch_offset: self.hitch_offset,
            trailer_length: self.trailer_length,
            cg_to_front: self.cg_to_front,
            cg_to_rear: self.cg_to_rear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    /// RK4 substeps per control period.
    pub substeps: usize,
    pub jackknife_limit_deg: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        let p = Plant::new(VehicleTrailerParams::default());
        Self { substeps: p.substeps, jackknife_limit_deg: p.jackknife_limit.to_degrees() }
    }
}

/// Start pose, given either for the tractor or for the trailer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InitialPose {
    Tractor { x_r: f64, y_r: f64, psi_1_deg: f64, psi_2_deg: f64 },
    Trailer { x_t: f64, y_t: f64, psi_2_deg: f64, hitch_deg: f64 },
}

impl InitialPose {
    pub fn state(&self, params: &VehicleTrailerParams) -> SystemState {
        match *self {
            Self::Tractor { x_r, y_r, psi_1_deg, psi_2_deg } => {
                SystemState::new(x_r, y_r, psi_1_deg.to_radians(), psi_2_deg.to_radians())
            }
            Self::Trailer { x_t, y_t, psi_2_deg, hitch_deg } => {
                SystemState::from_trailer_pose(x_t, y_t, psi_2_deg.to_radians(), hitch_deg.to_radians(), params)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcpSection {
    pub step: f64,
    pub horizon: usize,
    /// Diagonal of the running state weight on (x, y, yaw).
    pub q: [f64; 3],
    /// Diagonal of the terminal weight.
    pub p: [f64; 3],
    /// Diagonal of the input weight on (speed, virtual steer).
    pub r: [f64; 2],
    pub speed_min: f64,
    pub speed_max: f64,
    pub virtual_steer_min_deg: f64,
    pub virtual_steer_max_deg: f64,
    pub steer_min_deg: f64,
    pub steer_max_deg: f64,
    pub grad_tol: f64,
    pub max_iterations: usize,
    pub stop_speed: f64,
    pub max_steps: usize,
}

fn diag3(m: &Matrix3<f64>) -> [f64; 3] {
    [m[(0, 0)], m[(1, 1)], m[(2, 2)]]
}

impl Default for OcpSection {
    fn default() -> Self {
        let c = OcpConfig::default();
        Self {
            step: c.step,
            horizon: c.horizon,
            q: diag3(&c.state_weight),
            p: diag3(&c.terminal_weight),
            r: [c.input_weight[(0, 0)], c.input_weight[(1, 1)]],
            speed_min: c.speed_bounds.0,
            speed_max: c.speed_bounds.1,
            virtual_steer_min_deg: c.virtual_steer_limits.0.to_degrees(),
            virtual_steer_max_deg: c.virtual_steer_limits.1.to_degrees(),
            steer_min_deg: c.steer_limits.0.to_degrees(),
            steer_max_deg: c.steer_limits.1.to_degrees(),
            grad_tol: c.grad_tol,
            max_iterations: c.max_iterations,
            stop_speed: c.stop_speed,
            max_steps: c.max_steps,
        }
    }
}

impl OcpSection {
    pub fn config(&self) -> OcpConfig {
        OcpConfig {
            step: self.step,
            horizon: self.horizon,
            state_weight: Matrix3::from_diagonal(&Vector3::from(self.q)),
            terminal_weight: Matrix3::from_diagonal(&Vector3::from(self.p)),
            input_weight: Matrix2::from_diagonal(&Vector2::from(self.r)),
            speed_bounds: (self.speed_min, self.speed_max),
            virtual_steer_limits: (self.virtual_steer_min_deg.to_radians(), self.virtual_steer_max_deg.to_radians()),
            steer_limits: (self.steer_min_deg.to_radians(), self.steer_max_deg.to_radians()),
            grad_tol: self.grad_tol,
            max_iterations: self.max_iterations,
            stop_speed: self.stop_speed,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardSection {
    pub lookahead: f64,
    pub speed: f64,
    pub hitch_threshold_deg: f64,
    pub distance_threshold: f64,
    pub max_steps: usize,
    /// A point of the exit line.
    pub line_anchor: [f64; 2],
    pub line_heading_deg: f64,
}

impl Default for ForwardSection {
    fn default() -> Self {
        let f = ForwardConfig::default();
        Self {
            lookahead: f.lookahead,
            speed: f.speed,
            hitch_threshold_deg: f.hitch_threshold.to_degrees(),
            distance_threshold: f.distance_threshold,
            max_steps: f.max_steps,
            line_anchor: [0.0, 0.0],
            line_heading_deg: 0.0,
        }
    }
}

impl ForwardSection {
    pub fn config(&self) -> ForwardConfig {
        ForwardConfig {
            lookahead: self.lookahead,
            speed: self.speed,
            hitch_threshold: self.hitch_threshold_deg.to_radians(),
            distance_threshold: self.distance_threshold,
            max_steps: self.max_steps,
        }
    }

    pub fn path(&self) -> ForwardPath {
        ForwardPath::new((self.line_anchor[0], self.line_anchor[1]), self.line_heading_deg.to_radians())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceSection {
    pub max_distance: f64,
    pub max_orientation_deg: f64,
    pub max_hitch_deg: f64,
    pub max_cycles: usize,
}

impl Default for AcceptanceSection {
    fn default() -> Self {
        let a = AcceptanceThresholds::default();
        Self {
            max_distance: a.max_distance,
            max_orientation_deg: a.max_orientation.to_degrees(),
            max_hitch_deg: a.max_hitch.to_degrees(),
            max_cycles: 1,
        }
    }
}

impl AcceptanceSection {
    pub fn thresholds(&self) -> AcceptanceThresholds {
        AcceptanceThresholds {
            max_distance: self.max_distance,
            max_orientation: self.max_orientation_deg.to_radians(),
            max_hitch: self.max_hitch_deg.to_radians(),
        }
    }
}

/// One parking scenario as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Where `park` writes its files. Defaults to `out/<name>`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub vehicle: VehicleSection,
    #[serde(default)]
    pub plant: PlantSection,
    pub initial: InitialPose,
    #[serde(default)]
    pub ocp: OcpSection,
    #[serde(default)]
    pub forward: ForwardSection,
    #[serde(default)]
    pub acceptance: AcceptanceSection,
}

fn check_name(name: &str) -> Result<(), SimError> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(SimError::Config(format!("scenario name {name:?} must be nonempty and use only [A-Za-z0-9._-]")))
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.output_dir.get_or_insert_with(|| Path::new("out").join(&cfg.name));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            SimError::Config(m) => SimError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The scenario with every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serialises")
    }

    pub fn setup(&self) -> ParkingSetup {
        let params = self.vehicle.params();
        let mut plant = Plant::new(params).with_substeps(self.plant.substeps);
        plant.jackknife_limit = self.plant.jackknife_limit_deg.to_radians();
        ParkingSetup {
            plant,
            ocp: self.ocp.config(),
            forward: self.forward.config(),
            path: self.forward.path(),
            thresholds: self.acceptance.thresholds(),
            max_cycles: self.acceptance.max_cycles,
        }
    }

    pub fn initial_state(&self) -> SystemState {
        self.initial.state(&self.vehicle.params())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        check_name(&self.name)?;
        let setup = self.setup();
        setup.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if !self.initial_state().is_finite() {
            return Err(SimError::Config("initial pose must be finite".into()));
        }
        if self.acceptance.max_cycles == 0 {
            return Err(SimError::Config("max_cycles must be at least 1".into()));
        }
        let [ax, ay] = self.forward.line_anchor;
        if !(ax.is_finite() && ay.is_finite() && self.forward.line_heading_deg.is_finite()) {
            return Err(SimError::Config("exit line must be finite".into()));
        }
        Ok(())
    }

    /// Caps both closed-loop stages at `n` control periods.
    pub fn set_max_steps(&mut self, n: usize) {
        self.ocp.max_steps = n;
        self.forward.max_steps = n;
    }
}

/// Inverse-kinematics tracking run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IkConfig {
    #[serde(default = "default_ik_name")]
    pub name: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub vehicle: VehicleSection,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default = "default_rear_speed")]
    pub rear_speed: f64,
    #[serde(default = "default_sample_period")]
    pub sample_period: f64,
    /// Pass if the tracking error stays below this, rad.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub profile: ProfileSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub levels_deg: Vec<f64>,
    pub segment: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        let p = StepProfile::default();
        Self { levels_deg: p.levels.iter().map(|v| v.to_degrees()).collect(), segment: p.segment }
    }
}

fn default_ik_name() -> String {
    "validate_ik".into()
}

fn default_rear_speed() -> f64 {
    -1.0
}

fn default_sample_period() -> f64 {
    0.1
}

fn default_tolerance() -> f64 {
    1e-6
}

impl IkConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.output_dir.get_or_insert_with(|| Path::new("out").join(&cfg.name));
        check_name(&cfg.name)?;
        cfg.vehicle.params().validate().map_err(|e| SimError::Config(e.to_string()))?;
        if cfg.profile.levels_deg.is_empty() || !(cfg.profile.segment > 0.0) {
            return Err(SimError::Config("profile needs at least one level and a positive segment".into()));
        }
        if !(cfg.sample_period > 0.0)
            || !(cfg.tolerance > 0.0)
            || !cfg.rear_speed.is_finite()
            || cfg.plant.substeps == 0
        {
            return Err(SimError::Config("sample period, tolerance and substeps must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn profile(&self) -> StepProfile {
        StepProfile {
            levels: self.profile.levels_deg.iter().map(|v| v.to_radians()).collect(),
            segment: self.profile.segment,
        }
    }

    pub fn plant(&self) -> Plant {
        let mut plant = Plant::new(self.vehicle.params()).with_substeps(self.plant.substeps);
        plant.jackknife_limit = self.plant.jackknife_limit_deg.to_radians();
        plant
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "demo"
[initial]
x_t = 10.0
y_t = 3.0
psi_2_deg = 0.0
hitch_deg = 0.0
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.output_dir.as_deref(), Some(Path::new("out/demo")));
        let setup = cfg.setup();
        assert_eq!(setup.plant.params, VehicleTrailerParams::default());
        assert_eq!(setup.ocp.horizon, 10);
        assert!((setup.ocp.steer_limits.1 - 0.75).abs() < 1e-15);
        assert_eq!(setup.forward.lookahead, 5.0);
        let s = cfg.initial_state();
        assert!((s.yaw - s.trailer_yaw).abs() < 1e-15);
    }

    #[test]
    fn resolved_echo_round_trips() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let echo = cfg.to_toml();
        assert!(echo.contains("[ocp]") && echo.contains("lookahead"));
        assert_eq!(ScenarioConfig::from_toml(&echo).unwrap(), cfg);
    }

    #[test]
    fn tractor_pose_form() {
        let text = "name = \"t\"\n[initial]\nx_r = 1.0\ny_r = 2.0\npsi_1_deg = 90.0\npsi_2_deg = 80.0\n";
        let s = ScenarioConfig::from_toml(text).unwrap().initial_state();
        assert_eq!((s.x, s.y), (1.0, 2.0));
        assert!((s.hitch_angle().to_degrees() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_files() {
        let bad = [
            MINIMAL.replace("demo", "a/b"),
            MINIMAL.replace("demo", ""),
            MINIMAL.replace("hitch_deg", "hitch"),
            format!("{MINIMAL}[vehicle]\nwheelbase = -1.0\n"),
            format!("{MINIMAL}[ocp]\nhorizon = 0\n"),
            format!("{MINIMAL}[forward]\nlookahead = 0.0\n"),
            format!("{MINIMAL}[acceptance]\nmax_cycles = 0\n"),
            format!("{MINIMAL}[ocp]\nbogus = 1\n"),
            "name = \"x\"\n".to_string(),
        ];
        for text in bad {
            assert!(matches!(ScenarioConfig::from_toml(&text), Err(SimError::Config(_))), "{text}");
        }
    }

    #[test]
    fn ik_defaults() {
        let cfg =
            IkConfig::from_toml("[vehicle]\nwheelbase = 3.0\nhitch_offset = 1.0\ntrailer_length = 2.5\n").unwrap();
        assert_eq!(cfg.rear_speed, -1.0);
        assert_eq!(cfg.profile().levels.len(), 4);
        assert!((cfg.profile().levels[0] - 0.2).abs() < 1e-15);
    }
}
