//! Scenario configuration: a JSON document with nested sections.
//!
//! Only `simulation.dt` and `simulation.t_end` are required; every other
//! key falls back to the default scenario. Unknown keys are rejected.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SymPosDef, UnitQuaternion};
use crate::observer::{AdmissionPolicy, GoalDistanceFusion, InitialEstimates, ObserverConfig, ObserverGains};
use crate::planner::GoalFusion;
use crate::scene::{CameraIntrinsics, FeatureSet, GoalPose, NoiseModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub observer: ObserverSection,
    #[serde(default)]
    pub planner: PlannerSection,
    #[serde(default)]
    pub scene: SceneSection,
    #[serde(default)]
    pub noise: NoiseSection,
}

/// Step size and horizon. Both are required; a missing key deserializes
/// to NaN and is reported by [`ScenarioConfig::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "missing")]
    pub dt: f64,
    #[serde(default = "missing")]
    pub t_end: f64,
}

fn missing() -> f64 {
    f64::NAN
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt: missing(),
            t_end: missing(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceFusionMode {
    Anchor,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatePreset {
    /// All distance estimates start at zero.
    Zero,
    /// Estimates start at the true distances.
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitEstimates {
    pub d_c_s: Vec<f64>,
    pub d_c_g: f64,
    pub d_g_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialEstimateSpec {
    Preset(EstimatePreset),
    Explicit(ExplicitEstimates),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverSection {
    /// Integration window length T in seconds.
    pub window: f64,
    pub stack_size: usize,
    pub lambda_tau: f64,
    pub kappa: [f64; 3],
    /// Minimum spacing between stack admissions; `None` means T/2.
    pub admission_interval: Option<f64>,
    pub info_floor: f64,
    pub goal_distance_fusion: DistanceFusionMode,
    pub anchor_feature: usize,
    pub initial_estimates: InitialEstimateSpec,
}

impl Default for ObserverSection {
    fn default() -> Self {
        Self {
            window: 0.5,
            stack_size: 50,
            lambda_tau: 1e-3,
            kappa: [5.0, 5.0, 5.0],
            admission_interval: None,
            info_floor: 1e-8,
            goal_distance_fusion: DistanceFusionMode::Anchor,
            anchor_feature: 0,
            initial_estimates: InitialEstimateSpec::Preset(EstimatePreset::Zero),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalFusionMode {
    Mean,
    Anchor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    /// Row-major 3×3 state weight.
    pub q_c: [[f64; 3]; 3],
    /// Row-major 3×3 control weight.
    pub r_c: [[f64; 3]; 3],
    pub gamma_c: f64,
    pub goal_fusion: GoalFusionMode,
    pub anchor_feature: usize,
    /// Proportional gain on the goal-relative attitude error; 0 disables rotation.
    pub orientation_gain: f64,
}

const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            q_c: IDENTITY,
            r_c: IDENTITY,
            gamma_c: 1.0,
            goal_fusion: GoalFusionMode::Mean,
            anchor_feature: 0,
            orientation_gain: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    /// Feature positions in the world frame.
    pub features_world: Vec<[f64; 3]>,
    /// Three features spanning the plane whose normal enters the planner.
    pub plane_indices: [usize; 3],
    pub goal_position: [f64; 3],
    /// Scalar-first quaternion of the goal frame in the world frame.
    pub goal_orientation: [f64; 4],
    pub camera_position: [f64; 3],
    pub camera_orientation: [f64; 4],
    pub fov_half_angle_deg: f64,
    /// `[fx, fy, cx, cy]` in pixels.
    pub intrinsics: [f64; 4],
}

impl Default for SceneSection {
    fn default() -> Self {
        default_scene()
    }
}

// Looking straight down the world z axis: a half turn about x.
const LOOK_DOWN: [f64; 4] = [0.0, 1.0, 0.0, 0.0];

fn default_scene() -> SceneSection {
    // Goal 2 m above the plane, offset from the feature centroid along x;
    // camera 5 m from the goal, tilted 45° from the plane normal.
    let goal = [0.25, 0.0, 2.0];
    let (s, c) = std::f64::consts::FRAC_PI_4.sin_cos();
    let camera = [goal[0] + 5.0 * s, goal[1], goal[2] + 5.0 * c];
    SceneSection {
        features_world: vec![
            [-0.5, -0.5, 0.0],
            [0.5, -0.5, 0.0],
            [0.5, 0.5, 0.0],
            [-0.5, 0.5, 0.0],
        ],
        plane_indices: [0, 1, 2],
        goal_position: goal,
        goal_orientation: LOOK_DOWN,
        camera_position: camera,
        camera_orientation: LOOK_DOWN,
        fov_half_angle_deg: 60.0,
        intrinsics: [500.0, 500.0, 320.0, 240.0],
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub pixel_sigma: f64,
    pub rotation_sigma: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// The reference scenario every acceptance property is stated against.
    pub fn default_scenario() -> Self {
        Self {
            simulation: SimulationSection { dt: 1e-3, t_end: 20.0 },
            observer: ObserverSection::default(),
            planner: PlannerSection::default(),
            scene: default_scene(),
            noise: NoiseSection::default(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { String::new() } else { path };
            Error::Parse {
                key,
                message: e.into_inner().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn steps(&self) -> usize {
        (self.simulation.t_end / self.simulation.dt).round() as usize
    }

    pub fn admission_interval(&self) -> f64 {
        self.observer.admission_interval.unwrap_or(0.5 * self.observer.window)
    }

    pub fn validate(&self) -> Result<()> {
        let sim = &self.simulation;
        let obs = &self.observer;
        positive("simulation.dt", sim.dt)?;
        positive("simulation.t_end", sim.t_end)?;
        positive("observer.window", obs.window)?;
        if obs.window < 2.0 * sim.dt * (1.0 - 1e-12) {
            return Err(Error::validation("observer.window", "must be at least 2·dt"));
        }
        if sim.t_end <= obs.window {
            return Err(Error::validation("simulation.t_end", "must exceed observer.window"));
        }
        if obs.stack_size < 1 {
            return Err(Error::validation("observer.stack_size", "must be at least 1"));
        }
        positive("observer.lambda_tau", obs.lambda_tau)?;
        for (i, k) in obs.kappa.iter().enumerate() {
            positive(&format!("observer.kappa[{i}]"), *k)?;
        }
        if let Some(a) = obs.admission_interval {
            non_negative("observer.admission_interval", a)?;
        }
        non_negative("observer.info_floor", obs.info_floor)?;
        let n = self.scene.features_world.len();
        if obs.anchor_feature >= n {
            return Err(Error::validation("observer.anchor_feature", format!("must index one of {n} features")));
        }
        if let InitialEstimateSpec::Explicit(e) = &obs.initial_estimates {
            if e.d_c_s.len() != n || e.d_g_s.len() != n {
                return Err(Error::validation(
                    "observer.initial_estimates",
                    format!("need {n} entries per feature list"),
                ));
            }
            if e.d_c_s.iter().chain(&e.d_g_s).chain([&e.d_c_g]).any(|v| !v.is_finite()) {
                return Err(Error::validation("observer.initial_estimates", "must be finite"));
            }
        }

        let pl = &self.planner;
        spd("planner.q_c", &pl.q_c)?;
        spd("planner.r_c", &pl.r_c)?;
        non_negative("planner.gamma_c", pl.gamma_c)?;
        non_negative("planner.orientation_gain", pl.orientation_gain)?;
        if pl.anchor_feature >= n {
            return Err(Error::validation("planner.anchor_feature", format!("must index one of {n} features")));
        }

        let sc = &self.scene;
        if !(sc.fov_half_angle_deg > 0.0 && sc.fov_half_angle_deg < 90.0) {
            return Err(Error::validation("scene.fov_half_angle_deg", "must lie in (0, 90)"));
        }
        quaternion("scene.goal_orientation", &sc.goal_orientation)?;
        quaternion("scene.camera_orientation", &sc.camera_orientation)?;
        for (key, v) in [("scene.goal_position", &sc.goal_position), ("scene.camera_position", &sc.camera_position)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(key, "must be finite"));
            }
        }
        self.intrinsics().map_err(|e| Error::validation("scene.intrinsics", e.to_string()))?;
        self.feature_set().map_err(|e| Error::validation("scene.features_world", e.to_string()))?;

        non_negative("noise.pixel_sigma", self.noise.pixel_sigma)?;
        non_negative("noise.rotation_sigma", self.noise.rotation_sigma)?;
        Ok(())
    }

    pub fn goal_pose(&self) -> GoalPose {
        GoalPose {
            p_w_g: Vector3::from(self.scene.goal_position),
            q_w_g: to_quaternion(&self.scene.goal_orientation).expect("validated"),
        }
    }

    pub fn camera_orientation(&self) -> UnitQuaternion {
        to_quaternion(&self.scene.camera_orientation).expect("validated")
    }

    pub fn feature_set(&self) -> Result<FeatureSet> {
        let world = self.scene.features_world.iter().map(|p| Vector3::from(*p)).collect();
        FeatureSet::new(world, &self.goal_pose(), self.scene.plane_indices)
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        let [fx, fy, cx, cy] = self.scene.intrinsics;
        CameraIntrinsics::pinhole(fx, fy, cx, cy)
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            pixel_sigma: self.noise.pixel_sigma,
            rotation_sigma: self.noise.rotation_sigma,
            seed: self.noise.seed,
        }
    }

    pub fn observer_config(&self) -> ObserverConfig {
        let o = &self.observer;
        ObserverConfig {
            window: o.window,
            stack_capacity: o.stack_size,
            lambda_tau: o.lambda_tau,
            policy: AdmissionPolicy {
                interval: self.admission_interval(),
                info_floor: o.info_floor,
            },
            fusion: match o.goal_distance_fusion {
                DistanceFusionMode::Anchor => GoalDistanceFusion::Anchor(o.anchor_feature),
                DistanceFusionMode::Average => GoalDistanceFusion::Average,
            },
        }
    }

    pub fn observer_gains(&self) -> ObserverGains {
        let [k1, k2, k3] = self.observer.kappa;
        ObserverGains::new(k1, k2, k3).expect("validated")
    }

    pub fn goal_fusion(&self) -> GoalFusion {
        match self.planner.goal_fusion {
            GoalFusionMode::Mean => GoalFusion::Mean,
            GoalFusionMode::Anchor => GoalFusion::Anchor(self.planner.anchor_feature),
        }
    }

    pub fn q_c(&self) -> SymPosDef {
        SymPosDef::new(row_major(&self.planner.q_c)).expect("validated")
    }

    pub fn r_c(&self) -> SymPosDef {
        SymPosDef::new(row_major(&self.planner.r_c)).expect("validated")
    }

    /// Initial observer estimates; `truth` supplies the true distances at t0.
    pub fn initial_estimates(&self, truth: &InitialEstimates) -> InitialEstimates {
        match &self.observer.initial_estimates {
            InitialEstimateSpec::Preset(EstimatePreset::Zero) => InitialEstimates::zeros(truth.d_c_s.len()),
            InitialEstimateSpec::Preset(EstimatePreset::Truth) => truth.clone(),
            InitialEstimateSpec::Explicit(e) => InitialEstimates {
                d_c_s: e.d_c_s.clone(),
                d_c_g: e.d_c_g,
                d_g_s: e.d_g_s.clone(),
            },
        }
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::from_json_str(&text)
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_nan() {
        return Err(Error::validation(key, "required"));
    }
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::validation(key, format!("must be finite and > 0, got {v}")));
    }
    Ok(())
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::validation(key, format!("must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn row_major(m: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| m[r][c])
}

fn spd(key: &str, m: &[[f64; 3]; 3]) -> Result<()> {
    SymPosDef::new(row_major(m)).map(|_| ()).map_err(|e| Error::validation(key, e.to_string()))
}

fn to_quaternion(q: &[f64; 4]) -> Result<UnitQuaternion> {
    UnitQuaternion::new_normalize(q[0], Vector3::new(q[1], q[2], q[3]))
}

fn quaternion(key: &str, q: &[f64; 4]) -> Result<()> {
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(key, "must be finite"));
    }
    to_quaternion(q).map(|_| ()).map_err(|e| Error::validation(key, e.to_string()))
}
