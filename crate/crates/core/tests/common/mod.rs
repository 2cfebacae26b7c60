#![allow(dead_code)]

use iclcam::geometry::UnitQuaternion;
use iclcam::harness::ScenarioConfig;
use nalgebra::Vector3;

pub fn default_cfg() -> ScenarioConfig {
    ScenarioConfig::default_scenario()
}

pub fn short_cfg(t_end: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default_scenario();
    cfg.simulation.t_end = t_end;
    cfg
}

/// Camera starts rolled 10° away from the goal attitude and is regulated back.
pub fn rotating_cfg() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default_scenario();
    let down = cfg.camera_orientation();
    let tilt = UnitQuaternion::from_axis_angle(&Vector3::new(1.0, 1.0, 0.0), 10f64.to_radians()).unwrap();
    let q = (down * tilt).to_vector4();
    cfg.scene.camera_orientation = [q[0], q[1], q[2], q[3]];
    cfg.planner.orientation_gain = 2.0;
    cfg
}

/// Distances straight from world coordinates: camera-to-feature,
/// camera-to-goal and goal-to-feature.
pub fn world_distances(cfg: &ScenarioConfig, p_w_c: &Vector3<f64>) -> (Vec<f64>, f64, Vec<f64>) {
    let goal = Vector3::from(cfg.scene.goal_position);
    let feats: Vec<Vector3<f64>> = cfg.scene.features_world.iter().map(|p| Vector3::from(*p)).collect();
    (
        feats.iter().map(|f| (f - p_w_c).norm()).collect(),
        (goal - p_w_c).norm(),
        feats.iter().map(|f| (f - goal).norm()).collect(),
    )
}

/// Least-squares slope of `ln|y|` against `t`.
pub fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (st, sy) = points.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y.abs().ln()));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), (t, y)| {
        (a + (t - mt) * (y.abs().ln() - my), b + (t - mt) * (t - mt))
    });
    num / den
}
