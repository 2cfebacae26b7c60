//! Ground-truth world: planar features, camera/goal kinematics and synthetic
//! bearing measurements.
//!
//! Frames: `W` world (inertial), `C` camera (optical axis `+z`), `G` goal.
//! The goal is fixed in `W`; the camera moves with a linear velocity `v_c`
//! expressed in `C` and the relative rotation evolves as `q̇_c_g = ½ B(q_c_g) ω`,
//! where `ω` is the angular velocity of `G` with respect to `C`.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{
    integrate_quaternion, plane_normal, rotation_from_quaternion, skew, RotationMatrix, UnitQuaternion,
};

/// Coplanarity tolerance for feature sets, metres.
pub const COPLANAR_TOL: f64 = 1e-9;

/// Fixed pose of the goal frame in the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalPose {
    pub p_w_g: Vector3<f64>,
    pub q_w_g: UnitQuaternion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    features_goal: Vec<Vector3<f64>>,
    features_world: Vec<Vector3<f64>>,
    plane_indices: [usize; 3],
}

impl FeatureSet {
    /// Builds the set from world positions and the goal pose they are measured against.
    pub fn new(features_world: Vec<Vector3<f64>>, goal: &GoalPose, plane_indices: [usize; 3]) -> Result<Self> {
        if features_world.len() < 4 {
            return Err(Error::validation(
                "scene.features_world",
                format!("need at least 4 features, got {}", features_world.len()),
            ));
        }
        let [a, b, c] = plane_indices;
        if a.max(b).max(c) >= features_world.len() || a == b || b == c || a == c {
            return Err(Error::validation(
                "scene.plane_indices",
                "indices must be distinct and refer to existing features",
            ));
        }
        let normal = plane_normal(&features_world[a], &features_world[b], &features_world[c])
            .map_err(|e| Error::validation("scene.plane_indices", e.to_string()))?;
        for (i, p) in features_world.iter().enumerate() {
            let off = (p - features_world[b]).dot(&normal).abs();
            if off > COPLANAR_TOL {
                return Err(Error::validation(
                    "scene.features_world",
                    format!("feature {i} is {off:e} m off the feature plane"),
                ));
            }
        }
        let r_g_w = rotation_from_quaternion(&goal.q_w_g).transpose();
        let features_goal = features_world.iter().map(|p| r_g_w.rotate(&(p - goal.p_w_g))).collect();
        Ok(Self {
            features_goal,
            features_world,
            plane_indices,
        })
    }

    pub fn len(&self) -> usize {
        self.features_goal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features_goal.is_empty()
    }

    pub fn features_goal(&self) -> &[Vector3<f64>] {
        &self.features_goal
    }

    pub fn features_world(&self) -> &[Vector3<f64>] {
        &self.features_world
    }

    pub fn plane_indices(&self) -> [usize; 3] {
        self.plane_indices
    }

    /// Unit normal of the feature plane, expressed in `W`.
    pub fn normal_world(&self) -> Vector3<f64> {
        let [a, b, c] = self.plane_indices;
        plane_normal(&self.features_world[a], &self.features_world[b], &self.features_world[c])
            .expect("validated on construction")
    }

    /// Constant goal-to-feature distances `d_g_s`.
    pub fn goal_distances(&self) -> Vec<f64> {
        self.features_goal.iter().map(|p| p.norm()).collect()
    }

    /// Constant goal-to-feature bearings `u_g_s`.
    pub fn goal_bearings(&self) -> Vec<Vector3<f64>> {
        self.features_goal.iter().map(|p| p.normalize()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraState {
    pub p_c_g: Vector3<f64>,
    pub q_c_g: UnitQuaternion,
    pub q_w_c: UnitQuaternion,
    pub p_w_c: Vector3<f64>,
    pub t: f64,
    pub goal: GoalPose,
}

impl CameraState {
    /// State for a camera at world pose `(p_w_c, q_w_c)` looking at `goal`.
    pub fn from_world_pose(goal: GoalPose, p_w_c: Vector3<f64>, q_w_c: UnitQuaternion, t: f64) -> Self {
        let r_c_w = rotation_from_quaternion(&q_w_c).transpose();
        Self {
            p_c_g: r_c_w.rotate(&(goal.p_w_g - p_w_c)),
            q_c_g: q_w_c.conjugate() * goal.q_w_g,
            q_w_c,
            p_w_c,
            t,
            goal,
        }
    }

    /// Rebuilds the world pose from the relative states and the fixed goal.
    fn with_relative(goal: GoalPose, p_c_g: Vector3<f64>, q_c_g: UnitQuaternion, t: f64) -> Self {
        let q_w_c = goal.q_w_g * q_c_g.conjugate();
        let p_w_c = goal.p_w_g - rotation_from_quaternion(&q_w_c).rotate(&p_c_g);
        Self {
            p_c_g,
            q_c_g,
            q_w_c,
            p_w_c,
            t,
            goal,
        }
    }

    pub fn r_c_g(&self) -> RotationMatrix {
        rotation_from_quaternion(&self.q_c_g)
    }

    pub fn r_w_c(&self) -> RotationMatrix {
        rotation_from_quaternion(&self.q_w_c)
    }

    /// Feature positions expressed in `C`.
    pub fn features_camera(&self, fs: &FeatureSet) -> Vec<Vector3<f64>> {
        let r = self.r_c_g();
        fs.features_goal().iter().map(|p| self.p_c_g + r.rotate(p)).collect()
    }

    /// Residual of `p_c_g == R_w_cᵀ (p_w_g - p_w_c)`.
    pub fn frame_consistency_error(&self) -> f64 {
        let expected = self.r_w_c().transpose().rotate(&(self.goal.p_w_g - self.p_w_c));
        (expected - self.p_c_g).norm()
    }
}

/// Advances the relative pose by one RK4 step with `v_c` and `ω` held constant.
///
/// Translation obeys `ṗ_c_g = -v_c - ω_cam × p_c_g` with the camera body
/// rate `ω_cam = -R_c_g ω`; the world pose is recomputed from the fixed goal.
pub fn step_dynamics(state: &CameraState, v_c: &Vector3<f64>, omega: &Vector3<f64>, dt: f64) -> CameraState {
    let t = state.t + dt;
    if omega.iter().all(|w| *w == 0.0) {
        return CameraState::with_relative(state.goal, state.p_c_g - v_c * dt, state.q_c_g, t);
    }
    let dp = |p: &Vector3<f64>, q: &UnitQuaternion| {
        let w_cam = -rotation_from_quaternion(q).rotate(omega);
        -v_c + skew(p) * w_cam
    };
    let half = 0.5 * dt;
    let (p0, q0) = (state.p_c_g, state.q_c_g);
    let q_half = integrate_quaternion(&q0, omega, half);
    let q_end = integrate_quaternion(&q0, omega, dt);
    let k1 = dp(&p0, &q0);
    let k2 = dp(&(p0 + k1 * half), &q_half);
    let k3 = dp(&(p0 + k2 * half), &q_half);
    let k4 = dp(&(p0 + k3 * dt), &q_end);
    let p = p0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    CameraState::with_relative(state.goal, p, q_end, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    a: Matrix3<f64>,
    a_inv: Matrix3<f64>,
}

impl CameraIntrinsics {
    pub fn new(a: Matrix3<f64>) -> Result<Self> {
        if a.determinant().abs() <= 1e-12 {
            return Err(Error::validation("scene.intrinsics", "intrinsic matrix is singular"));
        }
        let a_inv = a.try_inverse().ok_or_else(|| Error::validation("scene.intrinsics", "not invertible"))?;
        Ok(Self { a, a_inv })
    }

    /// Pinhole intrinsics with zero skew.
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::new(Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.a
    }

    /// Homogeneous pixel coordinates `(u, v, 1)` of a point in front of the camera.
    pub fn project(&self, p_c: &Vector3<f64>) -> Vector3<f64> {
        let h = self.a * p_c;
        h / h.z
    }

    /// Unit bearing `A⁻¹P / ‖A⁻¹P‖` of a homogeneous pixel.
    pub fn bearing(&self, pixel: &Vector3<f64>) -> Vector3<f64> {
        (self.a_inv * pixel).normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    /// Std-dev of the Gaussian pixel perturbation, pixels.
    pub pixel_sigma: f64,
    /// Std-dev of the small-angle perturbation applied to `R_c_g`, radians.
    pub rotation_sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn is_noiseless(&self) -> bool {
        self.pixel_sigma == 0.0 && self.rotation_sigma == 0.0
    }

    /// Independent, reproducible stream for the `sample`-th measurement.
    fn rng_for(&self, sample: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub t: f64,
    pub u_c_s: Vec<Vector3<f64>>,
    pub u_c_g: Vector3<f64>,
    pub r_c_g: RotationMatrix,
    pub u_g_s: Vec<Vector3<f64>>,
}

/// True iff `p_c` is in front of the camera and within `half_angle` of the
/// optical axis. The boundary is inclusive.
pub fn fov_predicate(p_c: &Vector3<f64>, half_angle: f64) -> bool {
    if p_c.z <= 0.0 {
        return false;
    }
    let angle = Vector2::new(p_c.x, p_c.y).norm().atan2(p_c.z);
    angle <= half_angle + 1e-12
}

/// Samples one measurement; `sample` selects the noise stream so repeated
/// calls with the same arguments are identical.
pub fn synthesize_measurement(
    state: &CameraState,
    fs: &FeatureSet,
    intrinsics: &CameraIntrinsics,
    noise: &NoiseModel,
    fov_half_angle: f64,
    sample: u64,
) -> Result<Measurement> {
    let features = state.features_camera(fs);
    for (i, p) in features.iter().enumerate() {
        if !fov_predicate(p, fov_half_angle) {
            return Err(Error::FeatureLost { feature: i, t: state.t });
        }
    }

    let mut rng = (!noise.is_noiseless()).then(|| noise.rng_for(sample));
    let pixel_noise = Normal::new(0.0, noise.pixel_sigma.max(0.0)).expect("finite sigma");
    let observe = |p: &Vector3<f64>, rng: &mut Option<ChaCha8Rng>| -> Vector3<f64> {
        match rng {
            Some(r) if noise.pixel_sigma > 0.0 => {
                let mut px = intrinsics.project(p);
                px.x += pixel_noise.sample(r);
                px.y += pixel_noise.sample(r);
                intrinsics.bearing(&px)
            }
            // Noise-free bearings skip the pixel round trip to stay exact.
            _ => p.normalize(),
        }
    };

    let u_c_s = features.iter().map(|p| observe(p, &mut rng)).collect();

    // At zero range any direction satisfies the distance identity; report the
    // optical axis so the regressor stays well defined.
    let u_c_g = if state.p_c_g.norm() < 1e-12 {
        Vector3::z()
    } else if state.p_c_g.z > 1e-9 {
        observe(&state.p_c_g, &mut rng)
    } else {
        state.p_c_g.normalize()
    };

    let mut r_c_g = state.r_c_g();
    if let (Some(r), true) = (rng.as_mut(), noise.rotation_sigma > 0.0) {
        let n = Normal::new(0.0, noise.rotation_sigma).expect("finite sigma");
        let dq = UnitQuaternion::from_rotation_vector(&Vector3::new(n.sample(r), n.sample(r), n.sample(r)));
        r_c_g = rotation_from_quaternion(&dq) * r_c_g;
    }

    Ok(Measurement {
        t: state.t,
        u_c_s,
        u_c_g,
        r_c_g,
        u_g_s: fs.goal_bearings(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueDistances {
    pub d_c_s: Vec<f64>,
    pub d_c_g: f64,
    pub d_g_s: Vec<f64>,
}

pub fn true_distances(state: &CameraState, fs: &FeatureSet) -> TrueDistances {
    TrueDistances {
        d_c_s: state.features_camera(fs).iter().map(|p| p.norm()).collect(),
        d_c_g: state.p_c_g.norm(),
        d_g_s: fs.goal_distances(),
    }
}
