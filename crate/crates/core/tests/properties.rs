mod common;

use iclcam::geometry::{rotation_from_quaternion, spd_sqrt, SymPosDef, UnitQuaternion};
use iclcam::observer::{regressor, stack_update, AdmissionPolicy, HistoryStack};
use iclcam::planner::{build_gains, control_velocity};
use iclcam::scene::{
    step_dynamics, synthesize_measurement, true_distances, CameraIntrinsics, CameraState, FeatureSet, GoalPose,
    NoiseModel,
};
use nalgebra::{Matrix3, Vector2, Vector3};
use proptest::prelude::*;

fn unit_quat() -> impl Strategy<Value = UnitQuaternion> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-degenerate", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-3)
        .prop_map(|(a, b, c, d)| UnitQuaternion::new_normalize(a, Vector3::new(b, c, d)).unwrap())
}

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn spd() -> impl Strategy<Value = Matrix3<f64>> {
    (proptest::array::uniform9(-1.0..1.0f64), 0.05..1.0f64).prop_map(|(a, eps)| {
        let a = Matrix3::from_row_slice(&a);
        a * a.transpose() + Matrix3::identity() * eps
    })
}

/// A square of features in the goal's z = 2 plane, seen by a camera placed
/// in front of the goal with a random attitude perturbation.
fn scene() -> impl Strategy<Value = (CameraState, FeatureSet)> {
    (unit_quat(), vec3(3.0), vec3(0.8), vec3(0.3), 0.2..1.0f64).prop_map(|(q_w_g, p_w_g, offset, tilt, half)| {
        let goal = GoalPose { p_w_g, q_w_g };
        let r = rotation_from_quaternion(&q_w_g);
        let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        let world = corners
            .iter()
            .map(|(a, b)| p_w_g + r.rotate(&Vector3::new(a * half, b * half, 2.0)))
            .collect();
        let fs = FeatureSet::new(world, &goal, [0, 1, 2]).unwrap();
        let p_w_c = p_w_g + r.rotate(&Vector3::new(offset.x, offset.y, -1.5 + offset.z));
        let q_w_c = q_w_g * UnitQuaternion::from_rotation_vector(&tilt);
        (CameraState::from_world_pose(goal, p_w_c, q_w_c, 0.0), fs)
    })
}

fn measure(state: &CameraState, fs: &FeatureSet) -> iclcam::scene::Measurement {
    let k = CameraIntrinsics::pinhole(500.0, 500.0, 320.0, 240.0).unwrap();
    synthesize_measurement(state, fs, &k, &NoiseModel::noiseless(), 1.5, 0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bearings_and_distances_reconstruct_features((state, fs) in scene()) {
        let m = measure(&state, &fs);
        let d = true_distances(&state, &fs);
        for (i, p) in state.features_camera(&fs).iter().enumerate() {
            prop_assert!((m.u_c_s[i] * d.d_c_s[i] - p).norm() <= 1e-12);
            // Goal position recovered from each feature.
            let g = p - state.r_c_g().rotate(&fs.features_goal()[i]);
            prop_assert!((g - state.p_c_g).norm() <= 1e-9);
        }
    }

    #[test]
    fn regressor_maps_goal_distance_to_camera_distances((state, fs) in scene()) {
        let m = measure(&state, &fs);
        let d = true_distances(&state, &fs);
        for i in 0..fs.len() {
            let y = regressor(&m, i).unwrap().y;
            prop_assert!((y.x * d.d_g_s[i] - d.d_c_s[i]).abs() <= 1e-9);
            prop_assert!((y.y * d.d_g_s[i] - d.d_c_g).abs() <= 1e-9);
        }
    }

    #[test]
    fn goal_distances_constant_along_motion((state, fs) in scene(), v in vec3(0.5), w in vec3(0.5)) {
        let d0 = true_distances(&state, &fs).d_g_s;
        let mut s = state;
        for _ in 0..50 {
            s = step_dynamics(&s, &v, &w, 1e-2);
            prop_assert!(s.frame_consistency_error() <= 1e-9);
        }
        for (a, b) in true_distances(&s, &fs).d_g_s.iter().zip(&d0) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_input_keeps_pose((state, _fs) in scene(), dt in 1e-4..0.1f64) {
        let s = step_dynamics(&state, &Vector3::zeros(), &Vector3::zeros(), dt);
        prop_assert!((s.p_c_g - state.p_c_g).norm() <= 1e-15);
        prop_assert_eq!(s.q_c_g, state.q_c_g);
    }

    #[test]
    fn riccati_residual_vanishes(q in spd(), r in spd(), gi in 0..3usize, n in vec3(1.0)) {
        prop_assume!(n.norm() > 1e-3);
        let gamma = [0.0, 5.0, 50.0][gi];
        let n = n.normalize();
        let g = build_gains(SymPosDef::new(q).unwrap(), SymPosDef::new(r).unwrap(), gamma, n).unwrap();
        let r_bar = r + n * n.transpose() * gamma;
        let s = g.s_c.matrix();
        prop_assert!((-s * r_bar.try_inverse().unwrap() * s + q).norm() <= 1e-10);
    }

    #[test]
    fn normal_velocity_shrinks_with_gamma_for_isotropic_weights(
        qs in 0.05..5.0f64,
        rs in 0.05..5.0f64,
        n in vec3(1.0),
        p in vec3(5.0),
    ) {
        prop_assume!(n.norm() > 1e-3);
        let n = n.normalize();
        let (q, r) = (SymPosDef::new(Matrix3::identity() * qs).unwrap(), SymPosDef::new(Matrix3::identity() * rs).unwrap());
        let mut last = f64::INFINITY;
        for gamma in [0.0, 5.0, 10.0, 15.0, 25.0, 50.0] {
            let g = build_gains(q, r, gamma, n).unwrap();
            let along = control_velocity(&g, &p).dot(&n).abs();
            prop_assert!(along <= last * (1.0 + 1e-9) + 1e-12);
            last = along;
        }
    }

    #[test]
    fn spd_square_root_squares_back(m in spd()) {
        let s = spd_sqrt(&SymPosDef::new(m).unwrap());
        let back = s.matrix() * s.matrix();
        prop_assert!((back - m).norm() <= 1e-10 * m.norm());
    }

    #[test]
    fn stack_sums_are_monotone_and_solve_consistent_data(
        ys in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..60),
        d in 0.1..10.0f64,
    ) {
        let policy = AdmissionPolicy { interval: 0.0, info_floor: 1e-12 };
        let mut s = HistoryStack::new(40, 1e-3, policy);
        for (k, (a, b)) in ys.iter().enumerate() {
            let y = Vector2::new(*a, *b);
            let next = stack_update(&s, &y, &(y * d), k as f64 * 0.1);
            prop_assert!(next.sigma_y >= s.sigma_y);
            prop_assert!(next.count <= next.capacity);
            s = next;
        }
        if let Ok(est) = s.batch_solve() {
            prop_assert!((est - d).abs() <= 1e-9 * d);
        }
    }
}

/// With cross-coupled control weights the normal velocity component is not
/// monotone in the penalty: raising it can redirect effort onto the normal.
#[test]
fn anisotropic_weights_can_break_normal_monotonicity() {
    let q = Matrix3::from_diagonal(&Vector3::new(0.33575493267263345, 0.05, 0.05));
    let r = Matrix3::new(0.0819679204665251, 0.1263715605915498, 0.0, 0.1263715605915498, 0.549556151707345, 0.0, 0.0, 0.0, 0.05);
    let n = Vector3::new(0.0, 0.281662309416428, 0.20568061294447104).normalize();
    let p = Vector3::new(0.0, -4.316609488496462, 3.5878345731631285);
    let along: Vec<f64> = [0.0, 5.0, 10.0, 15.0, 25.0, 50.0]
        .iter()
        .map(|&gamma| {
            let g = build_gains(SymPosDef::new(q).unwrap(), SymPosDef::new(r).unwrap(), gamma, n).unwrap();
            control_velocity(&g, &p).dot(&n).abs()
        })
        .collect();
    assert!(along.windows(2).any(|w| w[1] > w[0]), "{along:?}");
}
