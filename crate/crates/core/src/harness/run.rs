//! Fixed-step closed loop: measure, observe, estimate the goal, plan, actuate.

use std::fmt;

use nalgebra::Vector3;

use crate::error::Error;
use crate::geometry::quaternion_from_rotation;
use crate::harness::config::ScenarioConfig;
use crate::observer::{InitialEstimates, ObserverGains, ObserverState, StageMeasurements};
use crate::planner::{
    build_gains, control_velocity, goal_estimate, orientation_feedback, running_cost, world_velocity,
    world_velocity_literal, GoalFusion, PlannerGains,
};
use crate::scene::{
    step_dynamics, synthesize_measurement, true_distances, CameraIntrinsics, CameraState, FeatureSet, Measurement,
    NoiseModel,
};

/// One logged instant. Distance vectors are indexed by feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub d_c_s: Vec<f64>,
    pub d_c_g: f64,
    pub d_g_s: Vec<f64>,
    pub d_hat_c_s: Vec<f64>,
    pub d_hat_c_g: f64,
    pub d_hat_g_s: Vec<f64>,
    pub d_tilde_c_s: Vec<f64>,
    pub d_tilde_c_g: f64,
    pub d_tilde_g_s: Vec<f64>,
    pub p_c_g: Vector3<f64>,
    pub p_hat_c_g: Vector3<f64>,
    /// Camera-frame command applied from this instant on.
    pub v_c: Vector3<f64>,
    pub sigma_y: Vec<f64>,
    pub tau_flag: Vec<bool>,
    /// `½‖ϑ̃‖²` over every distance error.
    pub lyapunov: f64,
    pub j_star: f64,
    pub cond: Vec<f64>,
    /// Running cost integrated up to `t`.
    pub cost: f64,
    pub p_c_g_world: Vector3<f64>,
    pub p_hat_c_g_world: Vector3<f64>,
    pub v_world: Vector3<f64>,
    pub v_world_literal: Vector3<f64>,
    /// Largest `|p_c_s - R_c_g p_g_s - p_c_g|` over features, on true quantities.
    pub goal_identity_residual: f64,
    /// Largest `|Y d_g_s - (d_c_s, d_c_g)|` over features.
    pub regressor_residual: f64,
    /// Largest `|𝒴 d_g_s - 𝒰|` over features.
    pub window_residual: f64,
    /// Largest deviation of a tracked quaternion norm from one.
    pub quaternion_norm_error: f64,
    pub iss_threshold: f64,
    /// Batch estimate `Σ_𝒰/Σ_𝒴` per feature; NaN before excitation.
    pub batch_d_g_s: Vec<f64>,
}

impl LogRow {
    /// Norm of the stacked distance-error vector.
    pub fn error_norm(&self) -> f64 {
        (2.0 * self.lyapunov).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub n_features: usize,
    pub dt: f64,
    pub kappa: f64,
    pub gamma_c: f64,
    pub rows: Vec<LogRow>,
    /// Excitation time of each feature's stack, if reached.
    pub tau: Vec<Option<f64>>,
    /// Batch estimates of `d_g_s` from the final stacks.
    pub batch_d_g_s: Vec<Option<f64>>,
    /// Cause of an early stop; the rows up to the failure are kept.
    pub aborted: Option<String>,
}

impl RunLog {
    /// Time at which every feature's stack has been excited.
    pub fn tau_all(&self) -> Option<f64> {
        self.tau.iter().try_fold(f64::NEG_INFINITY, |acc, t| t.map(|t| acc.max(t)))
    }

    pub fn final_position_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.p_c_g.norm())
    }

    pub fn total_cost(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cost)
    }

    /// Mean Gram condition number over every feature's post-excitation rows.
    /// Rank-deficient (infinite) entries are skipped.
    pub fn average_condition(&self) -> f64 {
        let (mut sum, mut count) = (0.0, 0usize);
        for r in &self.rows {
            for i in 0..self.n_features {
                if r.tau_flag[i] && r.cond[i].is_finite() {
                    sum += r.cond[i];
                    count += 1;
                }
            }
        }
        if count == 0 {
            f64::NAN
        } else {
            sum / count as f64
        }
    }
}

/// A run that stopped early. `partial` holds everything logged before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Option<RunLog>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.partial {
            Some(log) => write!(f, "{} (after {} logged steps)", self.error, log.rows.len()),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self { error, partial: None }
    }
}

/// Everything derived once from a validated config.
struct Plant {
    features: FeatureSet,
    intrinsics: CameraIntrinsics,
    noise: NoiseModel,
    fov: f64,
    gains: PlannerGains,
    observer_gains: ObserverGains,
    fusion: GoalFusion,
    orientation_gain: f64,
}

impl Plant {
    fn measure(&self, state: &CameraState, sample: u64) -> Result<Measurement, Error> {
        synthesize_measurement(state, &self.features, &self.intrinsics, &self.noise, self.fov, sample)
    }

    fn command(&self, obs: &ObserverState, m: &Measurement) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let p_hat = goal_estimate(obs, m, &self.features, self.fusion);
        let v = control_velocity(&self.gains, &p_hat);
        let omega = if self.orientation_gain > 0.0 {
            orientation_feedback(&quaternion_from_rotation(&m.r_c_g), self.orientation_gain)
        } else {
            Vector3::zeros()
        };
        (p_hat, v, omega)
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunLog, RunFailure> {
    cfg.validate()?;
    let goal = cfg.goal_pose();
    let features = cfg.feature_set()?;
    let initial = CameraState::from_world_pose(goal, Vector3::from(cfg.scene.camera_position), cfg.camera_orientation(), 0.0);
    // The plane normal is fixed in the world; the planner uses it in the initial camera frame.
    let n_s = initial.r_w_c().transpose().rotate(&features.normal_world());
    let plant = Plant {
        intrinsics: cfg.intrinsics()?,
        noise: cfg.noise_model(),
        fov: cfg.scene.fov_half_angle_deg.to_radians(),
        gains: build_gains(cfg.q_c(), cfg.r_c(), cfg.planner.gamma_c, n_s)?,
        observer_gains: cfg.observer_gains(),
        fusion: cfg.goal_fusion(),
        orientation_gain: cfg.planner.orientation_gain,
        features,
    };
    let n = plant.features.len();
    let dt = cfg.simulation.dt;
    let steps = cfg.steps();

    let truth0 = true_distances(&initial, &plant.features);
    let init = cfg.initial_estimates(&InitialEstimates {
        d_c_s: truth0.d_c_s,
        d_c_g: truth0.d_c_g,
        d_g_s: truth0.d_g_s,
    });

    let mut log = RunLog {
        n_features: n,
        dt,
        kappa: plant.observer_gains.min(),
        gamma_c: cfg.planner.gamma_c,
        rows: Vec::with_capacity(steps),
        tau: vec![None; n],
        batch_d_g_s: vec![None; n],
        aborted: None,
    };

    let mut state = initial;
    let mut m = plant.measure(&state, 0)?;
    let mut obs = ObserverState::new(&m, cfg.observer_config(), &init)?;
    let (_, mut v, mut omega) = plant.command(&obs, &m);
    let mut cost = 0.0;

    for k in 0..steps {
        let step = (|| -> Result<_, Error> {
            let mut mid_state = step_dynamics(&state, &v, &omega, 0.5 * dt);
            mid_state.t = (k as f64 + 0.5) * dt;
            let m_mid = plant.measure(&mid_state, 2 * k as u64 + 1)?;
            let mut next = step_dynamics(&state, &v, &omega, dt);
            next.t = (k + 1) as f64 * dt;
            let m_next = plant.measure(&next, 2 * k as u64 + 2)?;
            let stages = StageMeasurements {
                start: &m,
                mid: &m_mid,
                end: &m_next,
            };
            let obs_next = obs.step(&stages, &v, &plant.observer_gains, dt)?;
            Ok((next, m_next, obs_next))
        })();
        let (next, m_next, obs_next) = match step {
            Ok(s) => s,
            Err(error) => {
                finish(&mut log, &obs);
                log.aborted = Some(error.to_string());
                return Err(RunFailure {
                    error,
                    partial: Some(log),
                });
            }
        };
        // Trapezoidal accumulation of the running cost along the true trajectory.
        let c0 = running_cost(&plant.gains, &state.p_c_g, &v);
        let c1 = running_cost(&plant.gains, &next.p_c_g, &v);
        cost += 0.5 * dt * (c0 + c1);

        state = next;
        m = m_next;
        obs = obs_next;
        let (p_hat, v_next, omega_next) = plant.command(&obs, &m);
        v = v_next;
        omega = omega_next;
        log.rows.push(row(&plant, &state, &obs, &p_hat, &v, cost));
    }
    finish(&mut log, &obs);
    Ok(log)
}

fn finish(log: &mut RunLog, obs: &ObserverState) {
    log.tau = obs.channels.iter().map(|c| c.stack.tau_detected).collect();
    log.batch_d_g_s = obs.channels.iter().map(|c| c.stack.batch_solve().ok()).collect();
}

fn row(plant: &Plant, state: &CameraState, obs: &ObserverState, p_hat: &Vector3<f64>, v: &Vector3<f64>, cost: f64) -> LogRow {
    let fs = &plant.features;
    let truth = true_distances(state, fs);
    let d_hat_c_s = obs.d_hat_c_s();
    let d_hat_g_s = obs.d_hat_g_s();
    let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
    let d_tilde_c_s = sub(&truth.d_c_s, &d_hat_c_s);
    let d_tilde_g_s = sub(&truth.d_g_s, &d_hat_g_s);
    let d_tilde_c_g = truth.d_c_g - obs.d_hat_c_g;
    let lyapunov = 0.5
        * (d_tilde_c_s.iter().chain(&d_tilde_g_s).map(|e| e * e).sum::<f64>() + d_tilde_c_g * d_tilde_c_g);

    let r_c_g = state.r_c_g();
    let r_w_c = state.r_w_c();
    let features_c = state.features_camera(fs);
    let mut goal_identity_residual: f64 = 0.0;
    let mut regressor_residual: f64 = 0.0;
    let mut window_residual: f64 = 0.0;
    for (i, c) in obs.channels.iter().enumerate() {
        let p_g = fs.features_goal()[i];
        goal_identity_residual = goal_identity_residual.max((features_c[i] - r_c_g.rotate(&p_g) - state.p_c_g).norm());
        let y = c.last_regressor;
        let d = truth.d_g_s[i];
        regressor_residual = regressor_residual
            .max((y.x * d - truth.d_c_s[i]).abs())
            .max((y.y * d - truth.d_c_g).abs());
        let (sy, su) = c.last_pair;
        window_residual = window_residual.max((sy * d - su).abs().max());
    }
    let quaternion_norm_error = (state.q_c_g.norm() - 1.0).abs().max((state.q_w_c.norm() - 1.0).abs());

    LogRow {
        t: state.t,
        d_c_s: truth.d_c_s,
        d_c_g: truth.d_c_g,
        d_g_s: truth.d_g_s,
        d_hat_c_s,
        d_hat_c_g: obs.d_hat_c_g,
        d_hat_g_s,
        d_tilde_c_s,
        d_tilde_c_g,
        d_tilde_g_s,
        p_c_g: state.p_c_g,
        p_hat_c_g: *p_hat,
        v_c: *v,
        sigma_y: obs.channels.iter().map(|c| c.stack.sigma_y).collect(),
        tau_flag: obs.channels.iter().map(|c| c.stack.is_excited()).collect(),
        lyapunov,
        j_star: state.p_c_g.dot(&(plant.gains.s_c.matrix() * state.p_c_g)),
        cond: obs.channels.iter().map(|c| c.stack.gram_condition()).collect(),
        cost,
        p_c_g_world: r_w_c.rotate(&state.p_c_g),
        p_hat_c_g_world: r_w_c.rotate(p_hat),
        v_world: world_velocity(v, &r_w_c),
        v_world_literal: world_velocity_literal(&plant.gains, &r_w_c, p_hat),
        goal_identity_residual,
        regressor_residual,
        window_residual,
        quaternion_norm_error,
        iss_threshold: plant.gains.iss_threshold(d_tilde_c_g),
        batch_d_g_s: obs.channels.iter().map(|c| c.stack.batch_solve().unwrap_or(f64::NAN)).collect(),
    }
}
