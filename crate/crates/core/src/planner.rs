//! Observability-aware optimal velocity law.
//!
//! The running cost `pᵀQp + vᵀRv + γ⟨v, n⟩²` penalizes camera motion along
//! the feature-plane normal. With linear position dynamics the cost-to-go is
//! `J*(p) = pᵀSp` where `S` solves `-S R̄⁻¹ S + Q = 0`, `R̄ = R + γ n nᵀ`,
//! and the optimal camera velocity is `v_c = K p` with `K = R̄⁻¹ S`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{spd_sqrt, RotationMatrix, SymPosDef, UnitQuaternion};
use crate::observer::ObserverState;
use crate::scene::{FeatureSet, Measurement};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerGains {
    pub q_c: SymPosDef,
    pub r_c: SymPosDef,
    pub gamma_c: f64,
    pub n_s: Vector3<f64>,
    pub n_mat: Matrix3<f64>,
    pub r_bar: SymPosDef,
    pub s_c: SymPosDef,
    pub k_s: Matrix3<f64>,
    /// Extreme eigenvalues of `Γ_s = S R⁻¹ S`.
    pub gamma_s_min: f64,
    pub gamma_s_max: f64,
}

impl PlannerGains {
    /// Frobenius norm of `-S R̄⁻¹ S + Q`.
    pub fn riccati_residual(&self) -> f64 {
        let s = self.s_c.matrix();
        (-(s * self.r_bar.inverse() * s) + self.q_c.matrix()).norm()
    }

    /// `Γ_s = S R⁻¹ S`.
    pub fn gamma_s(&self) -> Matrix3<f64> {
        let s = self.s_c.matrix();
        s * self.r_c.inverse() * s
    }

    /// Radius beyond which `J*` must decrease for a given camera-to-goal error.
    pub fn iss_threshold(&self, d_tilde_c_g: f64) -> f64 {
        (2.0 * self.gamma_s_max / self.gamma_s_min).sqrt() * d_tilde_c_g.abs()
    }
}

pub fn build_gains(q_c: SymPosDef, r_c: SymPosDef, gamma_c: f64, n_s: Vector3<f64>) -> Result<PlannerGains> {
    if !(gamma_c >= 0.0 && gamma_c.is_finite()) {
        return Err(Error::validation("planner.gamma_c", "must be a finite non-negative number"));
    }
    if (n_s.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::validation("planner.n_s", "plane normal must be a unit vector"));
    }
    let n_mat = n_s * n_s.transpose();
    let r_bar = SymPosDef::new(r_c.matrix() + n_mat * gamma_c)?;
    let r_bar_half = spd_sqrt(&r_bar);
    let r_bar_neg_half = r_bar_half.inverse();
    let inner = r_bar_neg_half * q_c.matrix() * r_bar_neg_half;
    let inner = SymPosDef::new((inner + inner.transpose()) * 0.5)?;
    let s = r_bar_half.matrix() * spd_sqrt(&inner).matrix() * r_bar_half.matrix();
    let s_c = SymPosDef::new((s + s.transpose()) * 0.5)?;
    let k_s = r_bar.inverse() * s_c.matrix();

    let gamma_s = s_c.matrix() * r_c.inverse() * s_c.matrix();
    let eig = SymmetricEigen::new((gamma_s + gamma_s.transpose()) * 0.5).eigenvalues;

    Ok(PlannerGains {
        q_c,
        r_c,
        gamma_c,
        n_s,
        n_mat,
        r_bar,
        s_c,
        k_s,
        gamma_s_min: eig.min(),
        gamma_s_max: eig.max(),
    })
}

/// Camera velocity command `v_c = K_s p̂_c_g`, expressed in the camera frame.
pub fn control_velocity(g: &PlannerGains, p_hat: &Vector3<f64>) -> Vector3<f64> {
    g.k_s * p_hat
}

/// Re-expresses a camera-frame velocity in the world frame, `R_w_c v_c`.
pub fn world_velocity(v_c: &Vector3<f64>, r_w_c: &RotationMatrix) -> Vector3<f64> {
    r_w_c.rotate(v_c)
}

/// The literal product `K_s R_w_c p̂_c_g`; differs from [`world_velocity`]
/// unless `K_s` commutes with `R_w_c`. Logged for comparison only.
pub fn world_velocity_literal(g: &PlannerGains, r_w_c: &RotationMatrix, p_hat: &Vector3<f64>) -> Vector3<f64> {
    g.k_s * r_w_c.rotate(p_hat)
}

/// How per-feature goal estimates are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalFusion {
    Mean,
    Anchor(usize),
}

/// Per-feature goal position `p̂_c_s - R_c_g p_g_s` with `p̂_c_s = d̂_c_s u_c_s`.
pub fn goal_estimate_for(obs: &ObserverState, m: &Measurement, fs: &FeatureSet, i: usize) -> Vector3<f64> {
    m.u_c_s[i] * obs.channels[i].d_hat_c_s - m.r_c_g.rotate(&fs.features_goal()[i])
}

pub fn goal_estimate(obs: &ObserverState, m: &Measurement, fs: &FeatureSet, fusion: GoalFusion) -> Vector3<f64> {
    match fusion {
        GoalFusion::Anchor(i) => goal_estimate_for(obs, m, fs, i),
        GoalFusion::Mean => {
            let n = fs.len();
            (0..n).map(|i| goal_estimate_for(obs, m, fs, i)).sum::<Vector3<f64>>() / n as f64
        }
    }
}

/// `pᵀQp + vᵀRv + γ⟨v, n⟩²`.
pub fn running_cost(g: &PlannerGains, p: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    let along = v.dot(&g.n_s);
    p.dot(&(g.q_c.matrix() * p)) + v.dot(&(g.r_c.matrix() * v)) + g.gamma_c * along * along
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerDiagnostics {
    pub j_star: f64,
    pub gamma_s_min: f64,
    pub gamma_s_max: f64,
    pub cost_accumulated: f64,
}

/// Cost-to-go and the spectral bounds of `Γ_s`; `cost_accumulated` is left
/// at zero for the caller to fill in.
pub fn diagnostics(g: &PlannerGains, p: &Vector3<f64>) -> PlannerDiagnostics {
    PlannerDiagnostics {
        j_star: p.dot(&(g.s_c.matrix() * p)),
        gamma_s_min: g.gamma_s_min,
        gamma_s_max: g.gamma_s_max,
        cost_accumulated: 0.0,
    }
}

/// Proportional attitude regulation `ω = -k sign(q0) q_v` driving `q_c_g` to identity.
pub fn orientation_feedback(q_c_g: &UnitQuaternion, gain: f64) -> Vector3<f64> {
    let sign = if q_c_g.scalar() < 0.0 { -1.0 } else { 1.0 };
    -q_c_g.vector() * (gain * sign)
}
