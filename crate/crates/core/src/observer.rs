//! Integral concurrent learning (ICL) distance observer.
//!
//! Each tracked feature owns a regressor `Y(t)` mapping the constant
//! goal-to-feature distance onto the camera-to-feature and camera-to-goal
//! distances, an integral window producing `(𝒴, 𝒰)` pairs over a delay `T`,
//! and a history stack accumulating `Σ𝒴ᵀ𝒴` and `Σ𝒴ᵀ𝒰`. Once the stack's
//! excitation exceeds `λ_τ` the update laws switch from open-loop integration
//! of the known distance derivatives to exponentially convergent correction.

use std::collections::VecDeque;

use nalgebra::{Matrix2, Matrix3x2, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::condition_number;
use crate::scene::Measurement;

/// Timestamps closer than this are treated as equal, seconds.
pub const TIME_EPS: f64 = 1e-9;

/// Smallest admissible singular value of `H = [u_c_s, -u_c_g]`.
pub const MIN_BEARING_SEPARATION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressorSample {
    pub t: f64,
    pub y: Vector2<f64>,
    pub h: Matrix3x2<f64>,
}

/// `Y = (HᵀH)⁻¹ Hᵀ R_c_g u_g_s` with `H = [u_c_s, -u_c_g]`.
pub fn regressor(m: &Measurement, i: usize) -> Result<RegressorSample> {
    let u_s = m.u_c_s[i];
    let u_g = m.u_c_g;
    let h = Matrix3x2::from_columns(&[u_s, -u_g]);
    let hth = h.transpose() * h;
    // Closed-form eigenvalues of the 2×2 Gram matrix.
    let mean = 0.5 * (hth[(0, 0)] + hth[(1, 1)]);
    let diff = 0.5 * (hth[(0, 0)] - hth[(1, 1)]);
    let lambda_min = mean - (diff * diff + hth[(0, 1)] * hth[(0, 1)]).sqrt();
    if !(lambda_min > MIN_BEARING_SEPARATION * MIN_BEARING_SEPARATION) {
        return Err(Error::DegenerateBearing { feature: i, t: m.t });
    }
    let rhs = h.transpose() * m.r_c_g.rotate(&m.u_g_s[i]);
    let det = hth[(0, 0)] * hth[(1, 1)] - hth[(0, 1)] * hth[(1, 0)];
    let y = Vector2::new(
        (hth[(1, 1)] * rhs.x - hth[(0, 1)] * rhs.y) / det,
        (hth[(0, 0)] * rhs.y - hth[(1, 0)] * rhs.x) / det,
    );
    Ok(RegressorSample { t: m.t, y, h })
}

/// Known distance derivatives `η = -[u_c_sᵀ; u_c_gᵀ] v_c`.
pub fn distance_rates(m: &Measurement, i: usize, v_c: &Vector3<f64>) -> Vector2<f64> {
    -Vector2::new(m.u_c_s[i].dot(v_c), m.u_c_g.dot(v_c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSample {
    pub t: f64,
    pub y: Vector2<f64>,
    /// Running integral of `η` from the start of the run.
    pub integral: Vector2<f64>,
}

/// Sliding buffer of regressor values and the running integral of `η`.
///
/// `𝒰(t)` is the difference of the running integral across the window, so
/// its accuracy is that of the quadrature used to accumulate the integral
/// (the observer's RK4 stages, i.e. Simpson's rule per step).
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralWindow {
    length: f64,
    t0: f64,
    buffer: VecDeque<WindowSample>,
}

impl IntegralWindow {
    pub fn new(length: f64, t0: f64) -> Self {
        Self {
            length,
            t0,
            buffer: VecDeque::new(),
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn samples(&self) -> impl Iterator<Item = &WindowSample> {
        self.buffer.iter()
    }

    /// Appends a sample; timestamps must be strictly increasing.
    pub fn push(&mut self, sample: WindowSample) {
        if let Some(last) = self.buffer.back() {
            assert!(sample.t > last.t, "window timestamps must increase ({} after {})", sample.t, last.t);
        }
        self.buffer.push_back(sample);
        // Keep exactly one sample at or before the window start.
        let start = sample.t - self.length;
        while self.buffer.len() > 2 && self.buffer[1].t <= start + TIME_EPS {
            self.buffer.pop_front();
        }
    }

    fn value_at(&self, t: f64) -> Option<(Vector2<f64>, Vector2<f64>)> {
        let first = self.buffer.front()?;
        let last = self.buffer.back()?;
        if t < first.t - TIME_EPS || t > last.t + TIME_EPS {
            return None;
        }
        let idx = self.buffer.partition_point(|s| s.t < t - TIME_EPS);
        let hi = self.buffer[idx.min(self.buffer.len() - 1)];
        if (hi.t - t).abs() <= TIME_EPS || idx == 0 {
            return Some((hi.y, hi.integral));
        }
        let lo = self.buffer[idx - 1];
        let w = (t - lo.t) / (hi.t - lo.t);
        Some((lo.y.lerp(&hi.y, w), lo.integral.lerp(&hi.integral, w)))
    }

    /// `(𝒴, 𝒰)` at time `t`; both zero while `t - t0 ≤ T`.
    pub fn pair(&self, t: f64) -> Result<(Vector2<f64>, Vector2<f64>)> {
        if t - self.t0 <= self.length + TIME_EPS {
            return Ok((Vector2::zeros(), Vector2::zeros()));
        }
        let start = t - self.length;
        let missing = || Error::InsufficientBuffer { start, end: t };
        let (y_now, i_now) = self.value_at(t).ok_or_else(missing)?;
        let (y_then, i_then) = self.value_at(start).ok_or_else(missing)?;
        Ok((y_now - y_then, i_now - i_then))
    }
}

/// Free-function form of [`IntegralWindow::pair`].
pub fn window_pair(w: &IntegralWindow, t: f64) -> Result<(Vector2<f64>, Vector2<f64>)> {
    w.pair(t)
}

/// When new `(𝒴, 𝒰)` pairs enter the stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissionPolicy {
    /// Minimum spacing between admitted samples, seconds.
    pub interval: f64,
    /// Samples with `𝒴ᵀ𝒴` at or below this carry no information.
    pub info_floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryStack {
    pub sigma_y: f64,
    pub sigma_u: f64,
    /// `Σ 𝒴𝒴ᵀ`, kept for conditioning diagnostics.
    pub gram2: Matrix2<f64>,
    pub count: usize,
    pub capacity: usize,
    pub lambda_tau: f64,
    pub tau_detected: Option<f64>,
    pub policy: AdmissionPolicy,
    next_admission: f64,
}

impl HistoryStack {
    pub fn new(capacity: usize, lambda_tau: f64, policy: AdmissionPolicy) -> Self {
        Self {
            sigma_y: 0.0,
            sigma_u: 0.0,
            gram2: Matrix2::zeros(),
            count: 0,
            capacity,
            lambda_tau,
            tau_detected: None,
            policy,
            next_admission: f64::NEG_INFINITY,
        }
    }

    pub fn is_full(&self) -> bool {
        self.count >= self.capacity
    }

    pub fn is_excited(&self) -> bool {
        self.tau_detected.is_some()
    }

    /// Offers a pair at time `t`; returns whether it was admitted.
    pub fn offer(&mut self, script_y: &Vector2<f64>, script_u: &Vector2<f64>, t: f64) -> bool {
        if self.is_full() || t + TIME_EPS < self.next_admission {
            return false;
        }
        let info = script_y.dot(script_y);
        if !(info > self.policy.info_floor) {
            return false;
        }
        self.sigma_y += info;
        self.sigma_u += script_y.dot(script_u);
        self.gram2 += script_y * script_y.transpose();
        self.count += 1;
        self.next_admission = t + self.policy.interval;
        if self.tau_detected.is_none() && self.sigma_y > self.lambda_tau {
            self.tau_detected = Some(t);
        }
        true
    }

    /// `Σ𝒴⁻¹ Σ𝒰`, available once the excitation threshold has been crossed.
    pub fn batch_solve(&self) -> Result<f64> {
        if !self.is_excited() {
            return Err(Error::NotYetExcited);
        }
        Ok(self.sigma_u / self.sigma_y)
    }

    pub fn gram_condition(&self) -> f64 {
        condition_number(&self.gram2)
    }
}

/// Pure form of [`HistoryStack::offer`].
pub fn stack_update(s: &HistoryStack, script_y: &Vector2<f64>, script_u: &Vector2<f64>, t: f64) -> HistoryStack {
    let mut next = *s;
    next.offer(script_y, script_u, t);
    next
}

pub fn batch_solve(s: &HistoryStack) -> Result<f64> {
    s.batch_solve()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
}

impl ObserverGains {
    pub fn new(kappa1: f64, kappa2: f64, kappa3: f64) -> Result<Self> {
        for (k, name) in [(kappa1, "kappa1"), (kappa2, "kappa2"), (kappa3, "kappa3")] {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::validation(format!("observer.{name}"), "gain must be positive"));
            }
        }
        Ok(Self { kappa1, kappa2, kappa3 })
    }

    /// `κ = min{κ₁, κ₂, κ₃}`, the guaranteed decay rate.
    pub fn min(&self) -> f64 {
        self.kappa1.min(self.kappa2).min(self.kappa3)
    }
}

/// How the single camera-to-goal estimate is driven from per-feature data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalDistanceFusion {
    /// Use the regressor and stack of one feature.
    Anchor(usize),
    /// Average the per-feature `ν₂` once every stack is excited.
    Average,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverConfig {
    pub window: f64,
    pub stack_capacity: usize,
    pub lambda_tau: f64,
    pub policy: AdmissionPolicy,
    pub fusion: GoalDistanceFusion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialEstimates {
    pub d_c_s: Vec<f64>,
    pub d_c_g: f64,
    pub d_g_s: Vec<f64>,
}

impl InitialEstimates {
    pub fn zeros(n: usize) -> Self {
        Self {
            d_c_s: vec![0.0; n],
            d_c_g: 0.0,
            d_g_s: vec![0.0; n],
        }
    }
}

/// Per-feature observer channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureChannel {
    pub d_hat_c_s: f64,
    pub d_hat_g_s: f64,
    pub integral: Vector2<f64>,
    pub window: IntegralWindow,
    pub stack: HistoryStack,
    /// Most recent `(𝒴, 𝒰)` produced by the window.
    pub last_pair: (Vector2<f64>, Vector2<f64>),
    pub last_regressor: Vector2<f64>,
}

/// Measurements at the start, midpoint and end of one observer step.
///
/// The RK4 stages of the update laws are evaluated at these instants.
/// [`StageMeasurements::held`] reproduces a zero-order hold.
#[derive(Debug, Clone, Copy)]
pub struct StageMeasurements<'a> {
    pub start: &'a Measurement,
    pub mid: &'a Measurement,
    pub end: &'a Measurement,
}

impl<'a> StageMeasurements<'a> {
    pub fn held(m: &'a Measurement) -> Self {
        Self { start: m, mid: m, end: m }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub t: f64,
    pub d_hat_c_g: f64,
    pub channels: Vec<FeatureChannel>,
    pub config: ObserverConfig,
}

struct StageInput {
    y: Vec<Vector2<f64>>,
    eta: Vec<Vector2<f64>>,
}

fn stage_input(m: &Measurement, v_c: &Vector3<f64>) -> Result<StageInput> {
    let n = m.u_c_s.len();
    let mut y = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    for i in 0..n {
        y.push(regressor(m, i)?.y);
        eta.push(distance_rates(m, i, v_c));
    }
    Ok(StageInput { y, eta })
}

impl ObserverState {
    /// Starts the observer at the first measurement.
    pub fn new(m0: &Measurement, config: ObserverConfig, init: &InitialEstimates) -> Result<Self> {
        let n = m0.u_c_s.len();
        if init.d_c_s.len() != n || init.d_g_s.len() != n {
            return Err(Error::validation(
                "observer.initial_estimates",
                format!("expected {n} per-feature estimates"),
            ));
        }
        if let GoalDistanceFusion::Anchor(a) = config.fusion {
            if a >= n {
                return Err(Error::validation("observer.anchor_feature", "anchor index out of range"));
            }
        }
        let mut channels = Vec::with_capacity(n);
        for i in 0..n {
            let y = regressor(m0, i)?.y;
            let mut window = IntegralWindow::new(config.window, m0.t);
            window.push(WindowSample {
                t: m0.t,
                y,
                integral: Vector2::zeros(),
            });
            channels.push(FeatureChannel {
                d_hat_c_s: init.d_c_s[i],
                d_hat_g_s: init.d_g_s[i],
                integral: Vector2::zeros(),
                window,
                stack: HistoryStack::new(config.stack_capacity, config.lambda_tau, config.policy),
                last_pair: (Vector2::zeros(), Vector2::zeros()),
                last_regressor: y,
            });
        }
        Ok(Self {
            t: m0.t,
            d_hat_c_g: init.d_c_g,
            channels,
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn d_hat_c_s(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.d_hat_c_s).collect()
    }

    pub fn d_hat_g_s(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.d_hat_g_s).collect()
    }

    /// Whether the camera-to-goal update is in its post-excitation branch.
    pub fn goal_distance_excited(&self) -> bool {
        match self.config.fusion {
            GoalDistanceFusion::Anchor(a) => self.channels[a].stack.is_excited(),
            GoalDistanceFusion::Average => self.channels.iter().all(|c| c.stack.is_excited()),
        }
    }

    /// Time by which every update law has switched branch.
    pub fn tau_all(&self) -> Option<f64> {
        self.channels
            .iter()
            .map(|c| c.stack.tau_detected)
            .try_fold(f64::NEG_INFINITY, |acc, t| t.map(|t| acc.max(t)))
    }

    /// One step of the update laws over `[t, t + dt]`, followed by the window
    /// and history-stack update at `t + dt`.
    pub fn step(
        &self,
        stages: &StageMeasurements<'_>,
        v_c: &Vector3<f64>,
        gains: &ObserverGains,
        dt: f64,
    ) -> Result<ObserverState> {
        let n = self.len();
        let s0 = stage_input(stages.start, v_c)?;
        let s_mid = stage_input(stages.mid, v_c)?;
        let s1 = stage_input(stages.end, v_c)?;

        // Batch estimates are frozen over the step; the stack changes only at its end.
        let theta: Vec<Option<f64>> = self.channels.iter().map(|c| c.stack.batch_solve().ok()).collect();
        let goal_excited = self.goal_distance_excited();

        // State layout: [d_c_s, d_g_s, ∫η₁, ∫η₂] per feature, then d_c_g.
        let dim = 4 * n + 1;
        let mut x = vec![0.0; dim];
        for (i, c) in self.channels.iter().enumerate() {
            x[4 * i] = c.d_hat_c_s;
            x[4 * i + 1] = c.d_hat_g_s;
            x[4 * i + 2] = c.integral.x;
            x[4 * i + 3] = c.integral.y;
        }
        x[4 * n] = self.d_hat_c_g;

        let rhs = |x: &[f64], s: &StageInput, out: &mut [f64]| {
            for i in 0..n {
                let eta = s.eta[i];
                let mut dcs = eta.x;
                let mut dgs = 0.0;
                if let Some(th) = theta[i] {
                    dcs += gains.kappa1 * (s.y[i].x * th - x[4 * i]);
                    dgs = gains.kappa3 * (th - x[4 * i + 1]);
                }
                out[4 * i] = dcs;
                out[4 * i + 1] = dgs;
                out[4 * i + 2] = eta.x;
                out[4 * i + 3] = eta.y;
            }
            // η₂ is the same for every feature; it depends only on u_c_g.
            let mut dcg = s.eta[0].y;
            if goal_excited {
                let nu2 = match self.config.fusion {
                    GoalDistanceFusion::Anchor(a) => s.y[a].y * theta[a].expect("anchor excited"),
                    GoalDistanceFusion::Average => {
                        (0..n).map(|i| s.y[i].y * theta[i].expect("all excited")).sum::<f64>() / n as f64
                    }
                };
                dcg += gains.kappa2 * (nu2 - x[4 * n]);
            }
            out[4 * n] = dcg;
        };

        let mut k1 = vec![0.0; dim];
        let mut k2 = vec![0.0; dim];
        let mut k3 = vec![0.0; dim];
        let mut k4 = vec![0.0; dim];
        let mut tmp = vec![0.0; dim];
        rhs(&x, &s0, &mut k1);
        for j in 0..dim {
            tmp[j] = x[j] + 0.5 * dt * k1[j];
        }
        rhs(&tmp, &s_mid, &mut k2);
        for j in 0..dim {
            tmp[j] = x[j] + 0.5 * dt * k2[j];
        }
        rhs(&tmp, &s_mid, &mut k3);
        for j in 0..dim {
            tmp[j] = x[j] + dt * k3[j];
        }
        rhs(&tmp, &s1, &mut k4);
        for j in 0..dim {
            x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }

        let t_end = self.t + dt;
        let mut next = self.clone();
        next.t = t_end;
        next.d_hat_c_g = x[4 * n];
        for (i, c) in next.channels.iter_mut().enumerate() {
            c.d_hat_c_s = x[4 * i];
            c.d_hat_g_s = x[4 * i + 1];
            c.integral = Vector2::new(x[4 * i + 2], x[4 * i + 3]);
            c.last_regressor = s1.y[i];
            c.window.push(WindowSample {
                t: t_end,
                y: s1.y[i],
                integral: c.integral,
            });
            let (sy, su) = c.window.pair(t_end)?;
            c.last_pair = (sy, su);
            c.stack.offer(&sy, &su, t_end);
        }
        Ok(next)
    }
}

/// Free-function form of [`ObserverState::step`].
pub fn observer_step(
    st: &ObserverState,
    stages: &StageMeasurements<'_>,
    v_c: &Vector3<f64>,
    gains: &ObserverGains,
    dt: f64,
) -> Result<ObserverState> {
    st.step(stages, v_c, gains, dt)
}
