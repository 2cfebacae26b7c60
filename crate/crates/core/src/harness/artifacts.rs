//! CSV tables, SVG figures and a JSON summary for runs and sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::{Error, Result};
use crate::harness::run::RunLog;
use crate::harness::svg::{Plot, Scale, Series};
use crate::harness::sweep::SweepResult;

pub const RUN_CSV: &str = "run.csv";
pub const RUN_SUMMARY: &str = "summary.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_PLOT: &str = "sweep_condition.svg";

fn num(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:.16e}");
}

/// Column names of [`run_csv`], in order.
pub fn run_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for kind in ["d", "d_hat", "d_tilde"] {
        h.extend((1..=n).map(|i| format!("{kind}_c_s{i}")));
        h.push(format!("{kind}_c_g"));
        h.extend((1..=n).map(|i| format!("{kind}_g_s{i}")));
    }
    for v in ["p_cg", "p_hat_cg", "v_c"] {
        h.extend(["x", "y", "z"].map(|a| format!("{v}_{a}")));
    }
    h.extend((1..=n).map(|i| format!("sigma_Y_s{i}")));
    h.extend((1..=n).map(|i| format!("tau_flag_s{i}")));
    h.extend(["L", "Jstar"].map(String::from));
    h.extend((1..=n).map(|i| format!("cond_s{i}")));
    h.push("cost".into());
    for v in ["p_cg_w", "p_hat_cg_w", "v_w", "v_w_literal"] {
        h.extend(["x", "y", "z"].map(|a| format!("{v}_{a}")));
    }
    h.extend(
        [
            "res_goal_identity",
            "res_regressor",
            "res_window",
            "quat_norm_err",
            "iss_threshold",
        ]
        .map(String::from),
    );
    h.extend((1..=n).map(|i| format!("batch_d_g_s{i}")));
    h
}

pub fn run_csv(log: &RunLog) -> String {
    let mut out = run_header(log.n_features).join(",");
    out.push('\n');
    for r in &log.rows {
        let _ = write!(out, "{:.16e}", r.t);
        for v in r.d_c_s.iter().chain([&r.d_c_g]).chain(&r.d_g_s) {
            num(&mut out, *v);
        }
        for v in r.d_hat_c_s.iter().chain([&r.d_hat_c_g]).chain(&r.d_hat_g_s) {
            num(&mut out, *v);
        }
        for v in r.d_tilde_c_s.iter().chain([&r.d_tilde_c_g]).chain(&r.d_tilde_g_s) {
            num(&mut out, *v);
        }
        for v in r.p_c_g.iter().chain(r.p_hat_c_g.iter()).chain(r.v_c.iter()) {
            num(&mut out, *v);
        }
        for v in &r.sigma_y {
            num(&mut out, *v);
        }
        for f in &r.tau_flag {
            out.push_str(if *f { ",1" } else { ",0" });
        }
        num(&mut out, r.lyapunov);
        num(&mut out, r.j_star);
        for v in &r.cond {
            num(&mut out, *v);
        }
        num(&mut out, r.cost);
        for v in r
            .p_c_g_world
            .iter()
            .chain(r.p_hat_c_g_world.iter())
            .chain(r.v_world.iter())
            .chain(r.v_world_literal.iter())
        {
            num(&mut out, *v);
        }
        for v in [
            r.goal_identity_residual,
            r.regressor_residual,
            r.window_residual,
            r.quaternion_norm_error,
            r.iss_threshold,
        ] {
            num(&mut out, v);
        }
        for v in &r.batch_d_g_s {
            num(&mut out, *v);
        }
        out.push('\n');
    }
    out
}

pub fn sweep_csv(s: &SweepResult) -> String {
    let mut out = String::from("gamma,avg_cond,final_pos_err,total_cost\n");
    for r in &s.rows {
        let _ = write!(out, "{:.16e}", r.gamma);
        match &r.outcome {
            Ok(m) => {
                num(&mut out, m.avg_cond);
                num(&mut out, m.final_pos_err);
                num(&mut out, m.total_cost);
            }
            Err(_) => out.push_str(",NaN,NaN,NaN"),
        }
        out.push('\n');
    }
    out
}

pub fn run_summary(log: &RunLog) -> String {
    let v = json!({
        "steps": log.rows.len(),
        "dt": log.dt,
        "gamma_c": log.gamma_c,
        "kappa": log.kappa,
        "tau": log.tau,
        "tau_all": log.tau_all(),
        "batch_d_g_s": log.batch_d_g_s,
        "final_position_error": log.final_position_error(),
        "total_cost": log.total_cost(),
        "average_condition": log.average_condition(),
        "aborted": log.aborted,
    });
    let mut s = serde_json::to_string_pretty(&v).expect("summary serializes");
    s.push('\n');
    s
}

fn time_series(log: &RunLog, f: impl Fn(&crate::harness::run::LogRow) -> f64) -> Vec<(f64, f64)> {
    log.rows.iter().map(|r| (r.t, f(r))).collect()
}

fn error_plot(log: &RunLog, title: &str, y_label: &str, pick: impl Fn(&crate::harness::run::LogRow, usize) -> f64, per_feature: bool) -> Plot {
    let series = if per_feature {
        (0..log.n_features)
            .map(|i| Series::new(format!("s{}", i + 1), time_series(log, |r| pick(r, i))))
            .collect()
    } else {
        vec![Series::new("error", time_series(log, |r| pick(r, 0)))]
    };
    Plot {
        title: title.into(),
        x_label: "t [s]".into(),
        y_label: y_label.into(),
        y_scale: Scale::Linear,
        series,
    }
}

fn xyz_plot(log: &RunLog, title: &str, pick: impl Fn(&crate::harness::run::LogRow) -> nalgebra::Vector3<f64>) -> Plot {
    Plot {
        title: title.into(),
        x_label: "t [s]".into(),
        y_label: "[m]".into(),
        y_scale: Scale::Linear,
        series: ["x", "y", "z"]
            .iter()
            .enumerate()
            .map(|(k, a)| Series::new(*a, time_series(log, |r| pick(r)[k])))
            .collect(),
    }
}

/// The figure set for a run, as `(file name, plot)`.
pub fn run_plots(log: &RunLog) -> Vec<(&'static str, Plot)> {
    vec![
        (
            "distance_error_camera_feature.svg",
            error_plot(log, "camera-to-feature distance error", "[m]", |r, i| r.d_tilde_c_s[i], true),
        ),
        (
            "distance_error_goal_feature.svg",
            error_plot(log, "goal-to-feature distance error", "[m]", |r, i| r.d_tilde_g_s[i], true),
        ),
        (
            "distance_error_camera_goal.svg",
            error_plot(log, "camera-to-goal distance error", "[m]", |r, _| r.d_tilde_c_g, false),
        ),
        ("goal_position.svg", xyz_plot(log, "goal position in the camera frame", |r| r.p_c_g)),
        (
            "goal_position_estimate.svg",
            xyz_plot(log, "estimated goal position in the camera frame", |r| r.p_hat_c_g),
        ),
        (
            "lyapunov_cost_to_go.svg",
            Plot {
                title: "observer Lyapunov function and cost-to-go".into(),
                x_label: "t [s]".into(),
                y_label: "value".into(),
                y_scale: Scale::Log,
                series: vec![
                    Series::new("L", time_series(log, |r| r.lyapunov)),
                    Series::new("J*", time_series(log, |r| r.j_star)),
                ],
            },
        ),
    ]
}

pub fn sweep_plot(s: &SweepResult) -> Plot {
    let points = s
        .rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|m| (r.gamma, m.avg_cond)))
        .collect();
    Plot {
        title: "average Gram condition number vs orthogonality gain".into(),
        x_label: "gamma".into(),
        y_label: "avg condition number".into(),
        y_scale: Scale::Linear,
        series: vec![Series::new("avg cond", points)],
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the run table, summary and figures into `dir`; returns the paths written.
pub fn emit_run(log: &RunLog, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mut written = vec![write(dir, RUN_CSV, &run_csv(log))?, write(dir, RUN_SUMMARY, &run_summary(log))?];
    for (name, plot) in run_plots(log) {
        written.push(write(dir, name, &plot.render())?);
    }
    Ok(written)
}

pub fn emit_sweep(s: &SweepResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    Ok(vec![
        write(dir, SWEEP_CSV, &sweep_csv(s))?,
        write(dir, SWEEP_PLOT, &sweep_plot(s).render())?,
    ])
}
