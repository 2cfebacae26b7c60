//! Orthogonality-gain sweep over independent closed-loop runs.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::ScenarioConfig;
use crate::harness::run::run;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepMetrics {
    pub avg_cond: f64,
    pub final_pos_err: f64,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    /// Metrics, or the message of the error that stopped this gamma's run.
    pub outcome: std::result::Result<SweepMetrics, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.outcome.is_err())
    }
}

/// Runs the scenario once per gamma with everything else (including the
/// seed) unchanged. Rows keep the order of `gammas`.
pub fn sweep_gamma(cfg: &ScenarioConfig, gammas: &[f64]) -> Result<SweepResult> {
    if gammas.is_empty() {
        return Err(Error::validation("gammas", "at least one value is required"));
    }
    if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::validation("gammas", format!("values must be finite and >= 0, got {g}")));
    }
    cfg.validate()?;
    let rows = gammas
        .par_iter()
        .map(|&gamma| {
            let mut c = cfg.clone();
            c.planner.gamma_c = gamma;
            let outcome = run(&c)
                .map(|log| SweepMetrics {
                    avg_cond: log.average_condition(),
                    final_pos_err: log.final_position_error(),
                    total_cost: log.total_cost(),
                })
                .map_err(|f| f.to_string());
            SweepRow { gamma, outcome }
        })
        .collect();
    Ok(SweepResult { rows })
}
