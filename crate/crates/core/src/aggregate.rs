//! Weighted averaging of generalized e-values across procedures, followed by e-BH.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ClawError, Result};
use crate::mirror::ebh;

/// `K x m` e-values with one positive weight per source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluePanel {
    rows: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl EvaluePanel {
    pub fn new(rows: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(ClawError::EmptyInput);
        }
        if weights.len() != rows.len() {
            return Err(ClawError::DimensionMismatch(format!(
                "{} sources but {} weights",
                rows.len(),
                weights.len()
            )));
        }
        let m = rows[0].len();
        if let Some(k) = rows.iter().position(|r| r.len() != m) {
            return Err(ClawError::DimensionMismatch(format!(
                "source {k} has {} e-values, expected {m}",
                rows[k].len()
            )));
        }
        for row in &rows {
            if let Some(&value) = row.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
                return Err(ClawError::InvalidParameter {
                    name: "e-value",
                    value,
                    range: "finite and >= 0",
                });
            }
        }
        if let Some(index) = weights.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ClawError::NonPositiveWeight { index });
        }
        Ok(Self { rows, weights })
    }

    /// Panel with unit weights.
    pub fn unweighted(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        Self::new(rows, vec![1.0; k])
    }

    pub fn sources(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.rows[0].len()
    }
}

/// `ē_i = sum_k v_k e_i^(k) / sum_k v_k`.
pub fn aggregate_evalues(panel: &EvaluePanel) -> Vec<f64> {
    let total: f64 = panel.weights.iter().sum();
    (0..panel.m())
        .map(|i| {
            panel
                .rows
                .iter()
                .zip(&panel.weights)
                .map(|(row, v)| v * row[i])
                .sum::<f64>()
                / total
        })
        .collect()
}

/// Averages the panel and applies e-BH at `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrativeResult {
    pub evalues: Vec<f64>,
    pub rejected: Vec<usize>,
}

pub fn integrate(panel: &EvaluePanel, alpha: f64) -> IntegrativeResult {
    let evalues = aggregate_evalues(panel);
    let rejected = ebh(&evalues, alpha);
    IntegrativeResult { evalues, rejected }
}

/// Runs `K` e-value producing procedures concurrently (each at its own level
/// `alphas[k]`), weights their e-values by `weights`, and applies e-BH at `alpha`.
pub fn integrative_claw<F>(
    sources: usize,
    alphas: &[f64],
    weights: &[f64],
    alpha: f64,
    run: F,
) -> Result<IntegrativeResult>
where
    F: Fn(usize, f64) -> Result<Vec<f64>> + Sync,
{
    if alphas.len() != sources {
        return Err(ClawError::DimensionMismatch(format!(
            "{sources} sources but {} levels",
            alphas.len()
        )));
    }
    let rows = (0..sources)
        .into_par_iter()
        .map(|k| run(k, alphas[k]))
        .collect::<Result<Vec<_>>>()?;
    Ok(integrate(&EvaluePanel::new(rows, weights.to_vec())?, alpha))
}
