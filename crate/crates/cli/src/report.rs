//! Report files written by `run` and `semisup`.

use std::path::Path;

use claw_core::semisup::NullSplit;
use claw_core::{ClawRun, Covariate, Dataset, Threshold};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest decimal that parses back to the same double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Which pool entries became calibration and training data.
#[derive(Debug, Serialize)]
pub struct SplitManifest<'a> {
    pub pool_size: usize,
    pub calibration_indices: &'a [usize],
    pub train1_indices: &'a [usize],
    pub train2_indices: &'a [usize],
}

impl<'a> SplitManifest<'a> {
    pub fn new(split: &'a NullSplit, pool_size: usize) -> Self {
        Self {
            pool_size,
            calibration_indices: &split.calibration_indices,
            train1_indices: &split.train1_indices,
            train2_indices: &split.train2_indices,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub m: usize,
    pub alpha: f64,
    /// `null` when nothing is rejected at any finite threshold.
    pub tau: Threshold,
    pub fdp_bound: f64,
    pub mirror_count: usize,
    pub n_rejected: usize,
    pub rejected: &'a [usize],
    pub ties: &'a [usize],
    pub bandwidth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_split: Option<SplitManifest<'a>>,
}

impl<'a> RunReport<'a> {
    pub fn new(command: &'static str, config: &'a RunConfig, run: &'a ClawRun) -> Self {
        let d = &run.decision;
        Self {
            command,
            version: VERSION,
            seed: config.claw.seed,
            config,
            m: d.scores.len(),
            alpha: config.claw.alpha,
            tau: d.tau,
            fdp_bound: d.fdp_bound,
            mirror_count: d.mirror_count,
            n_rejected: d.rejected.len(),
            rejected: &d.rejected,
            ties: &d.ties,
            bandwidth: run.estimator_state.bandwidth,
            null_split: None,
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Per-unit rows in input order: inputs, both scores, e-value and decision.
pub fn write_units(path: &Path, data: &Dataset, run: &ClawRun) -> CliResult<()> {
    let d = &run.decision;
    let dim = match data.units.first().map(|u| &u.s) {
        Some(Covariate::Real(v)) => Some(v.len()),
        _ => None,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string(), "t".to_string()];
    match dim {
        Some(k) => header.extend((1..=k).map(|j| format!("s{j}"))),
        None => header.push("s".into()),
    }
    header.extend(["t_cal", "u", "u_cal", "evalue", "rejected"].map(String::from));
    let csv_err = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    w.write_record(&header).map_err(csv_err)?;

    let mut rejected = vec![false; data.m()];
    for &i in &d.rejected {
        rejected[i] = true;
    }
    for (i, unit) in data.units.iter().enumerate() {
        let mut row = vec![i.to_string(), fmt_f64(unit.t)];
        match &unit.s {
            Covariate::Label(l) => row.push(l.clone()),
            Covariate::Real(v) => row.extend(v.iter().map(|&x| fmt_f64(x))),
        }
        let (u, uc) = d.scores[i];
        row.extend([
            fmt_f64(unit.t_cal),
            fmt_f64(u),
            fmt_f64(uc),
            fmt_f64(d.evalues[i]),
            u8::from(rejected[i]).to_string(),
        ]);
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?;
    write_file(path, &bytes)
}
