//! End-to-end CLAW with a known null distribution.

use rayon::prelude::*;

use crate::error::{ClawError, Result};
use crate::estimators::{
    clamp_proportion, clfdr_score, conformal_density, conformal_density_pair, conformal_proportion,
    pvalue_from_null, r_transform, silverman_bandwidth, EstimatorState, Kde, NullModel,
    ScoreFunction, TabulatedKde,
};
use crate::mirror::{decide, DecisionResult};
use crate::model::{
    validate_dataset, BandwidthRule, ClawConfig, CovariateColumn, Dataset, WeightSpec,
};
use crate::weights::{group_weights, kernel_weights, Norm, WeightMatrix};

#[derive(Debug, Clone)]
pub struct ClawRun {
    pub config: ClawConfig,
    pub weight_matrix: WeightMatrix,
    pub estimator_state: EstimatorState,
    pub decision: DecisionResult,
}

/// Builds `W` from the configured weight spec and the dataset covariates.
pub fn build_weights(data: &Dataset, spec: &WeightSpec) -> Result<WeightMatrix> {
    match (spec, data.covariate_column()?) {
        (WeightSpec::Group, CovariateColumn::Categorical { codes, .. }) => group_weights(&codes),
        (WeightSpec::Gaussian { scale }, CovariateColumn::Real { dim, coords }) => {
            let norm = if dim == 1 { Norm::Abs } else { Norm::Euclidean };
            kernel_weights(&coords, dim, *scale, norm)
        }
        (WeightSpec::Custom, _) => Err(ClawError::InvalidConfig {
            field: "weights",
            reason: "custom weights must be passed explicitly".into(),
        }),
        (WeightSpec::Group, _) => Err(ClawError::InvalidConfig {
            field: "weights",
            reason: "group weights need categorical covariates".into(),
        }),
        (WeightSpec::Gaussian { .. }, _) => Err(ClawError::InvalidConfig {
            field: "weights",
            reason: "gaussian weights need real covariates".into(),
        }),
    }
}

/// Bandwidth from the configured rule; Silverman uses all `2m` pooled values.
pub fn pooled_bandwidth(test: &[f64], calib: &[f64], rule: &BandwidthRule) -> Result<f64> {
    match rule {
        BandwidthRule::Fixed { h } => Ok(*h),
        BandwidthRule::Silverman => {
            let pooled: Vec<f64> = test.iter().chain(calib).copied().collect();
            silverman_bandwidth(&pooled)
        }
    }
}

/// Per-unit proportion estimates, computed once per distinct row for block matrices.
pub(crate) fn proportions(
    p_test: &[f64],
    p_cal: &[f64],
    w: &WeightMatrix,
    lambda: f64,
) -> Result<Vec<f64>> {
    if let Some((codes, members)) = w.blocks() {
        let per_group = members
            .iter()
            .map(|g| conformal_proportion(g[0], p_test, p_cal, w, lambda))
            .collect::<Result<Vec<_>>>()?;
        return Ok(codes.iter().map(|&c| per_group[c]).collect());
    }
    (0..w.m())
        .into_par_iter()
        .map(|i| conformal_proportion(i, p_test, p_cal, w, lambda))
        .collect()
}

pub(crate) fn row_masses(w: &WeightMatrix) -> Vec<f64> {
    if let Some((codes, members)) = w.blocks() {
        return codes.iter().map(|&c| members[c].len() as f64).collect();
    }
    (0..w.m()).into_par_iter().map(|i| w.row_sum(i)).collect()
}

/// The locally weighted conformal density `f̂**`, evaluated per unit.
pub(crate) enum LocalDensity<'a> {
    Weighted {
        test: &'a [f64],
        calib: &'a [f64],
        w: &'a WeightMatrix,
        h: f64,
    },
    /// Block weights: every unit of a group shares the pooled group KDE.
    Grouped {
        codes: Vec<usize>,
        kdes: Vec<TabulatedKde>,
    },
}

impl<'a> LocalDensity<'a> {
    pub(crate) fn new(
        test: &'a [f64],
        calib: &'a [f64],
        w: &'a WeightMatrix,
        h: f64,
    ) -> Result<Self> {
        if let Some((codes, members)) = w.blocks() {
            let kdes = members
                .par_iter()
                .map(|g| {
                    let pts: Vec<f64> = g.iter().flat_map(|&j| [test[j], calib[j]]).collect();
                    Kde::new(&pts, h).map(Kde::tabulate)
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(LocalDensity::Grouped {
                codes: codes.to_vec(),
                kdes,
            });
        }
        Ok(LocalDensity::Weighted { test, calib, w, h })
    }

    fn at(&self, i: usize, t: f64) -> f64 {
        match self {
            LocalDensity::Weighted { test, calib, w, h } => {
                conformal_density(i, t, test, calib, w, *h).unwrap_or(0.0)
            }
            LocalDensity::Grouped { codes, kdes } => kdes[codes[i]].eval(t),
        }
    }

    fn pair(&self, i: usize, a: f64, b: f64) -> (f64, f64) {
        match self {
            LocalDensity::Weighted { test, calib, w, h } => {
                conformal_density_pair(i, a, b, test, calib, w, *h).unwrap_or((0.0, 0.0))
            }
            LocalDensity::Grouped { codes, kdes } => {
                let k = &kdes[codes[i]];
                (k.eval(a), k.eval(b))
            }
        }
    }
}

/// The CLAW score `R̂(t, S_i)` with a known null density.
pub struct ClawScore<'a> {
    density: LocalDensity<'a>,
    f0: &'a dyn NullModel,
    pi_tilde: Vec<f64>,
    cap: f64,
    floor: f64,
}

impl ClawScore<'_> {
    fn finish(&self, i: usize, t: f64, f_hat: f64) -> f64 {
        let pi = self.pi_tilde[i];
        r_transform(
            clfdr_score(self.f0.pdf(t), pi, f_hat, self.cap, self.floor),
            pi,
        )
    }
}

impl ScoreFunction for ClawScore<'_> {
    fn score(&self, i: usize, t: f64) -> f64 {
        self.finish(i, t, self.density.at(i, t))
    }

    fn score_pair(&self, i: usize, a: f64, b: f64) -> (f64, f64) {
        let (fa, fb) = self.density.pair(i, a, b);
        (self.finish(i, a, fa), self.finish(i, b, fb))
    }
}

/// Computes `(score(T_i), score(T̃_i))` for every unit.
pub fn score_all(score: &dyn ScoreFunction, test: &[f64], calib: &[f64]) -> Vec<(f64, f64)> {
    (0..test.len())
        .into_par_iter()
        .map(|i| score.score_pair(i, test[i], calib[i]))
        .collect()
}

/// Runs CLAW with weights built from `cfg.weights`.
pub fn claw_run(data: Dataset, f0: &dyn NullModel, cfg: &ClawConfig) -> Result<ClawRun> {
    let data = validate_dataset(data, cfg)?;
    let w = build_weights(&data, &cfg.weights)?;
    run_validated(&data, f0, cfg, w)
}

/// Runs CLAW with a caller-supplied weight matrix.
pub fn claw_run_with_weights(
    data: Dataset,
    f0: &dyn NullModel,
    cfg: &ClawConfig,
    w: WeightMatrix,
) -> Result<ClawRun> {
    let data = validate_dataset(data, cfg)?;
    if w.m() != data.m() {
        return Err(ClawError::LengthMismatch {
            expected: data.m(),
            actual: w.m(),
        });
    }
    run_validated(&data, f0, cfg, w)
}

fn run_validated(
    data: &Dataset,
    f0: &dyn NullModel,
    cfg: &ClawConfig,
    w: WeightMatrix,
) -> Result<ClawRun> {
    let test = data.t_values();
    let calib = data.t_cal_values();
    let p_test: Vec<f64> = test
        .iter()
        .map(|&t| pvalue_from_null(t, f0, cfg.sidedness))
        .collect();
    let p_cal: Vec<f64> = calib
        .iter()
        .map(|&t| pvalue_from_null(t, f0, cfg.sidedness))
        .collect();
    let h = pooled_bandwidth(&test, &calib, &cfg.bandwidth)?;

    let raw = proportions(&p_test, &p_cal, &w, cfg.lambda)?;
    let clamped: Vec<f64> = raw
        .iter()
        .map(|&r| clamp_proportion(r, cfg.epsilon))
        .collect();
    let row_mass = row_masses(&w);
    if let Some(row) = row_mass.iter().position(|&s| !(s > 0.0)) {
        return Err(ClawError::ZeroWeightRow { row });
    }

    let scores = {
        let score = ClawScore {
            density: LocalDensity::new(&test, &calib, &w, h)?,
            f0,
            pi_tilde: clamped.clone(),
            cap: cfg.clfdr_cap,
            floor: cfg.density_floor,
        };
        score_all(&score, &test, &calib)
    };
    let (u, u_cal): (Vec<f64>, Vec<f64>) = scores.into_iter().unzip();
    let decision = decide(&u, &u_cal, cfg.alpha)?;
    Ok(ClawRun {
        config: cfg.clone(),
        weight_matrix: w,
        estimator_state: EstimatorState {
            bandwidth: h,
            raw_proportion: raw,
            clamped_proportion: clamped,
            row_mass,
        },
        decision,
    })
}

/// A generating model with known signal proportion and alternative density.
pub trait TrueModel: Sync {
    fn pi(&self, i: usize) -> f64;
    fn f0(&self, t: f64) -> f64;
    fn f1(&self, i: usize, t: f64) -> f64;
}

/// `R(t, S_i) = (1 - pi_i) f0(t) / (pi_i f1_i(t))`, or `+inf` when the
/// denominator vanishes.
pub fn oracle_score(model: &dyn TrueModel, i: usize, t: f64) -> f64 {
    let pi = model.pi(i);
    let denom = pi * model.f1(i, t);
    if denom > 0.0 {
        (1.0 - pi) * model.f0(t) / denom
    } else {
        f64::INFINITY
    }
}

pub fn oracle_scores(data: &Dataset, model: &dyn TrueModel) -> Vec<(f64, f64)> {
    data.units
        .iter()
        .enumerate()
        .map(|(i, u)| (oracle_score(model, i, u.t), oracle_score(model, i, u.t_cal)))
        .collect()
}
