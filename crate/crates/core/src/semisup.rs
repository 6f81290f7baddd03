//! CLAW when the null distribution is known only through a pool of null
//! samples.
//!
//! The pool is split into a calibration set paired with the test units and
//! two training halves. The first training half calibrates conformal
//! p-values; the full training set feeds a kernel density ratio that replaces
//! `f0 / f̂**` in the Clfdr score.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::conformal_pvalues;
use crate::error::{ClawError, Result};
use crate::estimators::{
    clamp_proportion, conformal_proportion, r_transform, silverman_bandwidth, EstimatorState, Kde,
    ScoreFunction, TabulatedKde, KERNEL_CUTOFF,
};
use crate::mirror::decide;
use crate::model::{validate_dataset, BandwidthRule, ClawConfig, CovariateColumn, Dataset};
use crate::normal;
use crate::pipeline::{
    build_weights, pooled_bandwidth, proportions, row_masses, score_all, ClawRun,
};
use crate::sim::{stream_rng, STREAM_AUGMENT, STREAM_SPLIT};
use crate::weights::WeightMatrix;

/// Bandwidth used for a covariate coordinate with no spread.
pub const DEGENERATE_COORD_BANDWIDTH: f64 = 1.0;

/// Pool split into calibration and two training halves, with the pool
/// indices each value came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullSplit {
    pub calibration: Vec<f64>,
    pub train1: Vec<f64>,
    pub train2: Vec<f64>,
    pub calibration_indices: Vec<usize>,
    pub train1_indices: Vec<usize>,
    pub train2_indices: Vec<usize>,
}

impl NullSplit {
    /// `train1` followed by `train2`.
    pub fn training(&self) -> Vec<f64> {
        self.train1.iter().chain(&self.train2).copied().collect()
    }
}

/// Draws `m` calibration points uniformly without replacement, then splits the
/// rest into `train1` (a `train_fraction` share) and `train2`, both nonempty.
pub fn split_nulls(pool: &[f64], m: usize, seed: u64, train_fraction: f64) -> Result<NullSplit> {
    if pool.len() < m + 2 {
        return Err(ClawError::InsufficientNulls {
            needed: m + 2,
            have: pool.len(),
        });
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ClawError::InvalidParameter {
            name: "train_fraction",
            value: train_fraction,
            range: "(0, 1)",
        });
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut stream_rng(seed, STREAM_SPLIT));
    let rest = pool.len() - m;
    let n1 = ((rest as f64 * train_fraction).round() as usize).clamp(1, rest - 1);
    let (cal, tail) = order.split_at(m);
    let (tr1, tr2) = tail.split_at(n1);
    let pick = |idx: &[usize]| idx.iter().map(|&k| pool[k]).collect::<Vec<_>>();
    Ok(NullSplit {
        calibration: pick(cal),
        train1: pick(tr1),
        train2: pick(tr2),
        calibration_indices: cal.to_vec(),
        train1_indices: tr1.to_vec(),
        train2_indices: tr2.to_vec(),
    })
}

/// Conformal p-values of every test and calibration value, ranked against
/// the scores of `train1`.
pub fn semisup_conformal_pvalues(
    test: &[f64],
    calib: &[f64],
    split: &NullSplit,
    score: &dyn Fn(f64) -> f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if split.train1.is_empty() {
        return Err(ClawError::EmptyTrainingHalf);
    }
    let ref_scores: Vec<f64> = split.train1.iter().map(|&x| score(x)).collect();
    let s_test: Vec<f64> = test.iter().map(|&x| score(x)).collect();
    let s_cal: Vec<f64> = calib.iter().map(|&x| score(x)).collect();
    Ok((
        conformal_pvalues(&s_test, &ref_scores)?,
        conformal_pvalues(&s_cal, &ref_scores)?,
    ))
}

/// Default conformity score `KDE(train2)(x) / KDE(T ∪ T̃ ∪ train1)(x)`.
/// Both estimates depend only on their sample multisets.
pub struct KdeRatioScore {
    numer: Kde,
    denom: TabulatedKde,
    floor: f64,
}

impl KdeRatioScore {
    pub fn new(test: &[f64], calib: &[f64], split: &NullSplit, floor: f64) -> Result<Self> {
        if split.train2.is_empty() {
            return Err(ClawError::EmptyTrainingHalf);
        }
        let pooled: Vec<f64> = test
            .iter()
            .chain(calib)
            .chain(&split.train1)
            .copied()
            .collect();
        Ok(Self {
            numer: Kde::silverman(&split.train2)?,
            denom: Kde::silverman(&pooled)?.tabulate(),
            floor,
        })
    }

    pub fn score(&self, x: f64) -> f64 {
        self.numer.eval(x) / self.denom.eval(x).max(self.floor)
    }
}

/// Proportion estimate from conformal p-values, clamped like the known-null path.
pub fn semisup_proportion(
    i: usize,
    p_test: &[f64],
    p_cal: &[f64],
    w: &WeightMatrix,
    lambda: f64,
    epsilon: f64,
) -> Result<f64> {
    Ok(clamp_proportion(
        conformal_proportion(i, p_test, p_cal, w, lambda)?,
        epsilon,
    ))
}

/// Estimated null-to-mixture density ratio at `t` for unit `i`.
pub trait DensityRatio: Sync {
    fn ratio(&self, i: usize, t: f64) -> f64;
}

fn kde_with_rule(points: &[f64], rule: &BandwidthRule) -> Result<Kde> {
    match rule {
        BandwidthRule::Fixed { h } => Kde::new(points, *h),
        BandwidthRule::Silverman => Kde::silverman(points),
    }
}

/// `r̂(t, k) = KDE(T_tr)(t) / max(KDE_k(t), floor)`, where `KDE_k` pools
/// `{T_i, T̃_i : S_i = k}`.
pub struct GroupRatio {
    train: Kde,
    groups: Vec<TabulatedKde>,
    codes: Vec<usize>,
    floor: f64,
}

impl GroupRatio {
    pub fn eval(&self, t: f64, group: usize) -> f64 {
        self.train.eval(t) / self.groups[group].eval(t).max(self.floor)
    }
}

impl DensityRatio for GroupRatio {
    fn ratio(&self, i: usize, t: f64) -> f64 {
        self.eval(t, self.codes[i])
    }
}

pub fn group_density_ratio(
    test: &[f64],
    calib: &[f64],
    train: &[f64],
    codes: &[usize],
    rule: &BandwidthRule,
    floor: f64,
) -> Result<GroupRatio> {
    if train.is_empty() {
        return Err(ClawError::EmptyTraining);
    }
    let n_groups = codes.iter().max().map_or(0, |g| g + 1);
    let mut pooled = vec![Vec::new(); n_groups];
    for (i, &k) in codes.iter().enumerate() {
        pooled[k].push(test[i]);
        pooled[k].push(calib[i]);
    }
    if let Some(group) = pooled.iter().position(Vec::is_empty) {
        return Err(ClawError::EmptyGroup { group });
    }
    let groups = pooled
        .par_iter()
        .map(|pts| kde_with_rule(pts, rule).map(Kde::tabulate))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupRatio {
        train: kde_with_rule(train, rule)?,
        groups,
        codes: codes.to_vec(),
        floor,
    })
}

/// Product-kernel ratio on augmented points `(t, s)`.
pub struct AugmentedRatio {
    dim: usize,
    coords: Vec<f64>,
    test: Vec<f64>,
    calib: Vec<f64>,
    paired_train: Vec<f64>,
    h_t: f64,
    h_s: Vec<f64>,
    floor: f64,
}

impl AugmentedRatio {
    /// Training values paired with each unit's covariate.
    pub fn paired_training(&self) -> &[f64] {
        &self.paired_train
    }

    pub fn bandwidths(&self) -> (f64, &[f64]) {
        (self.h_t, &self.h_s)
    }

    /// Ratio at `t` and at `u` for the covariate of unit `i`, in one pass.
    pub fn eval_pair(&self, i: usize, a: f64, b: f64) -> (f64, f64) {
        let d = self.dim;
        let si = &self.coords[i * d..(i + 1) * d];
        let inv_t = 1.0 / self.h_t;
        let limit = KERNEL_CUTOFF * KERNEL_CUTOFF;
        let (mut na, mut nb, mut da, mut db) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..self.test.len() {
            let sj = &self.coords[j * d..(j + 1) * d];
            let mut z2 = 0.0;
            for c in 0..d {
                let z = (si[c] - sj[c]) / self.h_s[c];
                z2 += z * z;
            }
            if z2 > limit {
                continue;
            }
            let ks = (-0.5 * z2).exp();
            let (x, y, r) = (self.test[j], self.calib[j], self.paired_train[j]);
            na += ks * normal::pdf((a - r) * inv_t);
            nb += ks * normal::pdf((b - r) * inv_t);
            da += ks * (normal::pdf((a - x) * inv_t) + normal::pdf((a - y) * inv_t));
            db += ks * (normal::pdf((b - x) * inv_t) + normal::pdf((b - y) * inv_t));
        }
        // numer / m over denom / 2m; the common kernel constants cancel.
        let floor = self.floor * self.scale();
        (2.0 * na / da.max(floor), 2.0 * nb / db.max(floor))
    }

    // Converts the floor on a normalized density to the unnormalized sums above.
    fn scale(&self) -> f64 {
        let m = self.test.len() as f64;
        let norm_s: f64 = self
            .h_s
            .iter()
            .map(|h| h * (2.0 * std::f64::consts::PI).sqrt())
            .product();
        2.0 * m * self.h_t * norm_s
    }
}

impl DensityRatio for AugmentedRatio {
    fn ratio(&self, i: usize, t: f64) -> f64 {
        self.eval_pair(i, t, t).0
    }
}

/// Builds the augmented ratio. Training values are paired with units by a
/// seeded draw: without replacement when `|train| >= m`, else with replacement.
pub fn augment_density_ratio(
    test: &[f64],
    calib: &[f64],
    dim: usize,
    coords: &[f64],
    train: &[f64],
    seed: u64,
    floor: f64,
) -> Result<AugmentedRatio> {
    let m = test.len();
    if train.is_empty() {
        return Err(ClawError::EmptyTraining);
    }
    if dim == 0 || coords.len() != m * dim || calib.len() != m {
        return Err(ClawError::DimensionMismatch(format!(
            "{m} units, {} calibration values, {} coordinates of dimension {dim}",
            calib.len(),
            coords.len()
        )));
    }
    let mut rng = stream_rng(seed, STREAM_AUGMENT);
    let paired_train: Vec<f64> = if train.len() >= m {
        let mut idx: Vec<usize> = (0..train.len()).collect();
        idx.partial_shuffle(&mut rng, m);
        idx[..m].iter().map(|&k| train[k]).collect()
    } else {
        (0..m)
            .map(|_| train[rng.gen_range(0..train.len())])
            .collect()
    };
    let pooled_t: Vec<f64> = test.iter().chain(calib).copied().collect();
    let h_t = silverman_bandwidth(&pooled_t)?;
    let h_s = (0..dim)
        .map(|c| {
            let column: Vec<f64> = (0..m).flat_map(|i| [coords[i * dim + c]; 2]).collect();
            match silverman_bandwidth(&column) {
                Ok(h) => Ok(h),
                Err(ClawError::DegenerateSample) => Ok(DEGENERATE_COORD_BANDWIDTH),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AugmentedRatio {
        dim,
        coords: coords.to_vec(),
        test: test.to_vec(),
        calib: calib.to_vec(),
        paired_train,
        h_t,
        h_s,
        floor,
    })
}

enum Ratio {
    Group(GroupRatio),
    Augmented(AugmentedRatio),
}

struct SemisupScore {
    ratio: Ratio,
    pi_tilde: Vec<f64>,
    cap: f64,
}

impl SemisupScore {
    fn finish(&self, i: usize, r: f64) -> f64 {
        let pi = self.pi_tilde[i];
        r_transform(((1.0 - pi) * r).min(self.cap), pi)
    }
}

impl ScoreFunction for SemisupScore {
    fn score(&self, i: usize, t: f64) -> f64 {
        let r = match &self.ratio {
            Ratio::Group(g) => g.ratio(i, t),
            Ratio::Augmented(a) => a.ratio(i, t),
        };
        self.finish(i, r)
    }

    fn score_pair(&self, i: usize, a: f64, b: f64) -> (f64, f64) {
        let (ra, rb) = match &self.ratio {
            Ratio::Group(g) => (g.ratio(i, a), g.ratio(i, b)),
            Ratio::Augmented(x) => x.eval_pair(i, a, b),
        };
        (self.finish(i, ra), self.finish(i, rb))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemisupOptions {
    /// Share of the non-calibration pool assigned to `train1`.
    pub train_fraction: f64,
}

impl Default for SemisupOptions {
    fn default() -> Self {
        Self {
            train_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SemisupRun {
    pub run: ClawRun,
    pub split: NullSplit,
    /// Conformal p-values of the test and calibration values.
    pub pvalues: (Vec<f64>, Vec<f64>),
}

/// Semi-supervised CLAW. The calibration values drawn from the pool replace
/// any `t_cal` present in the dataset; the split is keyed by `cfg.seed`.
pub fn semisup_claw_run(
    data: Dataset,
    cfg: &ClawConfig,
    opts: SemisupOptions,
) -> Result<SemisupRun> {
    let data = validate_dataset(data, cfg)?;
    let pool = data
        .null_pool
        .as_deref()
        .ok_or_else(|| ClawError::MissingInput("semi-supervised run needs a null pool".into()))?;
    let m = data.m();
    let split = split_nulls(pool, m, cfg.seed, opts.train_fraction)?;
    let test = data.t_values();
    let calib = split.calibration.clone();

    let conformity = KdeRatioScore::new(&test, &calib, &split, cfg.density_floor)?;
    let (p_test, p_cal) =
        semisup_conformal_pvalues(&test, &calib, &split, &|x| conformity.score(x))?;

    let w = build_weights(&data, &cfg.weights)?;
    let raw = proportions(&p_test, &p_cal, &w, cfg.lambda)?;
    let clamped: Vec<f64> = raw
        .iter()
        .map(|&r| clamp_proportion(r, cfg.epsilon))
        .collect();
    let row_mass = row_masses(&w);

    let train = split.training();
    let ratio = match data.covariate_column()? {
        CovariateColumn::Categorical { codes, .. } => Ratio::Group(group_density_ratio(
            &test,
            &calib,
            &train,
            &codes,
            &cfg.bandwidth,
            cfg.density_floor,
        )?),
        CovariateColumn::Real { dim, coords } => Ratio::Augmented(augment_density_ratio(
            &test,
            &calib,
            dim,
            &coords,
            &train,
            cfg.seed,
            cfg.density_floor,
        )?),
    };
    let h = pooled_bandwidth(&test, &calib, &cfg.bandwidth)?;
    let score = SemisupScore {
        ratio,
        pi_tilde: clamped.clone(),
        cap: cfg.clfdr_cap,
    };
    let (u, u_cal): (Vec<f64>, Vec<f64>) = score_all(&score, &test, &calib).into_iter().unzip();
    let decision = decide(&u, &u_cal, cfg.alpha)?;
    Ok(SemisupRun {
        run: ClawRun {
            config: cfg.clone(),
            weight_matrix: w,
            estimator_state: EstimatorState {
                bandwidth: h,
                raw_proportion: raw,
                clamped_proportion: clamped,
                row_mass,
            },
            decision,
        },
        split,
        pvalues: (p_test, p_cal),
    })
}
