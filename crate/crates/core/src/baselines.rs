//! Reference procedures: BH, Storey-BH, conformal p-values and conformal BH
//! in its counting-knockoffs form, plus pooled and separate drivers.

use crate::error::{ClawError, Result};
use crate::estimators::{silverman_bandwidth, Kde, NullModel};
use crate::mirror::{Threshold, LEVEL_RTOL};

/// p-values validated to lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PvalueSet(Vec<f64>);

impl PvalueSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match values.iter().position(|p| !(0.0..=1.0).contains(p)) {
            Some(index) => Err(ClawError::NonFiniteValue {
                field: "p-value",
                index,
            }),
            None => Ok(Self(values)),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Benjamini-Hochberg step-up; returns sorted indices.
pub fn bh(p: &[f64], alpha: f64) -> Vec<usize> {
    let m = p.len();
    if m == 0 {
        return Vec::new();
    }
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let slack = 1.0 + LEVEL_RTOL;
    let k_hat = (1..=m)
        .rev()
        .find(|&k| sorted[k - 1] <= k as f64 * alpha / m as f64 * slack);
    match k_hat {
        Some(k) => {
            let cut = sorted[k - 1];
            (0..m).filter(|&j| p[j] <= cut).collect()
        }
        None => Vec::new(),
    }
}

/// Storey's null-proportion estimate `1 - #{p > lambda} / ((1 - lambda) m)`,
/// clamped into `[0, 1 - 1/m]`.
pub fn storey_pi(p: &[f64], lambda: f64) -> f64 {
    let m = p.len() as f64;
    if p.is_empty() {
        return 0.0;
    }
    let above = p.iter().filter(|&&x| x > lambda).count() as f64;
    (1.0 - above / ((1.0 - lambda) * m)).clamp(0.0, 1.0 - 1.0 / m)
}

/// BH at level `min(alpha / (1 - pi_hat), 1)`.
pub fn storey_bh(p: &[f64], alpha: f64, lambda: f64) -> Vec<usize> {
    let pi = storey_pi(p, lambda);
    bh(p, (alpha / (1.0 - pi)).min(1.0))
}

/// `(1 + #{cal <= s}) / (1 + |cal|)` for each test score `s`.
pub fn conformal_pvalues(test_scores: &[f64], cal_scores: &[f64]) -> Result<Vec<f64>> {
    if cal_scores.is_empty() {
        return Err(ClawError::EmptyCalibration);
    }
    let mut cal = cal_scores.to_vec();
    cal.sort_by(f64::total_cmp);
    let n = cal.len() as f64;
    Ok(test_scores
        .iter()
        .map(|&s| (1.0 + cal.partition_point(|&c| c <= s) as f64) / (1.0 + n))
        .collect())
}

/// Conformal BH via the counting-knockoffs threshold
/// `max{t in test : [(1 + #{cal <= t}) / (1 + n)] / [#{test <= t} / m] <= alpha}`.
pub fn cbh_threshold(
    test_scores: &[f64],
    cal_scores: &[f64],
    alpha: f64,
) -> Result<(Threshold, Vec<usize>)> {
    if cal_scores.is_empty() {
        return Err(ClawError::EmptyCalibration);
    }
    let mut cal = cal_scores.to_vec();
    cal.sort_by(f64::total_cmp);
    let mut test = test_scores.to_vec();
    test.sort_by(f64::total_cmp);
    let (m, n) = (test.len() as f64, cal.len() as f64);
    let mut tau = Threshold::NegInfinity;
    let mut c = 0usize;
    for (k, &t) in test.iter().enumerate() {
        // Only the last of a run of equal scores has the full count.
        if k + 1 < test.len() && test[k + 1] == t {
            continue;
        }
        while c < cal.len() && cal[c] <= t {
            c += 1;
        }
        let q = ((1.0 + c as f64) / (1.0 + n)) / ((k + 1) as f64 / m);
        if q <= alpha * (1.0 + LEVEL_RTOL) {
            tau = Threshold::At(t);
        }
    }
    let cut = tau.value();
    let rejected = (0..test_scores.len())
        .filter(|&i| test_scores[i] <= cut)
        .collect();
    Ok((tau, rejected))
}

/// Applies `procedure` to each group separately at the same level and
/// returns the union of rejections as sorted global indices.
pub fn separate_analysis<F>(groups: &[usize], mut procedure: F) -> Result<Vec<usize>>
where
    F: FnMut(&[usize]) -> Result<Vec<usize>>,
{
    let n_groups = groups.iter().max().map_or(0, |g| g + 1);
    let mut members = vec![Vec::new(); n_groups];
    for (i, &g) in groups.iter().enumerate() {
        members[g].push(i);
    }
    let mut out = Vec::new();
    for idx in members.iter().filter(|g| !g.is_empty()) {
        out.extend(procedure(idx)?.into_iter().map(|local| idx[local]));
    }
    out.sort_unstable();
    Ok(out)
}

pub fn separate_bh(p: &[f64], groups: &[usize], alpha: f64) -> Result<Vec<usize>> {
    separate_analysis(groups, |idx| {
        let sub: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
        Ok(bh(&sub, alpha))
    })
}

/// Scores `numer(t) / max(KDE(T ∪ T̃)(t), floor)` at every test and
/// calibration point, with a Silverman bandwidth on the pooled sample.
/// Lower scores indicate stronger evidence of signal.
pub fn pooled_ratio_scores(
    test: &[f64],
    calib: &[f64],
    numer: &dyn Fn(f64) -> f64,
    floor: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let pooled: Vec<f64> = test.iter().chain(calib).copied().collect();
    let kde = Kde::new(&pooled, silverman_bandwidth(&pooled)?)?.tabulate();
    let score = |t: f64| numer(t) / kde.eval(t).max(floor);
    Ok((
        test.iter().map(|&t| score(t)).collect(),
        calib.iter().map(|&t| score(t)).collect(),
    ))
}

/// Pooled conformal BH with the known-null score `f0(t) / KDE(T ∪ T̃)(t)`.
pub fn pooled_cbh(
    test: &[f64],
    calib: &[f64],
    f0: &dyn NullModel,
    alpha: f64,
    floor: f64,
) -> Result<Vec<usize>> {
    let (s, sc) = pooled_ratio_scores(test, calib, &|t| f0.pdf(t), floor)?;
    Ok(cbh_threshold(&s, &sc, alpha)?.1)
}

/// Pooled conformal BH with the training-null score `KDE(T_tr)(t) / KDE(T ∪ T̃)(t)`.
pub fn pooled_cbh_trained(
    test: &[f64],
    calib: &[f64],
    train: &[f64],
    alpha: f64,
    floor: f64,
) -> Result<Vec<usize>> {
    if train.is_empty() {
        return Err(ClawError::EmptyTraining);
    }
    let null_kde = Kde::silverman(train)?;
    let (s, sc) = pooled_ratio_scores(test, calib, &|t| null_kde.eval(t), floor)?;
    Ok(cbh_threshold(&s, &sc, alpha)?.1)
}

/// Conformal BH run within each group on the group's own pooled scores.
pub fn separate_cbh(
    test: &[f64],
    calib: &[f64],
    groups: &[usize],
    f0: &dyn NullModel,
    alpha: f64,
    floor: f64,
) -> Result<Vec<usize>> {
    separate_analysis(groups, |idx| {
        let t: Vec<f64> = idx.iter().map(|&i| test[i]).collect();
        let c: Vec<f64> = idx.iter().map(|&i| calib[i]).collect();
        pooled_cbh(&t, &c, f0, alpha, floor)
    })
}
