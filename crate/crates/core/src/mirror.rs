//! Mirror-process thresholding, generalized e-values and e-BH.
//!
//! For score pairs `(u_i, ũ_i)` (lower is stronger evidence) the mirror
//! process is
//!
//! ```text
//! Q(t) = (1 + #{i : ũ_i <= min(t, u_i)}) / max(1, #{i : u_i <= min(t, ũ_i)})
//! ```
//!
//! and the threshold is the largest observed score `t` with `Q(t) <= alpha`.
//! Units with `u_i == ũ_i` carry no sign information; they are left out of
//! both counts and are never rejected.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ClawError, Result};

/// Relative slack used in every level comparison so that mathematically
/// equivalent procedures agree when a ratio lands exactly on the level.
pub const LEVEL_RTOL: f64 = 1e-12;

/// Rejection threshold; `NegInfinity` means nothing is rejected.
/// Serialized as `null` or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    NegInfinity,
    At(f64),
}

impl Threshold {
    pub fn value(self) -> f64 {
        match self {
            Threshold::NegInfinity => f64::NEG_INFINITY,
            Threshold::At(t) => t,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Threshold::At(_))
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threshold::NegInfinity => s.serialize_none(),
            Threshold::At(t) => s.serialize_some(t),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match Option::<f64>::deserialize(d)? {
            Some(t) => Threshold::At(t),
            None => Threshold::NegInfinity,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MirrorDiagnostics {
    /// `min(u_i, ũ_i)`.
    pub nu: Vec<f64>,
    /// `u_i < ũ_i`.
    pub eta: Vec<bool>,
    /// Units with `u_i == ũ_i`.
    pub ties: Vec<usize>,
}

pub fn mirror_diagnostics(u: &[f64], u_cal: &[f64]) -> Result<MirrorDiagnostics> {
    check_lengths(u, u_cal)?;
    let nu = u.iter().zip(u_cal).map(|(a, b)| a.min(*b)).collect();
    let eta = u.iter().zip(u_cal).map(|(a, b)| a < b).collect();
    let ties = (0..u.len()).filter(|&i| u[i] == u_cal[i]).collect();
    Ok(MirrorDiagnostics { nu, eta, ties })
}

fn check_lengths(u: &[f64], u_cal: &[f64]) -> Result<()> {
    if u.len() != u_cal.len() {
        return Err(ClawError::LengthMismatch {
            expected: u.len(),
            actual: u_cal.len(),
        });
    }
    if u.is_empty() {
        return Err(ClawError::EmptyInput);
    }
    if let Some(index) = u.iter().chain(u_cal).position(|x| x.is_nan()) {
        return Err(ClawError::NonFiniteValue {
            field: "score",
            index: index % u.len(),
        });
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(ClawError::InvalidParameter {
            name: "alpha",
            value: alpha,
            range: "(0, 1]",
        })
    }
}

/// `(1 + a) / max(1, d) <= alpha`, with the shared relative slack.
#[inline]
pub(crate) fn ratio_within(numer: f64, denom: usize, alpha: f64) -> bool {
    numer <= alpha * (1.0 + LEVEL_RTOL) * denom.max(1) as f64
}

/// Mirror threshold `tau`, scanning every observed score.
pub fn mirror_threshold(u: &[f64], u_cal: &[f64], alpha: f64) -> Result<Threshold> {
    check_lengths(u, u_cal)?;
    check_alpha(alpha)?;
    Ok(sweep(u, u_cal, alpha))
}

fn sweep(u: &[f64], u_cal: &[f64], alpha: f64) -> Threshold {
    // Events: (nu_i, is_rejectable). Ties never enter.
    let mut events: Vec<(f64, bool)> = u
        .iter()
        .zip(u_cal)
        .filter(|(a, b)| a != b)
        .map(|(&a, &b)| (a.min(b), a < b))
        .collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut candidates: Vec<f64> = u.iter().chain(u_cal).copied().collect();
    candidates.sort_by(f64::total_cmp);

    let (mut mirror, mut rejectable, mut next) = (0usize, 0usize, 0usize);
    let mut tau = Threshold::NegInfinity;
    for &t in &candidates {
        while next < events.len() && events[next].0 <= t {
            if events[next].1 {
                rejectable += 1;
            } else {
                mirror += 1;
            }
            next += 1;
        }
        if ratio_within(1.0 + mirror as f64, rejectable, alpha) {
            tau = Threshold::At(t);
        }
    }
    tau
}

#[inline]
fn rejected_at(u: f64, u_cal: f64, tau: f64) -> bool {
    u < u_cal && u <= tau
}

/// `R = {i : u_i <= min(tau, ũ_i)}` as sorted indices.
pub fn reject_set(u: &[f64], u_cal: &[f64], tau: Threshold) -> Result<Vec<usize>> {
    check_lengths(u, u_cal)?;
    let t = tau.value();
    Ok((0..u.len())
        .filter(|&i| rejected_at(u[i], u_cal[i], t))
        .collect())
}

/// Number of mirror exceedances `#{i : ũ_i <= min(tau, u_i)}`.
pub fn mirror_count(u: &[f64], u_cal: &[f64], tau: Threshold) -> Result<usize> {
    check_lengths(u, u_cal)?;
    let t = tau.value();
    Ok((0..u.len())
        .filter(|&i| rejected_at(u_cal[i], u[i], t))
        .count())
}

/// Generalized e-values `e_j = m * 1{j in R} / (1 + mirror count at tau)`.
pub fn evalues(u: &[f64], u_cal: &[f64], tau: Threshold) -> Result<Vec<f64>> {
    let rejected = reject_set(u, u_cal, tau)?;
    let m = u.len();
    let mut e = vec![0.0; m];
    if rejected.is_empty() {
        return Ok(e);
    }
    let value = m as f64 / (1.0 + mirror_count(u, u_cal, tau)? as f64);
    for i in rejected {
        e[i] = value;
    }
    Ok(e)
}

/// e-BH: rejects the `k` largest e-values for the largest `k` with
/// `k * e_(k) / m >= 1 / alpha`.
pub fn ebh(e: &[f64], alpha: f64) -> Vec<usize> {
    let m = e.len();
    if m == 0 {
        return Vec::new();
    }
    let mut sorted = e.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let bar = (1.0 / alpha) * (1.0 - LEVEL_RTOL);
    let k_hat = (1..=m)
        .rev()
        .find(|&k| k as f64 * sorted[k - 1] / m as f64 >= bar);
    match k_hat {
        Some(k) => {
            let cut = sorted[k - 1];
            (0..m).filter(|&j| e[j] >= cut).collect()
        }
        None => Vec::new(),
    }
}

/// Outcome of one mirror decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionResult {
    pub rejected: Vec<usize>,
    pub tau: Threshold,
    pub evalues: Vec<f64>,
    /// `(u_i, ũ_i)` per unit.
    pub scores: Vec<(f64, f64)>,
    /// Mirror exceedances at `tau`.
    pub mirror_count: usize,
    /// `Q(tau)`, the estimated FDP bound; 0 when nothing is rejected.
    pub fdp_bound: f64,
    /// Units with `u_i == ũ_i`, excluded from the decision.
    pub ties: Vec<usize>,
}

/// Threshold, rejection set and e-values in one pass.
pub fn decide(u: &[f64], u_cal: &[f64], alpha: f64) -> Result<DecisionResult> {
    let tau = mirror_threshold(u, u_cal, alpha)?;
    let rejected = reject_set(u, u_cal, tau)?;
    let mirror = mirror_count(u, u_cal, tau)?;
    let evalues = evalues(u, u_cal, tau)?;
    let fdp_bound = if rejected.is_empty() {
        0.0
    } else {
        (1.0 + mirror as f64) / rejected.len() as f64
    };
    let ties = (0..u.len()).filter(|&i| u[i] == u_cal[i]).collect();
    Ok(DecisionResult {
        rejected,
        tau,
        evalues,
        scores: u.iter().copied().zip(u_cal.iter().copied()).collect(),
        mirror_count: mirror,
        fdp_bound,
        ties,
    })
}
