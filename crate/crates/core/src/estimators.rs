//! Conformalized locally adaptive estimators.
//!
//! Every estimator treats each pair `(T_j, T̃_j)` symmetrically: the two
//! kernel (or indicator) contributions of unit `j` are added together
//! before being weighted and accumulated in ascending `j`. Since IEEE
//! addition is commutative, swapping any subset of pairs leaves every
//! estimate bit-identical.

use serde::{Deserialize, Serialize};

use crate::error::{ClawError, Result};
use crate::model::Sidedness;
use crate::normal;
use crate::weights::WeightMatrix;

/// Linear-interpolation ("type 7") quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Silverman's rule `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
///
/// Moments and quartiles are computed from the sorted sample, so the result
/// does not depend on input order. If exactly one of `sd` and `IQR` is zero
/// the other one is used.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(ClawError::DegenerateSample);
    }
    if values.iter().any(|x| !x.is_finite()) {
        let index = values.iter().position(|x| !x.is_finite()).unwrap();
        return Err(ClawError::NonFiniteValue {
            field: "bandwidth sample",
            index,
        });
    }
    let sorted = sorted_copy(values);
    silverman_from_sorted(&sorted)
}

fn silverman_from_sorted(sorted: &[f64]) -> Result<f64> {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => return Err(ClawError::DegenerateSample),
    };
    Ok(0.9 * spread * n.powf(-0.2))
}

fn check_row(w: &WeightMatrix, i: usize) -> Result<f64> {
    if i >= w.m() {
        return Err(ClawError::IndexOutOfRange {
            index: i,
            len: w.m(),
        });
    }
    let mass = w.row_sum(i);
    if mass > 0.0 {
        Ok(mass)
    } else {
        Err(ClawError::ZeroWeightRow { row: i })
    }
}

fn check_pair_lengths(w: &WeightMatrix, a: &[f64], b: &[f64]) -> Result<()> {
    for len in [a.len(), b.len()] {
        if len != w.m() {
            return Err(ClawError::LengthMismatch {
                expected: w.m(),
                actual: len,
            });
        }
    }
    Ok(())
}

/// Conformalized density of unit `i` at `t`:
/// `sum_j w_ij [K_h(t - T_j) + K_h(t - T̃_j)] / (2 sum_j w_ij)`.
pub fn conformal_density(
    i: usize,
    t: f64,
    test: &[f64],
    calib: &[f64],
    w: &WeightMatrix,
    h: f64,
) -> Result<f64> {
    Ok(conformal_density_pair(i, t, t, test, calib, w, h)?.0)
}

/// Evaluates the conformal density of unit `i` at two points in one pass over
/// row `i`; each value equals the one [`conformal_density`] returns.
pub fn conformal_density_pair(
    i: usize,
    a: f64,
    b: f64,
    test: &[f64],
    calib: &[f64],
    w: &WeightMatrix,
    h: f64,
) -> Result<(f64, f64)> {
    check_pair_lengths(w, test, calib)?;
    if !(h > 0.0) {
        return Err(ClawError::InvalidConfig {
            field: "bandwidth.h",
            reason: format!("{h} must be positive"),
        });
    }
    let mass = check_row(w, i)?;
    let inv_h = 1.0 / h;
    let denom = 2.0 * mass * h;
    if w.blocks().is_some() {
        let (mut sa, mut sb) = (0.0, 0.0);
        w.visit_row(i, |j, wij| {
            let (x, y) = (test[j], calib[j]);
            sa += wij * (normal::pdf((a - x) * inv_h) + normal::pdf((a - y) * inv_h));
            sb += wij * (normal::pdf((b - x) * inv_h) + normal::pdf((b - y) * inv_h));
        });
        return Ok((sa / denom, sb / denom));
    }
    let mut owned = Vec::new();
    let row = match w.dense_row(i) {
        Some(r) => r,
        None => {
            w.row_into(i, &mut owned);
            &owned
        }
    };
    let m = row.len();
    let (mut kx, mut ky) = (vec![0.0; m], vec![0.0; m]);
    let mut weighted_sum = |q: f64| {
        normal::pdf_scaled_into(&mut kx, test, q, inv_h);
        normal::pdf_scaled_into(&mut ky, calib, q, inv_h);
        let mut lanes = [0.0; LANES];
        for ((wc, xc), yc) in row
            .chunks(LANES)
            .zip(kx.chunks(LANES))
            .zip(ky.chunks(LANES))
        {
            for (l, ((wj, x), y)) in lanes.iter_mut().zip(wc.iter().zip(xc).zip(yc)) {
                *l += wj * (x + y);
            }
        }
        lane_sum(lanes)
    };
    let sa = weighted_sum(a);
    let sb = weighted_sum(b);
    Ok((sa / denom, sb / denom))
}

/// Raw conformalized signal proportion of unit `i`; may fall outside `[0, 1/2]`.
pub fn conformal_proportion(
    i: usize,
    p_test: &[f64],
    p_cal: &[f64],
    w: &WeightMatrix,
    lambda: f64,
) -> Result<f64> {
    check_pair_lengths(w, p_test, p_cal)?;
    let mass = check_row(w, i)?;
    let mut survivors = 0.0;
    w.visit_row(i, |j, wij| {
        let count = (p_test[j] > lambda) as u8 + (p_cal[j] > lambda) as u8;
        survivors += wij * count as f64;
    });
    Ok(1.0 - survivors / (2.0 * (1.0 - lambda) * mass))
}

/// Moves a raw proportion into `(0, 1/2]`: `eps` when `raw <= 0`,
/// `1/2 - eps` when `raw > 1/2`, else `raw` unchanged.
pub fn clamp_proportion(raw: f64, eps: f64) -> f64 {
    if raw <= 0.0 {
        eps
    } else if raw > 0.5 {
        0.5 - eps
    } else {
        raw
    }
}

/// `min{(1 - pi) f0(t) / max(f_hat, floor), cap}`.
pub fn clfdr_score(f0_at_t: f64, pi_tilde: f64, f_hat: f64, cap: f64, floor: f64) -> f64 {
    ((1.0 - pi_tilde) * f0_at_t / f_hat.max(floor)).min(cap)
}

/// Maps a capped Clfdr value to the ranking score
/// `((1/2 - pi) / (1 - pi)) * clfdr / (1 - clfdr)`.
pub fn r_transform(clfdr: f64, pi_tilde: f64) -> f64 {
    ((0.5 - pi_tilde) / (1.0 - pi_tilde)) * (clfdr / (1.0 - clfdr))
}

/// A null distribution with density and CDF.
pub trait NullModel: Send + Sync {
    fn pdf(&self, t: f64) -> f64;
    fn cdf(&self, t: f64) -> f64;
    fn sf(&self, t: f64) -> f64 {
        1.0 - self.cdf(t)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StandardNormal;

impl NullModel for StandardNormal {
    fn pdf(&self, t: f64) -> f64 {
        normal::pdf(t)
    }
    fn cdf(&self, t: f64) -> f64 {
        normal::cdf(t)
    }
    fn sf(&self, t: f64) -> f64 {
        normal::sf(t)
    }
}

/// A null given as a table of `(t, cdf, pdf)` knots, linearly interpolated.
/// Outside the table the CDF is 0 or 1 and the density is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedNull {
    knots: Vec<(f64, f64, f64)>,
}

impl TabulatedNull {
    pub fn new(knots: Vec<(f64, f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(ClawError::MissingInput(
                "tabulated null needs at least two knots".into(),
            ));
        }
        for (k, w) in knots.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(ClawError::MissingInput(format!(
                    "tabulated null: t must be strictly increasing (row {})",
                    k + 1
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(ClawError::MissingInput(format!(
                    "tabulated null: cdf decreases at row {}",
                    k + 1
                )));
            }
        }
        for (k, &(t, c, d)) in knots.iter().enumerate() {
            if !t.is_finite() || !(0.0..=1.0).contains(&c) || !(d >= 0.0 && d.is_finite()) {
                return Err(ClawError::MissingInput(format!(
                    "tabulated null: invalid knot at row {k}"
                )));
            }
        }
        Ok(Self { knots })
    }

    fn interp(&self, t: f64, pick: impl Fn(&(f64, f64, f64)) -> f64) -> Option<f64> {
        let first = self.knots.first()?;
        let last = self.knots.last()?;
        if t < first.0 || t > last.0 {
            return None;
        }
        let k = self.knots.partition_point(|kn| kn.0 <= t);
        if k == self.knots.len() {
            return Some(pick(last));
        }
        let (lo, hi) = (&self.knots[k - 1], &self.knots[k]);
        let frac = (t - lo.0) / (hi.0 - lo.0);
        Some(pick(lo) + frac * (pick(hi) - pick(lo)))
    }
}

impl NullModel for TabulatedNull {
    fn pdf(&self, t: f64) -> f64 {
        self.interp(t, |k| k.2).unwrap_or(0.0)
    }
    fn cdf(&self, t: f64) -> f64 {
        match self.interp(t, |k| k.1) {
            Some(c) => c,
            None if t < self.knots[0].0 => 0.0,
            None => 1.0,
        }
    }
}

/// p-value of `t` under `null` for the requested sidedness.
pub fn pvalue_from_null(t: f64, null: &dyn NullModel, sidedness: Sidedness) -> f64 {
    let p = match sidedness {
        Sidedness::Left => null.cdf(t),
        Sidedness::Right => null.sf(t),
        Sidedness::TwoSided => 2.0 * null.cdf(t).min(null.sf(t)),
    };
    p.clamp(0.0, 1.0)
}

/// Per-unit quantities shared by every score evaluation of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorState {
    pub bandwidth: f64,
    pub raw_proportion: Vec<f64>,
    pub clamped_proportion: Vec<f64>,
    pub row_mass: Vec<f64>,
}

/// A conformity score `t -> g(t, S_i)` for unit `i`; lower means stronger
/// evidence against the null.
pub trait ScoreFunction: Sync {
    fn score(&self, i: usize, t: f64) -> f64;

    /// Scores `(g(a, S_i), g(b, S_i))`; implementations may share work.
    fn score_pair(&self, i: usize, a: f64, b: f64) -> (f64, f64) {
        (self.score(i, a), self.score(i, b))
    }
}

/// Kernel terms farther than this many bandwidths are dropped; each is below
/// `2e-22` of the peak, far under double-precision resolution of any sum that
/// contains a point of the sample.
pub const KERNEL_CUTOFF: f64 = 10.0;

/// Partial sums kept per lane so kernel loops vectorize with a fixed
/// summation order.
const LANES: usize = 4;

#[inline]
fn lane_sum(l: [f64; LANES]) -> f64 {
    (l[0] + l[1]) + (l[2] + l[3])
}

/// Unweighted Gaussian KDE over a sorted sample.
///
/// Every value is a deterministic function of the query and the multiset of
/// points, never of their original order.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    points: Vec<f64>,
    h: f64,
}

impl Kde {
    pub fn new(points: &[f64], h: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(ClawError::EmptyInput);
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(ClawError::InvalidConfig {
                field: "bandwidth.h",
                reason: format!("{h} must be positive"),
            });
        }
        if let Some(index) = points.iter().position(|x| !x.is_finite()) {
            return Err(ClawError::NonFiniteValue {
                field: "kde sample",
                index,
            });
        }
        Ok(Self {
            points: sorted_copy(points),
            h,
        })
    }

    /// KDE with its own Silverman bandwidth.
    pub fn silverman(points: &[f64]) -> Result<Self> {
        let h = silverman_bandwidth(points)?;
        Self::new(points, h)
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    fn norm(&self) -> f64 {
        1.0 / (self.points.len() as f64 * self.h)
    }

    pub fn eval(&self, t: f64) -> f64 {
        const BLOCK: usize = 64 * LANES;
        let cut = KERNEL_CUTOFF * self.h;
        let lo = self.points.partition_point(|&x| x < t - cut);
        let hi = self.points.partition_point(|&x| x <= t + cut);
        let inv_h = 1.0 / self.h;
        let mut buf = [0.0; BLOCK];
        let mut lanes = [0.0; LANES];
        for block in self.points[lo..hi].chunks(BLOCK) {
            let k = &mut buf[..block.len()];
            normal::pdf_scaled_into(k, block, t, inv_h);
            for chunk in k.chunks(LANES) {
                for (l, &v) in lanes.iter_mut().zip(chunk) {
                    *l += v;
                }
            }
        }
        lane_sum(lanes) * self.norm()
    }

    /// Density at each sorted sample point, exploiting kernel symmetry.
    pub fn at_points(&self) -> Vec<f64> {
        let pts = &self.points;
        let n = pts.len();
        let cut = KERNEL_CUTOFF * self.h;
        let inv_h = 1.0 / self.h;
        let mut acc = vec![normal::INV_SQRT_2PI; n];
        let mut k = Vec::new();
        let mut hi = 0;
        for a in 0..n {
            let xa = pts[a];
            hi = hi.max(a + 1);
            while hi < n && pts[hi] - xa <= cut {
                hi += 1;
            }
            k.resize(hi - a - 1, 0.0);
            normal::pdf_scaled_into(&mut k, &pts[a + 1..hi], xa, inv_h);
            let mut lanes = [0.0; LANES];
            for chunk in k.chunks(LANES) {
                for (l, &v) in lanes.iter_mut().zip(chunk) {
                    *l += v;
                }
            }
            acc[a] += lane_sum(lanes);
            for (s, &v) in acc[a + 1..hi].iter_mut().zip(&k) {
                *s += v;
            }
        }
        let c = self.norm();
        acc.iter_mut().for_each(|v| *v *= c);
        acc
    }

    /// Precomputes the density at every sample point.
    pub fn tabulate(self) -> TabulatedKde {
        let table = self.at_points();
        TabulatedKde { kde: self, table }
    }

    /// Evaluates at many queries; sample points read from the symmetric table.
    pub fn eval_many(&self, queries: &[f64]) -> Vec<f64> {
        let tab = self.clone().tabulate();
        queries.iter().map(|&t| tab.eval(t)).collect()
    }
}

/// A [`Kde`] with cached values at its own sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKde {
    kde: Kde,
    table: Vec<f64>,
}

impl TabulatedKde {
    pub fn kde(&self) -> &Kde {
        &self.kde
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.kde.points;
        let k = pts.partition_point(|&x| x < t);
        if k < pts.len() && pts[k] == t {
            self.table[k]
        } else {
            self.kde.eval(t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{group_weights, kernel_weights, Norm};
    use proptest::prelude::*;

    // Independent reference: textbook Gaussian density written out directly.
    fn phi(x: f64) -> f64 {
        (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn silverman_reference_value() {
        let h = silverman_bandwidth(&[-1.0, 0.0, 1.0, 2.0]).unwrap();
        // sd = sqrt(5/3), q1 = -0.25, q3 = 1.25, IQR/1.34 = 1.119403 < sd
        let expected = 0.9 * (1.5 / 1.34) * 4f64.powf(-0.2);
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.763_51).abs() < 1e-5);
    }

    #[test]
    fn silverman_is_order_free_and_rejects_constants() {
        let a = silverman_bandwidth(&[2.0, -1.0, 1.0, 0.0, 3.5]).unwrap();
        let b = silverman_bandwidth(&[3.5, 0.0, 2.0, 1.0, -1.0]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(
            silverman_bandwidth(&[1.0; 6]),
            Err(ClawError::DegenerateSample)
        );
        assert_eq!(
            silverman_bandwidth(&[1.0]),
            Err(ClawError::DegenerateSample)
        );
    }

    #[test]
    fn silverman_falls_back_when_iqr_vanishes() {
        let mut v = vec![0.0; 9];
        v.push(10.0);
        let h = silverman_bandwidth(&v).unwrap();
        let sd = (90.0f64 / 9.0).sqrt();
        assert!((h - 0.9 * sd * 10f64.powf(-0.2)).abs() < 1e-12);
    }

    #[test]
    fn conformal_density_two_point_example() {
        let w = group_weights(&[0]).unwrap();
        let f = conformal_density(0, 0.0, &[0.0], &[2.0], &w, 1.0).unwrap();
        let expected = (phi(0.0) + phi(2.0)) / 2.0;
        assert!((f - expected).abs() < 1e-15);
        assert!((f - 0.226_466_6).abs() < 1e-7);
    }

    #[test]
    fn conformal_density_swap_invariant_at_midpoint() {
        let w = group_weights(&[0]).unwrap();
        let a = conformal_density(0, 1.0, &[0.0], &[2.0], &w, 1.0).unwrap();
        let b = conformal_density(0, 1.0, &[2.0], &[0.0], &w, 1.0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn conformal_density_single_coincident_mass() {
        let h = 0.7;
        let w = WeightMatrix::from_dense(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let f = conformal_density(0, 1.5, &[1.5, 9.0], &[1.5, -4.0], &w, h).unwrap();
        let expected = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
        assert!((f - expected).abs() < 1e-14);
    }

    #[test]
    fn conformal_density_errors() {
        let w = group_weights(&[0, 0]).unwrap();
        assert!(matches!(
            conformal_density(0, 0.0, &[0.0], &[0.0, 1.0], &w, 1.0),
            Err(ClawError::LengthMismatch { .. })
        ));
        assert!(conformal_density(0, 0.0, &[0.0, 1.0], &[0.0, 1.0], &w, 0.0).is_err());
    }

    #[test]
    fn conformal_density_integrates_to_one() {
        let test = [-1.2, 0.3, 2.2, 0.9, -0.1];
        let calib = [0.4, -0.8, 0.05, 1.7, -2.4];
        let xs: Vec<f64> = (0..5).map(|i| i as f64 * 10.0).collect();
        let w = kernel_weights(&xs, 1, 15.0, Norm::Abs).unwrap();
        let h = 0.45;
        let (lo, hi) = (-2.4 - 8.0 * h, 2.2 + 8.0 * h);
        let n = 4000;
        let dx = (hi - lo) / n as f64;
        for i in 0..5 {
            let mut area = 0.0;
            for k in 0..=n {
                let t = lo + k as f64 * dx;
                let f = conformal_density(i, t, &test, &calib, &w, h).unwrap();
                area += if k == 0 || k == n { 0.5 * f } else { f };
            }
            assert!((area * dx - 1.0).abs() < 1e-3, "unit {i}: {}", area * dx);
        }
    }

    #[test]
    fn single_group_density_equals_pooled_kde() {
        let test = [0.3, -1.1, 2.5, 0.0];
        let calib = [1.4, -0.2, 0.7, -2.0];
        let w = group_weights(&["g"; 4]).unwrap();
        let h = 0.6;
        for &t in &[-3.0, -0.5, 0.1, 1.9] {
            let brute: f64 = test
                .iter()
                .chain(calib.iter())
                .map(|x| phi((t - x) / h) / h)
                .sum::<f64>()
                / 8.0;
            for i in 0..4 {
                let f = conformal_density(i, t, &test, &calib, &w, h).unwrap();
                assert!((f - brute).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn proportion_hand_count() {
        let w = group_weights(&[0, 0]).unwrap();
        let p = conformal_proportion(0, &[0.01, 0.8], &[0.6, 0.9], &w, 0.5).unwrap();
        assert!((p - (-0.5)).abs() < 1e-15);
        let p = conformal_proportion(1, &[0.01, 0.2], &[0.3, 0.5], &w, 0.5).unwrap();
        assert_eq!(p, 1.0);
        let q = conformal_proportion(0, &[0.6, 0.8], &[0.01, 0.9], &w, 0.5).unwrap();
        assert_eq!(q, -0.5);
    }

    #[test]
    fn proportion_zero_weight_row() {
        let w = WeightMatrix::from_dense(1, vec![1.0]).unwrap();
        assert!(conformal_proportion(0, &[0.1], &[0.2], &w, 0.5).is_ok());
        assert!(matches!(
            conformal_proportion(3, &[0.1], &[0.2], &w, 0.5),
            Err(ClawError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn clamp_branches() {
        assert_eq!(clamp_proportion(-0.5, 0.001), 0.001);
        assert_eq!(clamp_proportion(0.0, 0.001), 0.001);
        assert_eq!(clamp_proportion(0.7, 0.001), 0.499);
        assert_eq!(clamp_proportion(0.3, 0.001), 0.3);
        assert_eq!(clamp_proportion(0.5, 0.001), 0.5);
    }

    #[test]
    fn clfdr_examples() {
        assert!((clfdr_score(0.2, 0.25, 0.4, 0.999, 1e-12) - 0.375).abs() < 1e-15);
        assert_eq!(clfdr_score(0.2, 0.25, 0.0, 0.999, 1e-12), 0.999);
        assert_eq!(clfdr_score(0.0, 0.25, 0.4, 0.999, 1e-12), 0.0);
    }

    #[test]
    fn r_transform_examples() {
        assert!((r_transform(0.5, 0.25) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r_transform(0.0, 0.1), 0.0);
        assert_eq!(r_transform(0.7, 0.5), 0.0);
    }

    // Reference CDF by composite Simpson integration of the density.
    fn simpson_cdf(t: f64) -> f64 {
        let n = 20_000;
        let h = t / n as f64;
        let mut s = phi(0.0) + phi(t);
        for k in 1..n {
            let x = k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * phi(x);
        }
        0.5 + s * h / 3.0
    }

    #[test]
    fn pvalues_standard_normal() {
        let null = StandardNormal;
        assert_eq!(pvalue_from_null(0.0, &null, Sidedness::TwoSided), 1.0);
        let t = 1.959964;
        let reference = 2.0 * (1.0 - simpson_cdf(t));
        let p = pvalue_from_null(t, &null, Sidedness::TwoSided);
        assert!((p - reference).abs() < 1e-9);
        assert!((p - 0.05).abs() < 1e-6);
        assert_eq!(
            pvalue_from_null(f64::INFINITY, &null, Sidedness::Right),
            0.0
        );
        assert!(
            (pvalue_from_null(-1.0, &null, Sidedness::Left) - (1.0 - simpson_cdf(1.0))).abs()
                < 1e-9
        );
    }

    #[test]
    fn tabulated_null_interpolates() {
        let tab =
            TabulatedNull::new(vec![(-1.0, 0.0, 0.5), (0.0, 0.5, 0.5), (1.0, 1.0, 0.5)]).unwrap();
        assert!((tab.cdf(0.5) - 0.75).abs() < 1e-15);
        assert_eq!(tab.cdf(-3.0), 0.0);
        assert_eq!(tab.cdf(3.0), 1.0);
        assert_eq!(tab.pdf(3.0), 0.0);
        assert_eq!(tab.pdf(0.25), 0.5);
        assert!((pvalue_from_null(0.0, &tab, Sidedness::TwoSided) - 1.0).abs() < 1e-15);
        assert!(TabulatedNull::new(vec![(0.0, 0.5, 1.0), (0.0, 0.6, 1.0)]).is_err());
    }

    #[test]
    fn kde_is_permutation_invariant() {
        let a = Kde::silverman(&[0.3, 1.2, -0.7, 2.2, 0.0]).unwrap();
        let b = Kde::silverman(&[2.2, 0.0, 0.3, -0.7, 1.2]).unwrap();
        for &t in &[-1.0, 0.25, 3.0] {
            assert_eq!(a.eval(t).to_bits(), b.eval(t).to_bits());
        }
    }

    #[test]
    fn kde_table_matches_brute_force() {
        let pts = [0.3, 1.2, -0.7, 2.2, 0.0, 0.3, 9.0];
        let kde = Kde::new(&pts, 0.4).unwrap();
        let queries = [0.3, 9.0, -0.7, 4.0, 100.0];
        let got = kde.eval_many(&queries);
        for (q, g) in queries.iter().zip(&got) {
            let brute: f64 = pts.iter().map(|x| phi((q - x) / 0.4) / 0.4).sum::<f64>() / 7.0;
            assert!(
                (g - brute).abs() <= 1e-14 * brute.max(1e-300),
                "{q}: {g} vs {brute}"
            );
            assert!((kde.eval(*q) - brute).abs() <= 1e-14 * brute.max(1e-300));
        }
    }

    proptest! {
        #[test]
        fn swap_invariance_of_density_and_proportion(
            pairs in proptest::collection::vec((-4.0f64..4.0, -4.0f64..4.0), 2..25),
            mask in proptest::collection::vec(any::<bool>(), 25),
            t in -5.0f64..5.0,
        ) {
            let m = pairs.len();
            let test: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let calib: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let (mut st, mut sc) = (test.clone(), calib.clone());
            for j in 0..m {
                if mask[j] {
                    std::mem::swap(&mut st[j], &mut sc[j]);
                }
            }
            let xs: Vec<f64> = (0..m).map(|i| i as f64).collect();
            let w = kernel_weights(&xs, 1, 3.0, Norm::Abs).unwrap();
            let h = silverman_bandwidth(&[test.clone(), calib.clone()].concat()).unwrap();
            let h2 = silverman_bandwidth(&[st.clone(), sc.clone()].concat()).unwrap();
            prop_assert_eq!(h.to_bits(), h2.to_bits());
            let pt: Vec<f64> = test.iter().map(|&x| pvalue_from_null(x, &StandardNormal, Sidedness::TwoSided)).collect();
            let pc: Vec<f64> = calib.iter().map(|&x| pvalue_from_null(x, &StandardNormal, Sidedness::TwoSided)).collect();
            let (mut spt, mut spc) = (pt.clone(), pc.clone());
            for j in 0..m {
                if mask[j] {
                    std::mem::swap(&mut spt[j], &mut spc[j]);
                }
            }
            for i in 0..m {
                let a = conformal_density(i, t, &test, &calib, &w, h).unwrap();
                let b = conformal_density(i, t, &st, &sc, &w, h2).unwrap();
                prop_assert_eq!(a.to_bits(), b.to_bits());
                let a = conformal_proportion(i, &pt, &pc, &w, 0.5).unwrap();
                let b = conformal_proportion(i, &spt, &spc, &w, 0.5).unwrap();
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn r_transform_preserves_clfdr_ranking(
            clfdrs in proptest::collection::vec(0.0f64..0.999, 2..40),
            pi in 0.001f64..0.499,
        ) {
            for a in &clfdrs {
                for b in &clfdrs {
                    if a < b {
                        prop_assert!(r_transform(*a, pi) < r_transform(*b, pi));
                    }
                }
            }
        }

        #[test]
        fn clamped_proportion_in_range(raw in -10.0f64..10.0, eps in 1e-6f64..0.25) {
            let c = clamp_proportion(raw, eps);
            prop_assert!(c > 0.0 && c <= 0.5);
            prop_assert!(c >= eps.min(raw));
        }
    }
}
