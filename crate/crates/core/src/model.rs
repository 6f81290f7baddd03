//! Shared domain types: test units, datasets, configuration and validation.
//!
//! A dataset is a sequence of triples `(t, t_cal, s)`: the primary statistic,
//! a calibration draw from the null, and a covariate carrying side
//! information. Covariates are either categorical labels (grouped
//! hypotheses) or real vectors (ordinal or spatial positions); every unit of
//! a dataset must use the same kind and dimension.

use serde::{Deserialize, Serialize};

use crate::error::{ClawError, Result};

/// Side information attached to one hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariate {
    Label(String),
    Real(Vec<f64>),
}

impl Covariate {
    pub fn label(s: impl Into<String>) -> Self {
        Covariate::Label(s.into())
    }

    pub fn scalar(x: f64) -> Self {
        Covariate::Real(vec![x])
    }

    fn same_kind(&self, other: &Covariate) -> bool {
        match (self, other) {
            (Covariate::Label(_), Covariate::Label(_)) => true,
            (Covariate::Real(a), Covariate::Real(b)) => a.len() == b.len(),
            _ => false,
        }
    }
}

/// One hypothesis: test statistic, covariate and paired calibration statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestUnit {
    pub t: f64,
    pub s: Covariate,
    pub t_cal: f64,
}

impl TestUnit {
    pub fn new(t: f64, s: Covariate, t_cal: f64) -> Self {
        Self { t, s, t_cal }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub units: Vec<TestUnit>,
    /// Labeled null samples for the semi-supervised setup.
    pub null_pool: Option<Vec<f64>>,
    /// Signal indicators (`true` = non-null), simulation only.
    pub truth: Option<Vec<bool>>,
}

/// Column-oriented view of the covariates of a validated dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateColumn {
    /// Group codes assigned in order of first appearance.
    Categorical {
        codes: Vec<usize>,
        levels: Vec<String>,
    },
    /// Row-major `m x dim` coordinates.
    Real { dim: usize, coords: Vec<f64> },
}

impl CovariateColumn {
    pub fn len(&self) -> usize {
        match self {
            CovariateColumn::Categorical { codes, .. } => codes.len(),
            CovariateColumn::Real { dim, coords } => coords.len() / dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Dataset {
    pub fn new(units: Vec<TestUnit>) -> Self {
        Self {
            units,
            null_pool: None,
            truth: None,
        }
    }

    pub fn with_null_pool(mut self, pool: Vec<f64>) -> Self {
        self.null_pool = Some(pool);
        self
    }

    pub fn with_truth(mut self, truth: Vec<bool>) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn m(&self) -> usize {
        self.units.len()
    }

    pub fn t_values(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.t).collect()
    }

    pub fn t_cal_values(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.t_cal).collect()
    }

    /// Swaps `t` and `t_cal` for every index in `subset`.
    pub fn swapped(&self, subset: &[usize]) -> Dataset {
        let mut out = self.clone();
        for &j in subset {
            let u = &mut out.units[j];
            std::mem::swap(&mut u.t, &mut u.t_cal);
        }
        out
    }

    pub fn covariate_column(&self) -> Result<CovariateColumn> {
        let first = self.units.first().ok_or(ClawError::EmptyDataset)?;
        match &first.s {
            Covariate::Label(_) => {
                let mut levels: Vec<String> = Vec::new();
                let mut codes = Vec::with_capacity(self.m());
                for (i, u) in self.units.iter().enumerate() {
                    let Covariate::Label(l) = &u.s else {
                        return Err(ClawError::MixedCovariateKinds { index: i });
                    };
                    let code = match levels.iter().position(|x| x == l) {
                        Some(c) => c,
                        None => {
                            levels.push(l.clone());
                            levels.len() - 1
                        }
                    };
                    codes.push(code);
                }
                Ok(CovariateColumn::Categorical { codes, levels })
            }
            Covariate::Real(v0) => {
                let dim = v0.len();
                if dim == 0 {
                    return Err(ClawError::DimensionMismatch(
                        "real covariates need dimension >= 1".into(),
                    ));
                }
                let mut coords = Vec::with_capacity(self.m() * dim);
                for (i, u) in self.units.iter().enumerate() {
                    match &u.s {
                        Covariate::Real(v) if v.len() == dim => coords.extend_from_slice(v),
                        _ => return Err(ClawError::MixedCovariateKinds { index: i }),
                    }
                }
                Ok(CovariateColumn::Real { dim, coords })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandwidthRule {
    #[default]
    Silverman,
    Fixed {
        h: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `w_ij = 1{S_i = S_j}`; requires categorical covariates.
    #[default]
    Group,
    /// `w_ij = phi(||S_i - S_j|| / scale)`; requires real covariates.
    Gaussian { scale: f64 },
    /// Caller supplies the weight matrix.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    Left,
    Right,
}

/// Tuning parameters for a CLAW run. Defaults: `lambda = 0.5`,
/// `epsilon = 0.001`, `clfdr_cap = 0.999`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClawConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub clfdr_cap: f64,
    pub density_floor: f64,
    pub bandwidth: BandwidthRule,
    pub weights: WeightSpec,
    pub sidedness: Sidedness,
    pub seed: u64,
}

impl Default for ClawConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            lambda: 0.5,
            epsilon: 0.001,
            clfdr_cap: 0.999,
            density_floor: 1e-12,
            bandwidth: BandwidthRule::Silverman,
            weights: WeightSpec::Group,
            sidedness: Sidedness::TwoSided,
            seed: 0,
        }
    }
}

impl ClawConfig {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_weights(mut self, weights: WeightSpec) -> Self {
        self.weights = weights;
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, reason: impl Into<String>) -> ClawError {
            ClawError::InvalidConfig {
                field,
                reason: reason.into(),
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(bad("alpha", format!("{} not in (0, 1]", self.alpha)));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(bad("lambda", format!("{} not in (0, 1)", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(bad("epsilon", format!("{} not in (0, 1/2)", self.epsilon)));
        }
        if !(self.clfdr_cap > 0.0 && self.clfdr_cap < 1.0) {
            return Err(bad(
                "clfdr_cap",
                format!("{} not in (0, 1)", self.clfdr_cap),
            ));
        }
        if !(self.density_floor > 0.0 && self.density_floor.is_finite()) {
            return Err(bad("density_floor", "must be positive and finite"));
        }
        if let BandwidthRule::Fixed { h } = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(bad("bandwidth.h", format!("{h} must be positive")));
            }
        }
        if let WeightSpec::Gaussian { scale } = self.weights {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(bad("weights.scale", format!("{scale} must be positive")));
            }
        }
        Ok(())
    }
}

/// Checks every dataset invariant and returns the dataset unchanged.
pub fn validate_dataset(d: Dataset, cfg: &ClawConfig) -> Result<Dataset> {
    cfg.validate()?;
    if d.units.is_empty() {
        return Err(ClawError::EmptyDataset);
    }
    for (i, u) in d.units.iter().enumerate() {
        if !u.t.is_finite() {
            return Err(ClawError::NonFiniteValue {
                field: "t",
                index: i,
            });
        }
        if !u.t_cal.is_finite() {
            return Err(ClawError::NonFiniteValue {
                field: "t_cal",
                index: i,
            });
        }
        if let Covariate::Real(v) = &u.s {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ClawError::NonFiniteValue {
                    field: "s",
                    index: i,
                });
            }
        }
    }
    let first = &d.units[0].s;
    if let Some(i) = d.units.iter().position(|u| !u.s.same_kind(first)) {
        return Err(ClawError::MixedCovariateKinds { index: i });
    }
    if let Covariate::Real(v) = first {
        if v.is_empty() {
            return Err(ClawError::DimensionMismatch(
                "real covariates need dimension >= 1".into(),
            ));
        }
    }
    if let Some(truth) = &d.truth {
        if truth.len() != d.m() {
            return Err(ClawError::LengthMismatch {
                expected: d.m(),
                actual: truth.len(),
            });
        }
    }
    if let Some(pool) = &d.null_pool {
        if let Some(i) = pool.iter().position(|x| !x.is_finite()) {
            return Err(ClawError::NonFiniteValue {
                field: "null_pool",
                index: i,
            });
        }
    }
    Ok(d)
}
