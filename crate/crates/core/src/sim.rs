//! Simulation designs, error metrics and a seeded replication engine.
//!
//! Each replication derives its own seed from the master seed and its index,
//! and draws test data, calibration data and null pools from separate
//! ChaCha streams keyed by that seed. Results therefore do not depend on how
//! replications are scheduled across worker threads.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{bh, pooled_cbh, pooled_cbh_trained, separate_bh, separate_cbh, storey_bh};
use crate::error::{ClawError, Result};
use crate::estimators::{pvalue_from_null, StandardNormal};
use crate::mirror::decide;
use crate::model::{ClawConfig, Covariate, CovariateColumn, Dataset, TestUnit, WeightSpec};
use crate::normal;
use crate::pipeline::{claw_run, oracle_scores, TrueModel};
use crate::semisup::{semisup_claw_run, split_nulls, SemisupOptions};

pub const STREAM_DATA: u64 = 1;
pub const STREAM_CALIBRATION: u64 = 2;
pub const STREAM_POOL: u64 = 3;
pub const STREAM_SPLIT: u64 = 4;
pub const STREAM_AUGMENT: u64 = 5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `r` under `master`.
pub fn replication_seed(master: u64, r: u64) -> u64 {
    splitmix64(master ^ splitmix64(r))
}

/// An independent ChaCha stream for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on the open interval (0, 1) with 53 random bits.
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw by inverse CDF.
pub fn std_normal(rng: &mut impl RngCore) -> f64 {
    normal::quantile(uniform01(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalDist {
    pub mean: f64,
    pub sd: f64,
}

impl NormalDist {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        normal::pdf((t - self.mean) / self.sd) / self.sd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Grouped,
    Ordinal,
    Spatial2d,
}

impl FromStr for Family {
    type Err = ClawError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grouped" => Ok(Family::Grouped),
            "ordinal" => Ok(Family::Ordinal),
            "spatial2d" | "spatial" => Ok(Family::Spatial2d),
            other => Err(ClawError::UnknownSetting(format!("family {other}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Grouped => "grouped",
            Family::Ordinal => "ordinal",
            Family::Spatial2d => "spatial2d",
        })
    }
}

/// One group of a grouped design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub size: usize,
    pub pi: f64,
    pub alt: NormalDist,
}

/// A two-group mixture with per-unit signal probability and alternative;
/// the null is standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimModel {
    pub covariates: Vec<Covariate>,
    pub pi: Vec<f64>,
    pub alt: Vec<NormalDist>,
    /// Weights the designs are analysed with.
    pub weights: WeightSpec,
}

impl TrueModel for SimModel {
    fn pi(&self, i: usize) -> f64 {
        self.pi[i]
    }
    fn f0(&self, t: f64) -> f64 {
        normal::pdf(t)
    }
    fn f1(&self, i: usize, t: f64) -> f64 {
        self.alt[i].pdf(t)
    }
}

impl SimModel {
    pub fn m(&self) -> usize {
        self.pi.len()
    }

    pub fn grouped(groups: &[GroupSpec]) -> Result<Self> {
        let mut out = SimModel {
            covariates: Vec::new(),
            pi: Vec::new(),
            alt: Vec::new(),
            weights: WeightSpec::Group,
        };
        for (k, g) in groups.iter().enumerate() {
            check_range("pi", g.pi, 0.0, 1.0, "[0, 1]")?;
            if g.size == 0 {
                return Err(ClawError::EmptyGroup { group: k });
            }
            let label = Covariate::label((k + 1).to_string());
            out.covariates.extend(std::iter::repeat_n(label, g.size));
            out.pi.extend(std::iter::repeat_n(g.pi, g.size));
            out.alt.extend(std::iter::repeat_n(g.alt, g.size));
        }
        if out.pi.is_empty() {
            return Err(ClawError::EmptyDataset);
        }
        Ok(out)
    }

    /// Draws `(T, T̃, truth)`. Every unit consumes two data draws and one
    /// calibration draw whatever its outcome.
    pub fn generate(&self, seed: u64) -> Dataset {
        let mut data_rng = stream_rng(seed, STREAM_DATA);
        let mut cal_rng = stream_rng(seed, STREAM_CALIBRATION);
        let mut truth = Vec::with_capacity(self.m());
        let units = (0..self.m())
            .map(|i| {
                let signal = uniform01(&mut data_rng) < self.pi[i];
                let z = std_normal(&mut data_rng);
                let t = if signal {
                    self.alt[i].mean + self.alt[i].sd * z
                } else {
                    z
                };
                truth.push(signal);
                TestUnit::new(t, self.covariates[i].clone(), std_normal(&mut cal_rng))
            })
            .collect();
        Dataset::new(units).with_truth(truth)
    }

    /// Standard normal null pool of `size` values.
    pub fn null_pool(seed: u64, size: usize) -> Vec<f64> {
        let mut rng = stream_rng(seed, STREAM_POOL);
        (0..size).map(|_| std_normal(&mut rng)).collect()
    }
}

fn check_range(name: &'static str, v: f64, lo: f64, hi: f64, range: &'static str) -> Result<()> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        Err(ClawError::InvalidParameter {
            name,
            value: v,
            range,
        })
    }
}

/// A design from the simulation catalogue with its swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub setting: u8,
    /// mu, pi, m2 or R depending on the family and setting.
    pub param: f64,
}

impl GeneratorSpec {
    pub fn new(family: Family, setting: u8, param: f64) -> Self {
        Self {
            family,
            setting,
            param,
        }
    }

    /// Name of the swept parameter.
    pub fn param_name(&self) -> &'static str {
        match (self.family, self.setting) {
            (Family::Grouped, 2) | (Family::Ordinal, 2) | (Family::Spatial2d, 2) => "pi",
            (Family::Grouped, 3) => "m2",
            (Family::Spatial2d, 3) => "r",
            _ => "mu",
        }
    }

    pub fn model(&self) -> Result<SimModel> {
        match self.family {
            Family::Grouped => grouped_model(self.setting, self.param),
            Family::Ordinal => ordinal_model(self.setting, self.param),
            Family::Spatial2d => spatial_model(self.setting, self.param),
        }
    }
}

fn unknown(family: Family, setting: u8) -> ClawError {
    ClawError::UnknownSetting(format!("{family} setting {setting}"))
}

pub fn grouped_model(setting: u8, param: f64) -> Result<SimModel> {
    let groups = match setting {
        1 => {
            check_range("mu", param, -10.0, 10.0, "[-10, 10]")?;
            [
                GroupSpec {
                    size: 3000,
                    pi: 0.2,
                    alt: NormalDist::new(param, 1.0),
                },
                GroupSpec {
                    size: 1500,
                    pi: 0.1,
                    alt: NormalDist::new(-2.0, 0.5),
                },
            ]
        }
        2 => {
            check_range("pi", param, 0.0, 1.0, "[0, 1]")?;
            [
                GroupSpec {
                    size: 3000,
                    pi: 0.2,
                    alt: NormalDist::new(2.0, 1.0),
                },
                GroupSpec {
                    size: 1500,
                    pi: param,
                    alt: NormalDist::new(-4.0, 1.0),
                },
            ]
        }
        3 => {
            check_range("m2", param, 1.0, 100_000.0, "integer in [1, 100000]")?;
            if param.fract() != 0.0 {
                return Err(ClawError::InvalidParameter {
                    name: "m2",
                    value: param,
                    range: "integer in [1, 100000]",
                });
            }
            [
                GroupSpec {
                    size: 3000,
                    pi: 0.2,
                    alt: NormalDist::new(2.0, 0.5),
                },
                GroupSpec {
                    size: param as usize,
                    pi: 0.1,
                    alt: NormalDist::new(-4.0, 1.0),
                },
            ]
        }
        s => return Err(unknown(Family::Grouped, s)),
    };
    SimModel::grouped(&groups)
}

pub const ORDINAL_M: usize = 3000;
pub const ORDINAL_WEIGHT_SCALE: f64 = 150.0;
pub const SPATIAL_SIDE: usize = 100;
pub const SPATIAL_WEIGHT_SCALE: f64 = 15.0;
const BACKGROUND_PI: f64 = 0.02;

fn within(s: usize, blocks: &[(usize, usize)]) -> bool {
    blocks.iter().any(|&(a, b)| a <= s && s <= b)
}

pub fn ordinal_model(setting: u8, param: f64) -> Result<SimModel> {
    const HIGH: [(usize, usize); 2] = [(201, 350), (1501, 1650)];
    const MID: [(usize, usize); 2] = [(801, 1000), (2101, 2300)];
    const WAVE: [(usize, usize); 4] = [(201, 500), (801, 1100), (1501, 1800), (2101, 2400)];
    let (mut pi, mut alt) = (Vec::with_capacity(ORDINAL_M), Vec::with_capacity(ORDINAL_M));
    match setting {
        1 => check_range("mu", param, -10.0, 10.0, "[-10, 10]")?,
        2 => check_range("pi", param, 0.0, 0.5, "[0, 0.5]")?,
        3 => check_range("mu", param, -10.0, 10.0, "[-10, 10]")?,
        s => return Err(unknown(Family::Ordinal, s)),
    }
    for s in 1..=ORDINAL_M {
        let x = s as f64;
        let (p, f1) = match setting {
            1 => {
                let p = if within(s, &HIGH) {
                    0.6
                } else if within(s, &MID) {
                    0.3
                } else {
                    BACKGROUND_PI
                };
                (p, NormalDist::new(param, 1.0))
            }
            2 => {
                let p = if within(s, &HIGH) {
                    2.0 * param
                } else if within(s, &MID) {
                    param
                } else {
                    BACKGROUND_PI
                };
                let f1 = if s <= 1500 {
                    NormalDist::new(-2.5, 1.0)
                } else {
                    NormalDist::new(3.6, 1.5)
                };
                (p, f1)
            }
            _ => {
                let p = if within(s, &WAVE) {
                    0.4 * (1.0 + (0.02 * x).sin())
                } else {
                    BACKGROUND_PI
                };
                (p, NormalDist::new(param + 0.15 * (0.6 * x).sin(), 1.0))
            }
        };
        pi.push(p);
        alt.push(f1);
    }
    Ok(SimModel {
        covariates: (1..=ORDINAL_M)
            .map(|s| Covariate::scalar(s as f64))
            .collect(),
        pi,
        alt,
        weights: WeightSpec::Gaussian {
            scale: ORDINAL_WEIGHT_SCALE,
        },
    })
}

/// Whether lattice cell `(x, y)` lies in the elevated region for ring
/// bounds `lo <= d^2 <= hi`.
pub fn spatial_elevated(x: usize, y: usize, lo: f64, hi: f64) -> bool {
    let (dx, dy) = (x as f64 - 30.0, y as f64 - 70.0);
    let d2 = dx * dx + dy * dy;
    let ring = lo <= d2 && d2 <= hi;
    let square = (62..=90).contains(&x) && (10..=38).contains(&y);
    ring || square
}

pub fn spatial_model(setting: u8, param: f64) -> Result<SimModel> {
    let (lo, hi, level, f1) = match setting {
        1 => {
            check_range("mu", param, -10.0, 10.0, "[-10, 10]")?;
            (10.0, 20.0, 0.75, NormalDist::new(param, 1.0))
        }
        2 => {
            check_range("pi", param, 0.0, 1.0, "[0, 1]")?;
            (10.0, 20.0, param, NormalDist::new(2.8, 1.0))
        }
        3 => {
            check_range("r", param, 0.0, 20_000.0, "[0, 20000]")?;
            (param / 2.0, param, 0.75, NormalDist::new(2.5, 1.0))
        }
        s => return Err(unknown(Family::Spatial2d, s)),
    };
    let m = SPATIAL_SIDE * SPATIAL_SIDE;
    let mut model = SimModel {
        covariates: Vec::with_capacity(m),
        pi: Vec::with_capacity(m),
        alt: vec![f1; m],
        weights: WeightSpec::Gaussian {
            scale: SPATIAL_WEIGHT_SCALE,
        },
    };
    for x in 1..=SPATIAL_SIDE {
        for y in 1..=SPATIAL_SIDE {
            model
                .covariates
                .push(Covariate::Real(vec![x as f64, y as f64]));
            model.pi.push(if spatial_elevated(x, y, lo, hi) {
                level
            } else {
                BACKGROUND_PI
            });
        }
    }
    Ok(model)
}

pub fn gen_grouped(setting: u8, param: f64, seed: u64) -> Result<Dataset> {
    Ok(grouped_model(setting, param)?.generate(seed))
}

pub fn gen_ordinal(setting: u8, param: f64, seed: u64) -> Result<Dataset> {
    Ok(ordinal_model(setting, param)?.generate(seed))
}

pub fn gen_spatial2d(setting: u8, param: f64, seed: u64) -> Result<Dataset> {
    Ok(spatial_model(setting, param)?.generate(seed))
}

/// `(|R ∩ H0| / max(|R|, 1), |R \ H0| / max(#signals, 1))`.
pub fn fdp_tdp(rejected: &[usize], truth: &[bool]) -> Result<(f64, f64)> {
    let (v, s) = false_true_counts(rejected, truth)?;
    let signals = truth.iter().filter(|&&b| b).count();
    Ok((
        v as f64 / rejected.len().max(1) as f64,
        s as f64 / signals.max(1) as f64,
    ))
}

fn false_true_counts(rejected: &[usize], truth: &[bool]) -> Result<(usize, usize)> {
    let mut v = 0;
    for &i in rejected {
        match truth.get(i) {
            Some(true) => {}
            Some(false) => v += 1,
            None => {
                return Err(ClawError::IndexOutOfRange {
                    index: i,
                    len: truth.len(),
                })
            }
        }
    }
    Ok((v, rejected.len() - v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Claw,
    Bh,
    StoreyBh,
    SeparateBh,
    PooledCbh,
    SeparateCbh,
    OracleClaw,
    SemisupClaw,
    SemisupPooledCbh,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Claw,
        Method::Bh,
        Method::StoreyBh,
        Method::SeparateBh,
        Method::PooledCbh,
        Method::SeparateCbh,
        Method::OracleClaw,
        Method::SemisupClaw,
        Method::SemisupPooledCbh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Claw => "claw",
            Method::Bh => "bh",
            Method::StoreyBh => "storey_bh",
            Method::SeparateBh => "separate_bh",
            Method::PooledCbh => "pooled_cbh",
            Method::SeparateCbh => "separate_cbh",
            Method::OracleClaw => "oracle_claw",
            Method::SemisupClaw => "semisup_claw",
            Method::SemisupPooledCbh => "semisup_pooled_cbh",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ClawError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ClawError::MissingInput(format!("unknown method `{s}`")))
    }
}

/// Settings shared by every method in a replication study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    /// Base CLAW configuration; `weights` is overridden by the design and
    /// `seed` by the replication seed.
    pub claw: ClawConfig,
    /// Null pool size as a multiple of `m` for semi-supervised methods.
    pub pool_factor: usize,
    pub semisup: SemisupOptions,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            claw: ClawConfig::default(),
            pool_factor: 3,
            semisup: SemisupOptions::default(),
        }
    }
}

/// Result of one method on one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    pub fdp: f64,
    pub tdp: f64,
    pub false_rejections: usize,
    pub rejections: usize,
}

/// Runs `method` on `data`, whose truth must be attached.
pub fn run_method(
    method: Method,
    data: &Dataset,
    model: &SimModel,
    cfg: &StudyConfig,
    seed: u64,
) -> Result<Vec<usize>> {
    let claw_cfg = ClawConfig {
        weights: model.weights,
        seed,
        ..cfg.claw.clone()
    };
    let alpha = claw_cfg.alpha;
    let floor = claw_cfg.density_floor;
    let test = data.t_values();
    let calib = data.t_cal_values();
    let pvals = || -> Vec<f64> {
        test.iter()
            .map(|&t| pvalue_from_null(t, &StandardNormal, claw_cfg.sidedness))
            .collect()
    };
    let groups = || -> Result<Vec<usize>> {
        match data.covariate_column()? {
            CovariateColumn::Categorical { codes, .. } => Ok(codes),
            CovariateColumn::Real { .. } => Err(ClawError::InvalidConfig {
                field: "methods",
                reason: format!("{method} needs categorical covariates"),
            }),
        }
    };
    let pool = || SimModel::null_pool(seed, cfg.pool_factor * data.m());
    match method {
        Method::Claw => Ok(claw_run(data.clone(), &StandardNormal, &claw_cfg)?
            .decision
            .rejected),
        Method::Bh => Ok(bh(&pvals(), alpha)),
        Method::StoreyBh => Ok(storey_bh(&pvals(), alpha, claw_cfg.lambda)),
        Method::SeparateBh => separate_bh(&pvals(), &groups()?, alpha),
        Method::PooledCbh => pooled_cbh(&test, &calib, &StandardNormal, alpha, floor),
        Method::SeparateCbh => {
            separate_cbh(&test, &calib, &groups()?, &StandardNormal, alpha, floor)
        }
        Method::OracleClaw => {
            let (u, uc): (Vec<f64>, Vec<f64>) = oracle_scores(data, model).into_iter().unzip();
            Ok(decide(&u, &uc, alpha)?.rejected)
        }
        Method::SemisupClaw => {
            let d = data.clone().with_null_pool(pool());
            Ok(semisup_claw_run(d, &claw_cfg, cfg.semisup)?
                .run
                .decision
                .rejected)
        }
        Method::SemisupPooledCbh => {
            let split = split_nulls(&pool(), data.m(), seed, cfg.semisup.train_fraction)?;
            pooled_cbh_trained(&test, &split.calibration, &split.training(), alpha, floor)
        }
    }
}

/// Per-replication outcomes for every method, in replication order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replications {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// `outcomes[r][k]` is method `k` on replication `r`.
    pub outcomes: Vec<Vec<Outcome>>,
}

/// Runs `n_reps` replications of `model` on `workers` threads.
pub fn replicate_model(
    model: &SimModel,
    methods: &[Method],
    cfg: &StudyConfig,
    n_reps: usize,
    master_seed: u64,
    workers: usize,
) -> Result<Replications> {
    if n_reps == 0 {
        return Err(ClawError::InvalidParameter {
            name: "n_reps",
            value: 0.0,
            range: ">= 1",
        });
    }
    if methods.is_empty() {
        return Err(ClawError::MissingInput("no methods requested".into()));
    }
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ClawError::InvalidConfig {
            field: "workers",
            reason: e.to_string(),
        })?;
    let seeds: Vec<u64> = (0..n_reps as u64)
        .map(|r| replication_seed(master_seed, r))
        .collect();
    let results: Vec<Result<Vec<Outcome>>> = threads.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(r, &seed)| {
                one_replication(model, methods, cfg, seed).map_err(|e| ClawError::Replication {
                    replication: r,
                    seed,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Replications {
        methods: methods.to_vec(),
        seeds,
        outcomes,
    })
}

fn one_replication(
    model: &SimModel,
    methods: &[Method],
    cfg: &StudyConfig,
    seed: u64,
) -> Result<Vec<Outcome>> {
    let data = model.generate(seed);
    let truth = data.truth.clone().unwrap_or_default();
    methods
        .iter()
        .map(|&method| {
            let rejected = run_method(method, &data, model, cfg, seed)?;
            let (fdp, tdp) = fdp_tdp(&rejected, &truth)?;
            let (v, _) = false_true_counts(&rejected, &truth)?;
            Ok(Outcome {
                fdp,
                tdp,
                false_rejections: v,
                rejections: rejected.len(),
            })
        })
        .collect()
}

/// Sample mean and standard error (`sd / sqrt(n)`, 0 when `n == 1`).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub fdr: f64,
    pub fdr_se: f64,
    pub ap: f64,
    pub ap_se: f64,
    pub mfdr: f64,
    pub mean_rejections: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub spec: Option<GeneratorSpec>,
    pub alpha: f64,
    pub n_reps: usize,
    pub master_seed: u64,
    /// False when `n_reps == 1`; standard errors are then reported as 0.
    pub se_defined: bool,
    pub methods: Vec<MethodSummary>,
    /// Not serialized, so reports stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl Replications {
    fn column(&self, k: usize, f: impl Fn(&Outcome) -> f64) -> Vec<f64> {
        self.outcomes.iter().map(|row| f(&row[k])).collect()
    }

    fn index(&self, method: Method) -> Result<usize> {
        self.methods
            .iter()
            .position(|&m| m == method)
            .ok_or_else(|| ClawError::MissingInput(format!("method {method} was not run")))
    }

    pub fn fdps(&self, method: Method) -> Result<Vec<f64>> {
        Ok(self.column(self.index(method)?, |o| o.fdp))
    }

    pub fn tdps(&self, method: Method) -> Result<Vec<f64>> {
        Ok(self.column(self.index(method)?, |o| o.tdp))
    }

    /// Mean and standard error of the per-replication TDP difference `a - b`.
    pub fn paired_ap_difference(&self, a: Method, b: Method) -> Result<(f64, f64)> {
        let (x, y) = (self.tdps(a)?, self.tdps(b)?);
        let diff: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p - q).collect();
        Ok(mean_se(&diff))
    }

    pub fn summary(
        &self,
        spec: Option<GeneratorSpec>,
        alpha: f64,
        master_seed: u64,
    ) -> ReplicationSummary {
        let methods = self
            .methods
            .iter()
            .enumerate()
            .map(|(k, &method)| {
                let (fdr, fdr_se) = mean_se(&self.column(k, |o| o.fdp));
                let (ap, ap_se) = mean_se(&self.column(k, |o| o.tdp));
                let v: usize = self.outcomes.iter().map(|r| r[k].false_rejections).sum();
                let r: usize = self.outcomes.iter().map(|r| r[k].rejections).sum();
                MethodSummary {
                    method,
                    fdr,
                    fdr_se,
                    ap,
                    ap_se,
                    mfdr: if r == 0 { 0.0 } else { v as f64 / r as f64 },
                    mean_rejections: r as f64 / self.outcomes.len() as f64,
                }
            })
            .collect();
        ReplicationSummary {
            spec,
            alpha,
            n_reps: self.outcomes.len(),
            master_seed,
            se_defined: self.outcomes.len() > 1,
            methods,
            wall_time_secs: 0.0,
        }
    }
}

/// Replicates a catalogue design and summarizes it.
pub fn replicate(
    spec: GeneratorSpec,
    methods: &[Method],
    cfg: &StudyConfig,
    n_reps: usize,
    master_seed: u64,
    workers: usize,
) -> Result<ReplicationSummary> {
    let start = Instant::now();
    let model = spec.model()?;
    let reps = replicate_model(&model, methods, cfg, n_reps, master_seed, workers)?;
    let mut summary = reps.summary(Some(spec), cfg.claw.alpha, master_seed);
    summary.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(summary)
}
