//! Monte Carlo experiment engine: seeded trial grids over the learners of the
//! other modules, bound verification, log-log rate fits and the adversarial
//! Massart family.
//!
//! Trial seeds are derived as
//! `mix(mix(mix(master ^ fnv1a(learner_id)) ^ n) ^ trial)` where `mix` is the
//! SplitMix64 finalizer, so any single trial can be replayed from the master
//! seed alone. Trials run in parallel and are collected in grid order, which
//! makes tables bit-identical across runs and thread counts.

use std::collections::BTreeMap;
use std::f64::consts::E;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compression::{majority_of_three, CompressionScheme, Predictor};
use crate::domain::{
    angle_between, closed_form_disagreement, conditional_loss, disagreement_on, excess_risk,
    generate_sample, true_risk, DistributionSpec, EvaluationDesign, Hypothesis, HypothesisClass,
    LossKind, Marginal, NoiseModel, Sample, DEFAULT_MC_POINTS, EVAL_SEED,
};
use crate::entropy::{
    build_cloud, fixed_point, CloudMode, FixedPointKind, FixedPointResult, MetricCloud,
};
use crate::error::{Error, Result};
use crate::skeleton::{
    build_epsilon_net, cor_decomposition, net_erm, select_eta, skeleton_l2_regression, EpsilonNet,
    EtaVariant,
};

/// SplitMix64 output function.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn trial_seed(master: u64, learner_id: &str, n: usize, trial: usize) -> u64 {
    mix(mix(mix(master ^ fnv1a(learner_id)) ^ n as u64) ^ trial as u64)
}

/// Net ERM over a finite class: excess-loss cloud, covering fixed point at
/// `k = B/n`, net radius from [`select_eta`], then ERM over the net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetErmConfig {
    pub class: HypothesisClass,
    pub delta: f64,
    pub beta: f64,
    pub b: f64,
    pub variant: EtaVariant,
    pub cloud_points: usize,
    pub cloud_seed: u64,
    /// Shift used for the per-trial net decomposition check.
    pub c: f64,
}

impl NetErmConfig {
    /// Massart noise with margin `h` is (1, 1/h)-Bernstein for the excess loss.
    pub fn massart(class: HypothesisClass, h: f64, delta: f64) -> Self {
        Self {
            class,
            delta,
            beta: 1.0,
            b: 1.0 / h,
            variant: EtaVariant::Cor,
            cloud_points: 1440,
            cloud_seed: 0,
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub class: HypothesisClass,
    pub delta: f64,
    pub cloud_points: usize,
    pub cloud_seed: u64,
}

#[derive(Clone)]
pub enum Learner {
    /// Ignores the sample; with `f*` this is the zero-excess control.
    Fixed(Hypothesis),
    NetErm(NetErmConfig),
    Scheme(Arc<dyn CompressionScheme>),
    MajorityOfThree(Arc<dyn CompressionScheme>),
    SkeletonRegression(RegressionConfig),
}

impl std::fmt::Debug for Learner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.id())
    }
}

impl Learner {
    pub fn id(&self) -> String {
        match self {
            Learner::Fixed(_) => "fixed".into(),
            Learner::NetErm(_) => "net-erm".into(),
            Learner::Scheme(s) => format!("scheme-{}", s.id()),
            Learner::MajorityOfThree(s) => format!("majority3-{}", s.id()),
            Learner::SkeletonRegression(_) => "skeleton-l2".into(),
        }
    }

    fn loss(&self) -> LossKind {
        match self {
            Learner::SkeletonRegression(_) => LossKind::Square,
            _ => LossKind::Binary,
        }
    }
}

/// Per-`n` state of a net ERM learner.
#[derive(Debug, Clone)]
pub struct PreparedNet {
    pub cloud: Arc<MetricCloud>,
    pub fixed_point: FixedPointResult,
    pub net: EpsilonNet,
}

/// Builds the excess-loss cloud once and the net for every `n`.
pub fn prepare_nets(
    cfg: &NetErmConfig,
    spec: &DistributionSpec,
    n_grid: &[usize],
) -> Result<BTreeMap<usize, PreparedNet>> {
    let cloud = Arc::new(build_cloud(
        &cfg.class,
        spec,
        LossKind::Binary,
        cfg.cloud_points,
        cfg.cloud_seed,
        CloudMode::ExcessLossClass,
    )?);
    let kind = match cfg.variant {
        EtaVariant::Cor => FixedPointKind::Gamma,
        EtaVariant::Mainbound => FixedPointKind::GammaStar,
    };
    let mut out = BTreeMap::new();
    for &n in n_grid {
        let fp = fixed_point(&cloud, cfg.b / n as f64, cfg.beta, cfg.b, kind)?;
        let eta = select_eta(n, cfg.delta, cfg.beta, cfg.b, &fp, cfg.variant)?;
        let net = build_epsilon_net(&cloud, eta)?;
        log::debug!(
            "n = {n}: fixed point {:.4e}, eta {eta:.4e}, net size {}",
            fp.value,
            net.len()
        );
        out.insert(
            n,
            PreparedNet {
                cloud: Arc::clone(&cloud),
                fixed_point: fp,
                net,
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub learner_id: String,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub risk: Option<f64>,
    pub excess: Option<f64>,
    /// Compression size or net size.
    pub aux: Option<usize>,
    pub status: TrialStatus,
    /// Outcome of the net decomposition on this trial, when it applies.
    pub decomposition_holds: Option<bool>,
}

impl TrialRow {
    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub master_seed: u64,
    pub rows: Vec<TrialRow>,
}

pub const CSV_HEADER: &str = "learner_id,n,trial,seed,risk,excess,aux,status";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl RiskTable {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let status = match &r.status {
                TrialStatus::Ok => "ok".to_string(),
                TrialStatus::Failed(why) => format!("failed: {why}"),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                csv_field(&r.learner_id),
                r.n,
                r.trial,
                r.seed,
                opt(r.risk),
                opt(r.excess),
                r.aux.map(|a| a.to_string()).unwrap_or_default(),
                csv_field(&status)
            );
        }
        out
    }

    pub fn ns(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Successful risks (or excess risks) at sample size `n`.
    pub fn values(&self, n: usize, excess: bool) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.n == n && r.is_ok())
            .filter_map(|r| if excess { r.excess } else { r.risk })
            .collect()
    }

    pub fn failures(&self, n: usize) -> usize {
        self.rows.iter().filter(|r| r.n == n && !r.is_ok()).count()
    }
}

/// Risk and excess risk of a predictor under the spec. Closed forms are used
/// for single concepts when available, otherwise the fixed evaluation design.
pub fn predictor_risk(
    pred: &Predictor,
    spec: &DistributionSpec,
    loss: LossKind,
    design: &EvaluationDesign,
) -> Result<(f64, f64)> {
    let target = spec.target();
    if let Predictor::Concept(h) = pred {
        let exact = match loss {
            LossKind::Binary => {
                spec.noise.constant_margin().is_some()
                    && closed_form_disagreement(h, target, &spec.marginal).is_some()
            }
            LossKind::Square => true,
        };
        if exact {
            return Ok((
                true_risk(h, spec, loss)?.value,
                excess_risk(h, spec, loss)?.value,
            ));
        }
    }
    if loss == LossKind::Binary {
        if let Some(m) = spec.noise.constant_margin() {
            let d = disagreement_on(pred, target, design).value;
            return Ok(((1.0 - m) / 2.0 + m * d, m * d));
        }
    }
    let risk = design
        .mean(|x| conditional_loss(pred, x, &spec.noise, loss))
        .value;
    let base = design
        .mean(|x| conditional_loss(target, x, &spec.noise, loss))
        .value;
    Ok((risk, risk - base))
}

struct TrialOutcome {
    risk: f64,
    excess: f64,
    aux: Option<usize>,
    decomposition_holds: Option<bool>,
}

fn run_one(
    learner: &Learner,
    spec: &DistributionSpec,
    sample: &Sample,
    prepared: Option<&PreparedNet>,
    design: &EvaluationDesign,
) -> Result<TrialOutcome> {
    let loss = learner.loss();
    let (pred, aux, decomposition_holds) = match learner {
        Learner::Fixed(h) => (Predictor::Concept(h.clone()), None, None),
        Learner::NetErm(cfg) => {
            let p = prepared.expect("nets are prepared for every n");
            let out = net_erm(&p.net, sample, loss)?;
            let dec = cor_decomposition(&p.cloud, &p.net, sample, cfg.c)?;
            (
                Predictor::Concept(out.hypothesis),
                Some(p.net.len()),
                Some(dec.holds),
            )
        }
        Learner::Scheme(s) => {
            let compressed = s.compress(&sample.examples)?;
            let f = s.reconstruct(&compressed)?;
            if let Some(e) = sample
                .examples
                .iter()
                .find(|e| crate::domain::Predict::label(&f, &e.x) != e.label())
            {
                return Err(Error::Inconsistent(format!(
                    "reconstruction mislabels {:?}",
                    e.x
                )));
            }
            (f, Some(compressed.len()), None)
        }
        Learner::MajorityOfThree(s) => {
            (majority_of_three(s.as_ref(), sample)?.predictor, None, None)
        }
        Learner::SkeletonRegression(cfg) => {
            let out = skeleton_l2_regression(
                &cfg.class,
                spec,
                sample,
                cfg.delta,
                cfg.cloud_points,
                cfg.cloud_seed,
            )?;
            (
                Predictor::Concept(out.erm.hypothesis),
                Some(out.net_size),
                None,
            )
        }
    };
    let (risk, excess) = predictor_risk(&pred, spec, loss, design)?;
    Ok(TrialOutcome {
        risk,
        excess,
        aux,
        decomposition_holds,
    })
}

/// Runs `trials` fresh samples at every `n` and records risks.
pub fn run_trials(
    learner: &Learner,
    spec: &DistributionSpec,
    n_grid: &[usize],
    trials: usize,
    master_seed: u64,
) -> Result<RiskTable> {
    spec.validate()?;
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::config("the n grid must be nonempty and positive"));
    }
    if let Learner::SkeletonRegression(_) = learner {
        if !matches!(spec.noise, NoiseModel::BoundedRegression { .. }) {
            return Err(Error::config("skeleton regression needs a regression spec"));
        }
    } else if !spec.noise.is_classification() {
        return Err(Error::config(format!(
            "{} needs a classification spec",
            learner.id()
        )));
    }
    let prepared = match learner {
        Learner::NetErm(cfg) => prepare_nets(cfg, spec, n_grid)?,
        _ => BTreeMap::new(),
    };
    let design = EvaluationDesign::for_marginal(&spec.marginal, DEFAULT_MC_POINTS, EVAL_SEED);
    let id = learner.id();
    let jobs: Vec<(usize, usize)> = n_grid
        .iter()
        .flat_map(|&n| (0..trials).map(move |t| (n, t)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, trial)| {
            let seed = trial_seed(master_seed, &id, n, trial);
            let result = generate_sample(spec, n, seed)
                .and_then(|s| run_one(learner, spec, &s, prepared.get(&n), &design));
            match result {
                Ok(o) => TrialRow {
                    learner_id: id.clone(),
                    n,
                    trial,
                    seed,
                    risk: Some(o.risk),
                    excess: Some(o.excess),
                    aux: o.aux,
                    status: TrialStatus::Ok,
                    decomposition_holds: o.decomposition_holds,
                },
                Err(e) => TrialRow {
                    learner_id: id.clone(),
                    n,
                    trial,
                    seed,
                    risk: None,
                    excess: None,
                    aux: None,
                    status: TrialStatus::Failed(e.to_string()),
                    decomposition_holds: None,
                },
            }
        })
        .collect();
    Ok(RiskTable { master_seed, rows })
}

/// The bound formulas, each evaluated at `(n, delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bound", rename_all = "snake_case")]
pub enum BoundId {
    /// `k log(e n / k)/(n - k) + log(1/delta)/(n - k)`
    FloydWarmuth { k: usize },
    /// `E R <= k/(n + 1)`
    #[serde(rename = "k_over_n_plus_1")]
    KOverNPlus1 { k: usize },
    /// `e k log(1/delta)/n`
    DeviationKLog { k: usize },
    /// `k^2 / (n delta^{1/k})`
    Polynomial { k: usize },
    /// `k log(k)/n + log(1/delta)/n`
    MajorityVote { k: usize },
    /// `k/n + log(1/delta)/n`; the counting argument gives the constant `e`.
    Homogeneous { k: usize },
    /// `d log(d)/n + log(1/delta)/n`
    Svm { d: usize },
    /// `(B d/n + B log(1/delta)/n)^{1/(2 - beta)}`, on excess risk.
    LogConcave { d: usize, b: f64, beta: f64 },
    /// `(gamma(B/n) + B log(1/delta)/n)^{1/(2 - beta)}` with the fixed points
    /// given per `n`, on excess risk.
    NetErm {
        b: f64,
        beta: f64,
        fixed_points: Vec<(usize, f64)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Expectation,
    Deviation,
}

pub fn floyd_warmuth(k: usize, n: usize, delta: f64) -> f64 {
    let (k, n) = (k as f64, n as f64);
    (k * (E * n / k).ln() + (1.0 / delta).ln()) / (n - k)
}

pub fn polynomial_bound(k: usize, n: usize, delta: f64) -> f64 {
    let k = k as f64;
    k * k / (n as f64 * delta.powf(1.0 / k))
}

pub fn log_concave_rate(b: f64, d: usize, beta: f64, n: usize, delta: f64) -> f64 {
    let n = n as f64;
    (b * d as f64 / n + b * (1.0 / delta).ln() / n).powf(1.0 / (2.0 - beta))
}

/// Comparison curve `((1/n)^{(2-b)/(2-b+b r)} + log(1/delta)/n)^{1/(2-b)}`.
pub fn tsybakov_rate(beta: f64, r: f64, n: usize, delta: f64) -> f64 {
    let n = n as f64;
    ((1.0 / n).powf((2.0 - beta) / (2.0 - beta + beta * r)) + (1.0 / delta).ln() / n)
        .powf(1.0 / (2.0 - beta))
}

impl BoundId {
    pub fn name(&self) -> &'static str {
        match self {
            BoundId::FloydWarmuth { .. } => "floyd_warmuth",
            BoundId::KOverNPlus1 { .. } => "k_over_n_plus_1",
            BoundId::DeviationKLog { .. } => "deviation_k_log",
            BoundId::Polynomial { .. } => "polynomial",
            BoundId::MajorityVote { .. } => "majority_vote",
            BoundId::Homogeneous { .. } => "homogeneous",
            BoundId::Svm { .. } => "svm",
            BoundId::LogConcave { .. } => "log_concave",
            BoundId::NetErm { .. } => "net_erm",
        }
    }

    pub fn kind(&self) -> BoundKind {
        match self {
            BoundId::KOverNPlus1 { .. } => BoundKind::Expectation,
            _ => BoundKind::Deviation,
        }
    }

    /// Whether the bound is on the excess risk rather than the risk.
    pub fn on_excess(&self) -> bool {
        matches!(self, BoundId::LogConcave { .. } | BoundId::NetErm { .. })
    }

    /// Multiplicative constant fixed by the formula itself; `None` when the
    /// bound only holds up to an unspecified constant and one is fitted.
    pub fn stated_constant(&self) -> Option<f64> {
        match self {
            BoundId::FloydWarmuth { .. }
            | BoundId::KOverNPlus1 { .. }
            | BoundId::DeviationKLog { .. }
            | BoundId::Polynomial { .. } => Some(1.0),
            BoundId::Homogeneous { .. } => Some(E),
            _ => None,
        }
    }

    pub fn value(&self, n: usize, delta: f64) -> Result<f64> {
        let nf = n as f64;
        let log_inv = (1.0 / delta).ln();
        let v = match self {
            BoundId::FloydWarmuth { k } => {
                if n <= *k {
                    return Err(Error::config(format!(
                        "Floyd-Warmuth needs n > k, got n = {n}, k = {k}"
                    )));
                }
                floyd_warmuth(*k, n, delta)
            }
            BoundId::KOverNPlus1 { k } => *k as f64 / (nf + 1.0),
            BoundId::DeviationKLog { k } => E * *k as f64 * log_inv / nf,
            BoundId::Polynomial { k } => polynomial_bound(*k, n, delta),
            BoundId::MajorityVote { k } => (*k as f64 * (*k as f64).ln() + log_inv) / nf,
            BoundId::Homogeneous { k } => (*k as f64 + log_inv) / nf,
            BoundId::Svm { d } => (*d as f64 * (*d as f64).ln() + log_inv) / nf,
            BoundId::LogConcave { d, b, beta } => log_concave_rate(*b, *d, *beta, n, delta),
            BoundId::NetErm {
                b,
                beta,
                fixed_points,
            } => {
                let fp = fixed_points
                    .iter()
                    .find(|(m, _)| *m == n)
                    .ok_or_else(|| Error::config(format!("no fixed point given for n = {n}")))?
                    .1;
                (fp + b * log_inv / nf).powf(1.0 / (2.0 - beta))
            }
        };
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: usize,
    pub trials: usize,
    pub failed: usize,
    pub mean: f64,
    pub std_error: f64,
    /// Empirical `(1 - delta)` quantile.
    pub quantile: f64,
    /// The formula without constant.
    pub bound: f64,
    /// `constant * bound`, the value the statistic is compared against.
    pub scaled_bound: f64,
    pub violation_fraction: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_id: BoundId,
    pub kind: BoundKind,
    pub delta: f64,
    pub rows: Vec<BoundRow>,
    /// Least-squares constant of the statistic against the formula over the grid.
    pub fitted_constant: f64,
    /// Constant the rows are checked with: the stated one, else the ratio at
    /// the smallest `n`.
    pub constant_used: f64,
    pub constant_stated: bool,
    pub holds: bool,
}

/// Smallest value with empirical CDF at least `q`.
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

/// Slack allowed on a violation fraction at `trials` trials.
pub fn violation_allowance(delta: f64, trials: usize) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt()
}

/// Smallest positive constant reported when every statistic is zero.
const CONSTANT_FLOOR: f64 = 1e-12;

/// Compares a risk table against one bound.
///
/// Expectation bounds compare `mean + 3 SE`. Deviation bounds compare the
/// empirical `(1 - delta)` quantile and the fraction of trials above the
/// scaled bound. Bounds without a stated constant get the constant that
/// makes the smallest `n` tight, and are checked for extrapolation at the
/// larger `n` through the violation fraction.
pub fn verify_bound(table: &RiskTable, bound: &BoundId, delta: f64) -> Result<BoundReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let ns = table.ns();
    if ns.is_empty() {
        return Err(Error::config("empty risk table"));
    }
    let kind = bound.kind();
    let mut stats = Vec::new();
    for &n in &ns {
        let values = table.values(n, bound.on_excess());
        if values.is_empty() {
            return Err(Error::Precision(format!("no successful trials at n = {n}")));
        }
        if kind == BoundKind::Deviation && (values.len() as f64) * delta < 20.0 {
            return Err(Error::Precision(format!(
                "{} trials at n = {n} cannot resolve the {} quantile (need trials * delta >= 20)",
                values.len(),
                1.0 - delta
            )));
        }
        let (mean, se) = mean_and_se(&values);
        let q = empirical_quantile(&values, 1.0 - delta);
        stats.push((n, values, mean, se, q, bound.value(n, delta)?));
    }
    let statistic = |s: &(usize, Vec<f64>, f64, f64, f64, f64)| match kind {
        BoundKind::Expectation => s.2 + 3.0 * s.3,
        BoundKind::Deviation => s.4,
    };
    let (num, den) = stats.iter().fold((0.0, 0.0), |(a, b), s| {
        (a + statistic(s) * s.5, b + s.5 * s.5)
    });
    let fitted_constant = (num / den).max(CONSTANT_FLOOR);
    let (constant_used, constant_stated) = match bound.stated_constant() {
        Some(c) => (c, true),
        None => (
            (statistic(&stats[0]) / stats[0].5).max(CONSTANT_FLOOR),
            false,
        ),
    };
    let rows: Vec<BoundRow> = stats
        .iter()
        .map(|s| {
            let scaled = constant_used * s.5;
            let violation = s.1.iter().filter(|&&v| v > scaled).count() as f64 / s.1.len() as f64;
            let holds = match (kind, constant_stated) {
                (BoundKind::Expectation, _) => statistic(s) <= scaled,
                (BoundKind::Deviation, true) => s.4 <= scaled,
                (BoundKind::Deviation, false) => violation <= violation_allowance(delta, s.1.len()),
            };
            BoundRow {
                n: s.0,
                trials: s.1.len(),
                failed: table.failures(s.0),
                mean: s.2,
                std_error: s.3,
                quantile: s.4,
                bound: s.5,
                scaled_bound: scaled,
                violation_fraction: violation,
                holds,
            }
        })
        .collect();
    Ok(BoundReport {
        bound_id: bound.clone(),
        kind,
        delta,
        holds: rows.iter().all(|r| r.holds),
        rows,
        fitted_constant,
        constant_used,
        constant_stated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "statistic", content = "q", rename_all = "kebab-case")]
pub enum Statistic {
    Mean,
    Quantile(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    /// `(n, statistic)` pairs used in the fit.
    pub points: Vec<(usize, f64)>,
    pub warning: Option<String>,
}

/// Least-squares fit of `log(value)` against `log(n)`.
pub fn fit_loglog(points: &[(usize, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::config(format!(
            "a rate fit needs at least 4 grid points, got {}",
            points.len()
        )));
    }
    let lo = points.iter().map(|p| p.0).min().unwrap_or(0) as f64;
    let hi = points.iter().map(|p| p.0).max().unwrap_or(0) as f64;
    if hi < 8.0 * lo {
        return Err(Error::config(format!(
            "the n grid must span a factor of at least 8, got {lo}..{hi}"
        )));
    }
    let mut used: Vec<(usize, f64)> = Vec::new();
    let mut warning = None;
    for &(n, v) in points {
        if v > 0.0 {
            used.push((n, v));
        } else {
            warning = Some(format!(
                "zero statistic at n = {n}; fitted on the nonzero prefix"
            ));
            log::warn!("zero statistic at n = {n}; fitting the nonzero prefix");
            break;
        }
    }
    if used.len() < 2 {
        return Err(Error::config("fewer than two nonzero grid points"));
    }
    let xs: Vec<f64> = used.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_std_error = if m > 2.0 {
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(RateFit {
        slope,
        intercept,
        slope_std_error,
        points: used,
        warning,
    })
}

/// Rate of the excess-risk statistic across the table's `n` grid.
pub fn rate_fit(table: &RiskTable, statistic: Statistic) -> Result<RateFit> {
    let points: Vec<(usize, f64)> = table
        .ns()
        .into_iter()
        .map(|n| {
            let v = table.values(n, true);
            let s = match statistic {
                Statistic::Mean => mean_and_se(&v).0,
                Statistic::Quantile(q) => empirical_quantile(&v, q),
            };
            (n, s)
        })
        .collect();
    fit_loglog(&points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingMember {
    pub normal: Vec<f64>,
    pub mean_excess: f64,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialReport {
    pub d: usize,
    pub h: f64,
    pub n: usize,
    pub b: f64,
    pub delta: f64,
    pub eps: f64,
    pub trials: usize,
    pub members: Vec<PackingMember>,
    pub min_pairwise_distance: f64,
    pub worst_mean_excess: f64,
    pub worst_member: usize,
    /// `d (1 - h)/(n h)` with unit constant.
    pub lower_reference: f64,
    /// `(B d/n + B log(1/delta)/n)^{1/(2 - beta)}` at `beta = 1`, `B = 1/h`.
    pub upper_value: f64,
    /// `worst_mean_excess / upper_value`.
    pub fitted_constant: f64,
}

/// Maximal `eps`-packing of the halfspace directions in `P(f != g)`
/// distance (`angle / pi` under a rotationally symmetric marginal), greedy in
/// enumeration order, thinned to `size` evenly spaced members.
pub fn halfspace_packing(class: &HypothesisClass, eps: f64, size: usize) -> Result<Vec<Vec<f64>>> {
    let normals: Vec<Vec<f64>> = class
        .enumerate()?
        .into_iter()
        .filter_map(|h| match h {
            Hypothesis::Halfspace {
                normal,
                offset: 0.0,
            } => Some(normal),
            _ => None,
        })
        .collect();
    let dist = |a: &[f64], b: &[f64]| angle_between(a, b) / std::f64::consts::PI;
    let mut packing: Vec<Vec<f64>> = Vec::new();
    for v in normals {
        if packing.iter().all(|p| {
            let d = dist(p, &v);
            d >= eps && d > 0.0
        }) {
            packing.push(v);
        }
    }
    if packing.is_empty() || size == 0 {
        return Err(Error::config(format!("empty packing at eps = {eps}")));
    }
    let m = packing.len();
    let take = size.min(m);
    Ok((0..take).map(|i| packing[i * m / take].clone()).collect())
}

/// Runs a learner on every member of a Massart packing of homogeneous
/// halfspaces under the uniform ball and reports the worst mean excess risk
/// next to the lower and upper reference values.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_family_eval(
    learner: &Learner,
    d: usize,
    h: f64,
    n: usize,
    packing_size: usize,
    trials: usize,
    delta: f64,
    master_seed: u64,
) -> Result<AdversarialReport> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::config(format!(
            "margin h must lie in (0, 1], got {h}"
        )));
    }
    let b = 1.0 / h;
    if b > (n as f64 / d as f64).sqrt() {
        return Err(Error::config(format!(
            "B = 1/h = {b} exceeds sqrt(n/d) = {:.4}; the lower-bound construction does not apply",
            (n as f64 / d as f64).sqrt()
        )));
    }
    let eps = (d as f64 * (1.0 - h) / (n as f64 * h * h)).clamp(0.0, 1.0);
    let class = match learner {
        Learner::NetErm(cfg) => cfg.class.clone(),
        _ => HypothesisClass::HomogeneousHalfspaces {
            dim: d,
            resolution: 720,
        },
    };
    let packing = halfspace_packing(&class, eps, packing_size)?;
    let mut min_pairwise_distance = f64::INFINITY;
    for (i, a) in packing.iter().enumerate() {
        for c in &packing[i + 1..] {
            min_pairwise_distance =
                min_pairwise_distance.min(angle_between(a, c) / std::f64::consts::PI);
        }
    }
    let mut members = Vec::new();
    for (i, normal) in packing.iter().enumerate() {
        let spec = DistributionSpec::massart(
            Marginal::UniformBall { dim: d },
            Hypothesis::halfspace(normal.clone(), 0.0),
            h,
        )?;
        let table = run_trials(learner, &spec, &[n], trials, mix(master_seed ^ i as u64))?;
        let values = table.values(n, true);
        members.push(PackingMember {
            normal: normal.clone(),
            mean_excess: mean_and_se(&values).0,
            failed: table.failures(n),
        });
    }
    let (worst_member, worst) =
        members
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, m)| {
                if m.mean_excess > acc.1 {
                    (i, m.mean_excess)
                } else {
                    acc
                }
            });
    let upper_value = log_concave_rate(b, d, 1.0, n, delta);
    Ok(AdversarialReport {
        d,
        h,
        n,
        b,
        delta,
        eps,
        trials,
        members,
        min_pairwise_distance,
        worst_mean_excess: worst,
        worst_member,
        lower_reference: d as f64 * (1.0 - h) / (n as f64 * h),
        upper_value,
        fitted_constant: worst / upper_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::{IntervalScheme, RectangleScheme};
    use crate::svm::SvmScheme;

    fn interval_spec() -> DistributionSpec {
        DistributionSpec::realizable(
            Marginal::UniformBall { dim: 1 },
            Hypothesis::Interval { lo: -0.3, hi: 0.4 },
        )
        .unwrap()
    }

    #[test]
    fn formula_values() {
        assert!((floyd_warmuth(5, 105, 0.05) - 0.2322).abs() < 5e-4);
        let want = 5.0 * (std::f64::consts::E * 21.0).ln() / 100.0 + 20f64.ln() / 100.0;
        assert!((floyd_warmuth(5, 105, 0.05) - want).abs() < 1e-15);
        assert!((polynomial_bound(3, 300, 0.1) - 0.0646).abs() < 5e-4);
        assert!((BoundId::KOverNPlus1 { k: 3 }.value(99, 0.05).unwrap() - 0.03).abs() < 1e-15);
        let dev = BoundId::DeviationKLog { k: 2 }.value(200, 0.05).unwrap();
        assert!((dev - 0.0814).abs() < 1e-4);
        assert!(BoundId::FloydWarmuth { k: 5 }.value(5, 0.05).is_err());
        // beta = 1 reduces to B (d + log(1/delta))/n
        assert!(
            (log_concave_rate(4.0, 2, 1.0, 400, 0.05) - 4.0 * (2.0 + 20f64.ln()) / 400.0).abs()
                < 1e-15
        );
        assert!((tsybakov_rate(1.0, 0.0, 100, 0.5) - (0.01 + 2f64.ln() / 100.0)).abs() < 1e-15);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for id in ["net-erm", "scheme-svm"] {
            for n in [100, 200, 400] {
                for t in 0..500 {
                    assert!(seen.insert(trial_seed(7, id, n, t)));
                }
            }
        }
        assert_eq!(trial_seed(7, "a", 1, 2), trial_seed(7, "a", 1, 2));
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
    }

    #[test]
    fn fixed_target_has_zero_excess() {
        let spec = DistributionSpec::massart(
            Marginal::UniformBall { dim: 2 },
            Hypothesis::planar(0.3),
            0.5,
        )
        .unwrap();
        let t = run_trials(
            &Learner::Fixed(Hypothesis::planar(0.3)),
            &spec,
            &[10, 20],
            20,
            1,
        )
        .unwrap();
        assert!(t
            .rows
            .iter()
            .all(|r| r.excess == Some(0.0) && r.risk == Some(0.25)));
    }

    #[test]
    fn tables_are_deterministic() {
        let learner = Learner::Scheme(Arc::new(IntervalScheme));
        let a = run_trials(&learner, &interval_spec(), &[20, 40], 50, 3).unwrap();
        let b = run_trials(&learner, &interval_spec(), &[20, 40], 50, 3).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_csv().starts_with(CSV_HEADER));
        let c = run_trials(&learner, &interval_spec(), &[20, 40], 50, 4).unwrap();
        assert_ne!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn interval_deviation_quantile() {
        let t = run_trials(
            &Learner::Scheme(Arc::new(IntervalScheme)),
            &interval_spec(),
            &[200],
            1000,
            11,
        )
        .unwrap();
        let r = verify_bound(&t, &BoundId::DeviationKLog { k: 2 }, 0.05).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.rows[0].quantile <= r.rows[0].bound);
        assert!(matches!(
            verify_bound(&t, &BoundId::DeviationKLog { k: 2 }, 0.01),
            Err(Error::Precision(_))
        ));
    }

    #[test]
    fn failed_trials_are_recorded() {
        let spec = DistributionSpec::massart(
            Marginal::UniformBall { dim: 2 },
            Hypothesis::planar(0.0),
            0.2,
        )
        .unwrap();
        let t = run_trials(
            &Learner::Scheme(Arc::new(SvmScheme { dim: 2 })),
            &spec,
            &[200],
            10,
            0,
        )
        .unwrap();
        assert_eq!(t.failures(200), 10);
        assert!(t.to_csv().contains("failed: "));
    }

    #[test]
    fn rate_fit_on_exact_curves() {
        let grid = [100, 200, 400, 800];
        let f = fit_loglog(&grid.map(|n| (n, 3.0 / n as f64))).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12 && (f.intercept - 3f64.ln()).abs() < 1e-9);
        let g = fit_loglog(&grid.map(|n| (n, 1.0 / (n as f64).sqrt()))).unwrap();
        assert!((g.slope + 0.5).abs() < 1e-12);
        assert!(fit_loglog(&[(100, 1.0), (200, 0.5), (400, 0.25)]).is_err());
        assert!(fit_loglog(&[(100, 1.0), (200, 0.5), (300, 0.3), (400, 0.25)]).is_err());
        let z = fit_loglog(&[(100, 0.1), (200, 0.05), (400, 0.025), (800, 0.0)]).unwrap();
        assert!(z.warning.is_some() && z.points.len() == 3);
    }

    #[test]
    fn rectangle_scheme_expectation() {
        let spec = DistributionSpec::realizable(
            Marginal::UniformBall { dim: 2 },
            Hypothesis::Rectangle {
                lo: vec![-0.5, -0.4],
                hi: vec![0.3, 0.5],
            },
        )
        .unwrap();
        let t = run_trials(
            &Learner::Scheme(Arc::new(RectangleScheme { dim: 2 })),
            &spec,
            &[50],
            1500,
            5,
        )
        .unwrap();
        let r = verify_bound(&t, &BoundId::KOverNPlus1 { k: 4 }, 0.05).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn packing_distances() {
        let class = HypothesisClass::HomogeneousHalfspaces {
            dim: 2,
            resolution: 720,
        };
        let p = halfspace_packing(&class, 0.06, 8).unwrap();
        assert_eq!(p.len(), 8);
        for (i, a) in p.iter().enumerate() {
            for b in &p[i + 1..] {
                assert!(angle_between(a, b) / std::f64::consts::PI >= 0.06 - 1e-12);
            }
        }
        let cfg = NetErmConfig::massart(class, 1.0, 0.05);
        let r = adversarial_family_eval(&Learner::NetErm(cfg), 2, 1.0, 100, 2, 5, 0.05, 0).unwrap();
        assert_eq!(r.lower_reference, 0.0);
        assert!(r.worst_mean_excess >= 0.0);
        let cfg = NetErmConfig::massart(
            HypothesisClass::HomogeneousHalfspaces {
                dim: 2,
                resolution: 720,
            },
            0.1,
            0.05,
        );
        assert!(adversarial_family_eval(&Learner::NetErm(cfg), 2, 0.1, 50, 2, 5, 0.05, 0).is_err());
    }

    #[test]
    fn net_erm_trials_check_the_decomposition() {
        let class = HypothesisClass::HomogeneousHalfspaces {
            dim: 2,
            resolution: 720,
        };
        let spec = DistributionSpec::massart(
            Marginal::UniformBall { dim: 2 },
            Hypothesis::planar(0.0),
            0.5,
        )
        .unwrap();
        let t = run_trials(
            &Learner::NetErm(NetErmConfig::massart(class, 0.5, 0.05)),
            &spec,
            &[100, 400],
            40,
            2,
        )
        .unwrap();
        assert!(t
            .rows
            .iter()
            .all(|r| r.is_ok() && r.decomposition_holds == Some(true)));
        assert!(t
            .rows
            .iter()
            .all(|r| r.excess.unwrap() >= 0.0 && r.excess.unwrap() <= 0.5));
    }
}
