//! ERM over epsilon-nets ("skeleton" estimates) and the shifted empirical
//! processes that control them.
//!
//! A net is a greedy proper cover of a loss-class cloud; learning is empirical
//! risk minimization restricted to the net. The pathwise decompositions at the
//! bottom of the module are the algebraic steps that turn bounds on shifted
//! suprema into excess-risk bounds, checked on concrete samples.

use serde::{Deserialize, Serialize};

use crate::domain::{
    DistributionSpec, EvaluationDesign, Hypothesis, HypothesisClass, LossKind, NoiseModel, Predict,
    Sample, DEFAULT_MC_POINTS, EVAL_SEED,
};
use crate::entropy::{
    build_cloud, cover_centers, fixed_point, is_proper_cover, CloudMode, FixedPointKind,
    FixedPointResult, MetricCloud, Norm, Solver,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonNet {
    /// Indices into the source class, ascending.
    pub member_indices: Vec<usize>,
    pub members: Vec<Hypothesis>,
    pub eta: f64,
    pub norm: Norm,
}

impl EpsilonNet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn source_hypotheses(cloud: &MetricCloud) -> Result<&[Hypothesis]> {
    cloud
        .source()
        .map(|s| s.hypotheses.as_slice())
        .ok_or_else(|| Error::config("cloud was not built from a hypothesis class"))
}

/// Greedy proper `eta`-cover of the cloud, rechecked exactly.
pub fn build_epsilon_net(cloud: &MetricCloud, eta: f64) -> Result<EpsilonNet> {
    let hypotheses = source_hypotheses(cloud)?;
    let mut centers = cover_centers(cloud, eta, Solver::Greedy)?;
    centers.sort_unstable();
    assert!(
        is_proper_cover(cloud, &centers, eta),
        "greedy net failed its coverage recheck"
    );
    Ok(EpsilonNet {
        members: centers.iter().map(|&i| hypotheses[i].clone()).collect(),
        member_indices: centers,
        eta,
        norm: cloud.norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaVariant {
    /// `eta = (gamma + B log(1/delta)/n)^{1/(2-beta)}`
    Cor,
    /// `eta = B (gamma* + B log(1/delta)/n)^{beta/(2-beta)}`
    Mainbound,
}

/// Net radius for sample size `n`, all proportionality constants set to 1.
pub fn select_eta(
    n: usize,
    delta: f64,
    beta: f64,
    b: f64,
    fp: &FixedPointResult,
    variant: EtaVariant,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if n == 0 {
        return Err(Error::config("sample size must be positive"));
    }
    let inner = fp.value + b * (1.0 / delta).ln() / n as f64;
    Ok(match variant {
        EtaVariant::Cor => inner.powf(1.0 / (2.0 - beta)),
        EtaVariant::Mainbound => b * inner.powf(beta / (2.0 - beta)),
    })
}

pub fn empirical_risk<P: Predict + ?Sized>(h: &P, sample: &Sample, loss: LossKind) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    sample
        .examples
        .iter()
        .map(|e| loss.eval(h.predict(&e.x), e.y))
        .sum::<f64>()
        / sample.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetErmOutput {
    /// Index into the net.
    pub chosen_index: usize,
    /// Index into the source class.
    pub class_index: usize,
    pub hypothesis: Hypothesis,
    pub empirical_risk: f64,
    pub eta_used: f64,
    pub tie_count: usize,
}

/// Empirical risk minimizer over the net; ties go to the lowest net index.
pub fn net_erm(net: &EpsilonNet, sample: &Sample, loss: LossKind) -> Result<NetErmOutput> {
    if net.is_empty() {
        return Err(Error::config("net ERM over an empty net"));
    }
    let risks: Vec<f64> = net
        .members
        .iter()
        .map(|h| empirical_risk(h, sample, loss))
        .collect();
    let best = risks.iter().copied().fold(f64::INFINITY, f64::min);
    let chosen = risks.iter().position(|&r| r == best).expect("nonempty");
    Ok(NetErmOutput {
        chosen_index: chosen,
        class_index: net.member_indices[chosen],
        hypothesis: net.members[chosen].clone(),
        empirical_risk: best,
        eta_used: net.eta,
        tie_count: risks.iter().filter(|&&r| r == best).count(),
    })
}

const C_GRID: [f64; 3] = [1.0, 0.5, 0.25];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    /// Class index of the net member.
    pub member: usize,
    pub tail_mass: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongerCondReport {
    pub eta: f64,
    pub beta: f64,
    pub b: f64,
    /// Nonzero net members with `P|g| <= eta` (class indices).
    pub candidates: Vec<usize>,
    /// Nonzero net members with `P|g|` in `[eta/2, 2 eta]`.
    pub eligible: Vec<usize>,
    /// `(c, some candidate has P|g| >= c B (Pg)^beta)`.
    pub candidate_holds: Vec<(f64, bool)>,
    /// Same over the eligible band.
    pub eligible_holds: Vec<(f64, bool)>,
    /// True when no candidate exists and the condition is vacuous.
    pub vacuous: bool,
    /// `t0 = B^{-1/beta} eta^{(1-beta)/beta}`, for classification and `0 < beta < 1`.
    pub t0: Option<f64>,
    /// `B^{1/(1-beta)} t0^{1/(1-beta)}`.
    pub tail_bound: Option<f64>,
    /// Tail mass `P(|xi(X)| 1[f_eta != f*] >= t0)` per eligible member.
    pub tails: Vec<TailCheck>,
}

const ZERO_ABS_MEAN: f64 = 1e-12;

/// Looks for net members satisfying `P|g| >= c B (Pg)^beta` with
/// `P|g| <= eta`, and evaluates the margin-tail sufficient condition for the
/// members whose disagreement with `f*` is of order `eta`.
pub fn check_strongercond(
    net: &EpsilonNet,
    cloud: &MetricCloud,
    eta: f64,
    beta: f64,
    b: f64,
) -> Result<StrongerCondReport> {
    let source = cloud
        .source()
        .ok_or_else(|| Error::config("cloud was not built from a hypothesis class"))?;
    if source.mode != CloudMode::ExcessLossClass {
        return Err(Error::config(
            "the stronger condition is checked on an excess-loss cloud",
        ));
    }
    let moments = source.moments()?;
    let nonzero: Vec<usize> = net
        .member_indices
        .iter()
        .copied()
        .filter(|&i| moments[i].abs_mean > ZERO_ABS_MEAN)
        .collect();
    let candidates: Vec<usize> = nonzero
        .iter()
        .copied()
        .filter(|&i| moments[i].abs_mean <= eta + 1e-12)
        .collect();
    let eligible: Vec<usize> = nonzero
        .iter()
        .copied()
        .filter(|&i| (eta / 2.0 - 1e-12..=2.0 * eta + 1e-12).contains(&moments[i].abs_mean))
        .collect();
    let satisfies = |i: usize, c: f64| {
        let m = &moments[i];
        m.abs_mean >= c * b * m.mean.max(0.0).powf(beta) - 1e-12
    };
    let holds_over = |set: &[usize]| {
        C_GRID
            .iter()
            .map(|&c| (c, set.iter().any(|&i| satisfies(i, c))))
            .collect::<Vec<_>>()
    };

    let (t0, tail_bound, tails) =
        if source.spec.noise.is_classification() && beta > 0.0 && beta < 1.0 {
            let t0 = b.powf(-1.0 / beta) * eta.powf((1.0 - beta) / beta);
            let bound = (b * t0).powf(1.0 / (1.0 - beta));
            let design =
                EvaluationDesign::for_marginal(&source.spec.marginal, DEFAULT_MC_POINTS, EVAL_SEED);
            let target = source.spec.target();
            let tails = eligible
                .iter()
                .map(|&i| {
                    let h = &source.hypotheses[i];
                    let mass: f64 = design
                        .points
                        .iter()
                        .zip(&design.weights)
                        .filter(|(x, _)| {
                            h.label(x) != target.label(x) && source.spec.noise.margin_at(x) >= t0
                        })
                        .map(|(_, w)| w)
                        .sum();
                    TailCheck {
                        member: i,
                        tail_mass: mass,
                        holds: mass <= bound + 1e-12,
                    }
                })
                .collect();
            (Some(t0), Some(bound), tails)
        } else {
            (None, None, Vec::new())
        };

    Ok(StrongerCondReport {
        eta,
        beta,
        b,
        candidate_holds: holds_over(&candidates),
        eligible_holds: holds_over(&eligible),
        vacuous: candidates.is_empty(),
        candidates,
        eligible,
        t0,
        tail_bound,
        tails,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionOutput {
    pub erm: NetErmOutput,
    pub zeta: FixedPointResult,
    pub eta: f64,
    pub net_size: usize,
}

/// Square-loss skeleton estimate: an L2(P) net of the class itself at radius
/// `eta = zeta(F, 1/n) + sqrt(log(1/delta)/n)`, then net ERM.
pub fn skeleton_l2_regression(
    class: &HypothesisClass,
    spec: &DistributionSpec,
    sample: &Sample,
    delta: f64,
    m: usize,
    seed: u64,
) -> Result<RegressionOutput> {
    if !matches!(spec.noise, NoiseModel::BoundedRegression { .. }) {
        return Err(Error::config(
            "skeleton regression needs bounded zero-mean regression noise",
        ));
    }
    if let Some(e) = sample.examples.iter().find(|e| e.y.abs() > 1.0 + 1e-12) {
        return Err(Error::config(format!(
            "unbounded labels: sample label {} lies outside [-1, 1]",
            e.y
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if sample.is_empty() {
        return Err(Error::config("skeleton regression needs a nonempty sample"));
    }
    let cloud = build_cloud(class, spec, LossKind::Square, m, seed, CloudMode::RawClass)?;
    let n = sample.len() as f64;
    let zeta = fixed_point(&cloud, 1.0 / n, 1.0, 1.0, FixedPointKind::Zeta)?;
    let eta = zeta.value + ((1.0 / delta).ln() / n).sqrt();
    let net = build_epsilon_net(&cloud, eta)?;
    let erm = net_erm(&net, sample, LossKind::Square)?;
    Ok(RegressionOutput {
        erm,
        zeta,
        eta,
        net_size: net.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `sup (Pg - (1 + c) P_n g)`
    Forward,
    /// `sup (P_n g - (1 + 2c)/(1 + c) Pg)`
    Reverse,
}

/// `(Pg, P_n g)` for the cloud members `members`, with `g` the loss or excess
/// loss of each member. `Pg` is exact.
pub fn member_means(
    cloud: &MetricCloud,
    members: &[usize],
    sample: &Sample,
) -> Result<Vec<(f64, f64)>> {
    let source = cloud
        .source()
        .ok_or_else(|| Error::config("cloud was not built from a hypothesis class"))?;
    let moments = source.moments()?;
    let target = source.spec.target();
    let loss = source.loss;
    let baseline: Vec<f64> = match source.mode {
        CloudMode::LossClass => vec![0.0; sample.len()],
        CloudMode::ExcessLossClass => sample
            .examples
            .iter()
            .map(|e| loss.eval(target.predict(&e.x), e.y))
            .collect(),
        CloudMode::RawClass => {
            return Err(Error::config(
                "shifted processes need a loss or excess-loss cloud",
            ))
        }
    };
    let n = sample.len().max(1) as f64;
    Ok(members
        .iter()
        .map(|&i| {
            let h = &source.hypotheses[i];
            let pn = sample
                .examples
                .iter()
                .zip(&baseline)
                .map(|(e, base)| loss.eval(h.predict(&e.x), e.y) - base)
                .sum::<f64>()
                / n;
            (moments[i].mean, pn)
        })
        .collect())
}

fn shifted(means: &[(f64, f64)], c: f64, direction: Direction) -> f64 {
    means
        .iter()
        .map(|&(p, pn)| match direction {
            Direction::Forward => p - (1.0 + c) * pn,
            Direction::Reverse => pn - (1.0 + 2.0 * c) / (1.0 + c) * p,
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exact supremum of the shifted process over every cloud member.
pub fn shifted_process_sup(
    cloud: &MetricCloud,
    sample: &Sample,
    c: f64,
    direction: Direction,
) -> Result<f64> {
    let all: Vec<usize> = (0..cloud.len()).collect();
    shifted_process_sup_on(cloud, &all, sample, c, direction)
}

/// As [`shifted_process_sup`], restricted to `members`.
pub fn shifted_process_sup_on(
    cloud: &MetricCloud,
    members: &[usize],
    sample: &Sample,
    c: f64,
    direction: Direction,
) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::config(format!(
            "shift c must be nonnegative, got {c}"
        )));
    }
    Ok(shifted(
        &member_means(cloud, members, sample)?,
        c,
        direction,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorDecomposition {
    /// Excess risk of the net ERM output.
    pub excess: f64,
    pub forward_sup: f64,
    /// `(1 + c)(R_n(f*_eta) - R_n(f*))`, `f*_eta` the best net member in true risk.
    pub remainder: f64,
    pub holds: bool,
}

/// `excess(f_hat) <= sup_net (Pg - (1+c) P_n g) + (1+c)(R_n(f*_eta) - R_n(f*))`
/// on one sample, over an excess-loss cloud.
pub fn cor_decomposition(
    cloud: &MetricCloud,
    net: &EpsilonNet,
    sample: &Sample,
    c: f64,
) -> Result<CorDecomposition> {
    if cloud.source().map(|s| s.mode) != Some(CloudMode::ExcessLossClass) {
        return Err(Error::config(
            "the net decomposition is evaluated on an excess-loss cloud",
        ));
    }
    let means = member_means(cloud, &net.member_indices, sample)?;
    // ERM on the excess family is ERM on the loss: the baseline is shared.
    let best_pn = means.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let chosen = means
        .iter()
        .position(|m| m.1 == best_pn)
        .expect("nonempty net");
    let best_p = means.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
    let star = means
        .iter()
        .position(|m| m.0 == best_p)
        .expect("nonempty net");
    let excess = means[chosen].0;
    let forward_sup = shifted(&means, c, Direction::Forward);
    let remainder = (1.0 + c) * means[star].1;
    Ok(CorDecomposition {
        excess,
        forward_sup,
        remainder,
        holds: excess <= forward_sup + remainder + 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationDecomposition {
    pub c: f64,
    pub risk_erm: f64,
    pub risk_best: f64,
    pub forward_sup: f64,
    pub reverse_sup: f64,
    /// `R(f_hat) - (1 + 2c) R(f*)`
    pub lhs: f64,
    /// `forward_sup + (1 + c) reverse_sup`
    pub rhs: f64,
    pub holds: bool,
}

/// `R(f_hat) - (1+2c) R(f*) <= sup(Pg - (1+c)P_n g) + (1+c) sup(P_n g - (1+2c)/(1+c) Pg)`
/// for the full-class ERM over a loss cloud. At `c = 1/2` the left side is
/// `R(f_hat) - 2 R(f*)`.
pub fn aggregation_decomposition(
    cloud: &MetricCloud,
    sample: &Sample,
    c: f64,
) -> Result<AggregationDecomposition> {
    if cloud.source().map(|s| s.mode) != Some(CloudMode::LossClass) {
        return Err(Error::config(
            "the aggregation decomposition is evaluated on a loss cloud",
        ));
    }
    if !(c >= 0.0) {
        return Err(Error::config(format!(
            "shift c must be nonnegative, got {c}"
        )));
    }
    let all: Vec<usize> = (0..cloud.len()).collect();
    let means = member_means(cloud, &all, sample)?;
    let best_pn = means.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let erm = means
        .iter()
        .position(|m| m.1 == best_pn)
        .expect("nonempty cloud");
    let risk_best = means.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
    let forward_sup = shifted(&means, c, Direction::Forward);
    let reverse_sup = shifted(&means, c, Direction::Reverse);
    let lhs = means[erm].0 - (1.0 + 2.0 * c) * risk_best;
    let rhs = forward_sup + (1.0 + c) * reverse_sup;
    Ok(AggregationDecomposition {
        c,
        risk_erm: means[erm].0,
        risk_best,
        forward_sup,
        reverse_sup,
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}
