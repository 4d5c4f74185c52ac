use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::cloud::{MetricCloud, DIST_SLACK};
use super::local::{local_entropy, max_local_count};
use super::setcover::{exact_cover, greedy_cover, BitSet};
use super::{Solver, EXACT_CAP};
use crate::error::{Error, Result};

/// `[lower, upper]` pointwise, with the cloud members it contains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub members: Vec<usize>,
}

impl Bracket {
    pub fn width(&self, cloud: &MetricCloud) -> f64 {
        cloud.norm_of_difference(&self.upper, &self.lower)
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        inside(&self.lower, &self.upper, v)
    }
}

fn inside(lower: &[f64], upper: &[f64], v: &[f64]) -> bool {
    v.iter()
        .zip(lower.iter().zip(upper))
        .all(|(x, (l, u))| *l - DIST_SLACK <= *x && *x <= *u + DIST_SLACK)
}

fn envelope(cloud: &MetricCloud, set: impl IntoIterator<Item = usize>) -> (Vec<f64>, Vec<f64>) {
    let mut it = set.into_iter();
    let first = it.next().expect("nonempty generator set");
    let mut lower = cloud.vector(first).to_vec();
    let mut upper = lower.clone();
    for i in it {
        for (k, &x) in cloud.vector(i).iter().enumerate() {
            lower[k] = lower[k].min(x);
            upper[k] = upper[k].max(x);
        }
    }
    (lower, upper)
}

/// Minimal number of `eps`-brackets covering the cloud, each bracket the
/// pointwise envelope of a subset of cloud vectors.
pub fn bracketing_number(cloud: &MetricCloud, eps: f64, solver: Solver) -> Result<usize> {
    let all: Vec<usize> = (0..cloud.len()).collect();
    Ok(bracket_cover(cloud, &all, eps, solver)?.len())
}

/// Brackets of width at most `eps` covering `members`, generated by subsets
/// of `members`.
///
/// The exact solver enumerates every envelope-closed subset of width at most
/// `eps` (a subset is closed when it holds every member inside its envelope)
/// and solves the set cover exactly. The greedy solver grows one bracket per
/// seed by nearest-first insertion and covers greedily.
pub fn bracket_cover(
    cloud: &MetricCloud,
    members: &[usize],
    eps: f64,
    solver: Solver,
) -> Result<Vec<Bracket>> {
    if !(eps > 0.0) {
        return Err(Error::config(format!(
            "bracket width must be positive, got {eps}"
        )));
    }
    if members.is_empty() {
        return Ok(Vec::new());
    }
    let k = members.len();
    let closure = |gen: &[usize]| -> (Vec<f64>, Vec<f64>, Vec<usize>) {
        let (lower, upper) = envelope(cloud, gen.iter().map(|&j| members[j]));
        let inner = (0..k)
            .filter(|&j| inside(&lower, &upper, cloud.vector(members[j])))
            .collect();
        (lower, upper, inner)
    };
    let narrow =
        |lower: &[f64], upper: &[f64]| cloud.norm_of_difference(upper, lower) <= eps + DIST_SLACK;

    let chosen: Vec<Vec<usize>> = match solver {
        Solver::Exact => {
            if k > EXACT_CAP {
                return Err(Error::Capacity {
                    what: "exact bracketing instance",
                    size: k,
                    cap: EXACT_CAP,
                });
            }
            let to_mask = |v: &[usize]| v.iter().fold(0u32, |m, &j| m | 1 << j);
            let mut seen: HashSet<u32> = HashSet::new();
            let mut stack: Vec<Vec<usize>> = Vec::new();
            for j in 0..k {
                let (_, _, inner) = closure(&[j]);
                if seen.insert(to_mask(&inner)) {
                    stack.push(inner);
                }
            }
            while let Some(set) = stack.pop() {
                let mask = to_mask(&set);
                for j in (0..k).filter(|j| mask >> j & 1 == 0) {
                    let mut gen = set.clone();
                    gen.push(j);
                    let (lower, upper, inner) = closure(&gen);
                    if narrow(&lower, &upper) && seen.insert(to_mask(&inner)) {
                        stack.push(inner);
                    }
                }
            }
            let mut masks: Vec<u32> = seen.into_iter().collect();
            masks.sort_unstable();
            exact_cover(k, &masks)
                .expect("singleton brackets cover every member")
                .into_iter()
                .map(|i| (0..k).filter(|j| masks[i] >> j & 1 == 1).collect())
                .collect()
        }
        Solver::Greedy => {
            let mut candidates: Vec<Vec<usize>> = Vec::with_capacity(k);
            for seed in 0..k {
                let mut order: Vec<usize> = (0..k).filter(|&j| j != seed).collect();
                order.sort_by(|&a, &b| {
                    cloud
                        .distance(members[seed], members[a])
                        .total_cmp(&cloud.distance(members[seed], members[b]))
                        .then(a.cmp(&b))
                });
                let (mut lower, mut upper) = envelope(cloud, [members[seed]]);
                for j in order {
                    let v = cloud.vector(members[j]);
                    let lo: Vec<f64> = lower.iter().zip(v).map(|(a, b)| a.min(*b)).collect();
                    let hi: Vec<f64> = upper.iter().zip(v).map(|(a, b)| a.max(*b)).collect();
                    if narrow(&lo, &hi) {
                        lower = lo;
                        upper = hi;
                    }
                }
                candidates.push(
                    (0..k)
                        .filter(|&j| inside(&lower, &upper, cloud.vector(members[j])))
                        .collect(),
                );
            }
            let sets: Vec<BitSet> = candidates
                .iter()
                .map(|c| BitSet::from_indices(k, c.iter().copied()))
                .collect();
            greedy_cover(&BitSet::full(k), &sets)
                .expect("every seed bracket holds its seed")
                .into_iter()
                .map(|i| candidates[i].clone())
                .collect()
        }
    };

    Ok(chosen
        .into_iter()
        .map(|inner| {
            let (lower, upper) = envelope(cloud, inner.iter().map(|&j| members[j]));
            Bracket {
                lower,
                upper,
                members: inner.into_iter().map(|j| members[j]).collect(),
            }
        })
        .collect())
}

/// Outcome of checking the chaining inequality that bounds the entropy of a
/// ball of radius `2 delta B eps^beta` at scale `eps` by a multiple of the
/// local entropy at `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub eps: f64,
    pub delta: f64,
    pub beta: f64,
    pub b: f64,
    pub bracketing: bool,
    /// `log` of the largest cover count of a ball of radius `2 delta B eps^beta`.
    pub lhs: f64,
    /// `log_4(16 delta) D_[]` (bracketing) or `log_2(4 delta) D` (covering).
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the chaining inequality exactly; the cloud must fit the exact
/// solvers.
pub fn lemma_chain(
    cloud: &MetricCloud,
    eps: f64,
    beta: f64,
    b: f64,
    delta: f64,
    bracketing: bool,
) -> Result<ChainCheck> {
    if cloud.len() > EXACT_CAP {
        return Err(Error::Capacity {
            what: "chaining check cloud",
            size: cloud.len(),
            cap: EXACT_CAP,
        });
    }
    if !(delta > 1.0) {
        return Err(Error::config(format!(
            "chaining check needs delta > 1, got {delta}"
        )));
    }
    let radius = 2.0 * delta * b * eps.powf(beta);
    let (count, _) = max_local_count(cloud, eps, radius, bracketing)?;
    let lhs = (count as f64).ln();
    let d = local_entropy(cloud, eps, beta, b, bracketing)?;
    let factor = if bracketing {
        (16.0 * delta).ln() / 4f64.ln()
    } else {
        (4.0 * delta).log2()
    };
    let rhs = factor * d;
    Ok(ChainCheck {
        eps,
        delta,
        beta,
        b,
        bracketing,
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}
