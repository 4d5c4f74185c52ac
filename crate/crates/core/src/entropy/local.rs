use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::bracket::bracket_cover;
use super::cloud::{MetricCloud, Norm};
use super::setcover::{greedy_cover, BitSet};
use super::{cover_subset, Solver, EXACT_CAP};
use crate::error::{Error, Result};

/// Scales `gamma >= eps` at which the local entropy is evaluated: the dyadic
/// grid `2^j` from the largest power of two not above `eps` up to the cloud
/// diameter. Anchoring the grid at powers of two keeps the local entropy
/// non-increasing in `eps`.
fn gamma_grid(eps: f64, diameter: f64) -> Vec<f64> {
    let mut g = 2f64.powi(eps.log2().floor() as i32);
    // guard against log2 rounding just below an exact power of two
    if g * 2.0 <= eps {
        g *= 2.0;
    }
    let mut out = vec![g];
    while g * 2.0 <= diameter + 1e-12 {
        g *= 2.0;
        out.push(g);
    }
    out
}

/// Largest cover (or bracket) count at scale `gamma` over the balls
/// `B(g, radius)`, with the solver that produced it (greedy if any ball was
/// too large for the exact solver).
pub(crate) fn max_local_count(
    cloud: &MetricCloud,
    gamma: f64,
    radius: f64,
    bracketing: bool,
) -> Result<(usize, Solver)> {
    cloud.local_count(gamma, radius, bracketing, || {
        compute_local_count(cloud, gamma, radius, bracketing)
    })
}

fn compute_local_count(
    cloud: &MetricCloud,
    gamma: f64,
    radius: f64,
    bracketing: bool,
) -> Result<(usize, Solver)> {
    let n = cloud.len();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut best = 1;
    let mut solver = Solver::Exact;
    let mut neighbours: Option<Vec<BitSet>> = None;
    for center in 0..n {
        let ball = cloud.ball(center, radius);
        if ball.len() <= best || !seen.insert(ball.clone()) {
            continue;
        }
        let count = if bracketing {
            let s = Solver::best_for(ball.len());
            if s == Solver::Greedy {
                solver = Solver::Greedy;
            }
            bracket_cover(cloud, &ball, gamma, s)?.len()
        } else if ball.len() <= EXACT_CAP {
            cover_subset(cloud, &ball, gamma, Solver::Exact)?.len()
        } else {
            solver = Solver::Greedy;
            let nb = neighbours.get_or_insert_with(|| {
                (0..n)
                    .map(|c| BitSet::from_indices(n, cloud.ball(c, gamma)))
                    .collect()
            });
            let universe = BitSet::from_indices(n, ball.iter().copied());
            let sets: Vec<BitSet> = ball
                .iter()
                .map(|&c| {
                    let mut s = nb[c].clone();
                    s.intersect_with(&universe);
                    s
                })
                .collect();
            greedy_cover(&universe, &sets)
                .expect("every member covers itself")
                .len()
        };
        best = best.max(count);
    }
    Ok((best, solver))
}

fn check_params(eps: f64, beta: f64, b: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::config(format!(
            "local entropy scale must be positive, got {eps}"
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::config(format!(
            "beta must lie in [0, 1], got {beta}"
        )));
    }
    if !(b >= 1.0) {
        return Err(Error::config(format!("B must be at least 1, got {b}")));
    }
    Ok(())
}

fn local_entropy_with_solver(
    cloud: &MetricCloud,
    eps: f64,
    beta: f64,
    b: f64,
    bracketing: bool,
) -> Result<(f64, Solver)> {
    check_params(eps, beta, b)?;
    let mut best = 1usize;
    let mut solver = Solver::Exact;
    for gamma in gamma_grid(eps, cloud.diameter()) {
        let (count, s) = max_local_count(cloud, gamma, 2.0 * b * gamma.powf(beta), bracketing)?;
        best = best.max(count);
        if s == Solver::Greedy {
            solver = Solver::Greedy;
        }
    }
    Ok(((best as f64).ln(), solver))
}

/// Local entropy: the largest `log N(G ∩ B(g, 2 B gamma^beta), gamma)` over
/// members `g` and dyadic scales `gamma` from `eps` up to the diameter. With
/// `bracketing` the inner count is a bracketing number. Balls with more than
/// [`EXACT_CAP`] members are covered greedily.
pub fn local_entropy(
    cloud: &MetricCloud,
    eps: f64,
    beta: f64,
    b: f64,
    bracketing: bool,
) -> Result<f64> {
    Ok(local_entropy_with_solver(cloud, eps, beta, b, bracketing)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEntropyProfile {
    pub epsilons: Vec<f64>,
    pub dloc: Vec<f64>,
    pub solvers: Vec<Solver>,
    pub bracketing: bool,
    pub beta: f64,
    pub b: f64,
}

pub fn local_entropy_profile(
    cloud: &MetricCloud,
    epsilons: &[f64],
    beta: f64,
    b: f64,
    bracketing: bool,
) -> Result<LocalEntropyProfile> {
    let mut dloc = Vec::with_capacity(epsilons.len());
    let mut solvers = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let (d, s) = local_entropy_with_solver(cloud, eps, beta, b, bracketing)?;
        dloc.push(d);
        solvers.push(s);
    }
    Ok(LocalEntropyProfile {
        epsilons: epsilons.to_vec(),
        dloc,
        solvers,
        bracketing,
        beta,
        b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointKind {
    /// `inf{e : k D(e^{1/(2-beta)}, beta, B) <= e}`
    Gamma,
    /// As `Gamma` with the bracketing local entropy.
    GammaBracket,
    /// `inf{e : k D(B e^{beta/(2-beta)}, 1, 1) <= e}`
    GammaStar,
    /// `inf{e : k D_L2(e, 1, 1) <= e^2}`
    Zeta,
}

pub const FIXED_POINT_MIN: f64 = 1e-6;
pub const FIXED_POINT_MAX: f64 = 1.0;
const FIXED_POINT_RTOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub value: f64,
    pub k: f64,
    pub kind: FixedPointKind,
    /// `(e, k D(transformed e))` just below and at the returned value.
    pub evidence: Vec<(f64, f64)>,
    /// False when the defining inequality already held at the grid minimum
    /// or never held on the search range; `value` is then that boundary.
    pub crossed: bool,
}

impl FixedPointKind {
    /// Scale handed to the local entropy at candidate value `e`.
    fn scale(self, e: f64, beta: f64, b: f64) -> f64 {
        match self {
            FixedPointKind::Gamma | FixedPointKind::GammaBracket => e.powf(1.0 / (2.0 - beta)),
            FixedPointKind::GammaStar => b * e.powf(beta / (2.0 - beta)),
            FixedPointKind::Zeta => e,
        }
    }

    fn holds(self, e: f64, kd: f64) -> bool {
        match self {
            FixedPointKind::Zeta => kd <= e * e,
            _ => kd <= e,
        }
    }
}

/// Fixed point of `kind` for an arbitrary non-increasing entropy function
/// `dloc` of the transformed scale. Log-space bisection on
/// `[FIXED_POINT_MIN, FIXED_POINT_MAX]`.
pub fn fixed_point_with<F>(
    kind: FixedPointKind,
    k: f64,
    beta: f64,
    b: f64,
    mut dloc: F,
) -> Result<FixedPointResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(k > 0.0) {
        return Err(Error::config(format!(
            "fixed point multiplier must be positive, got {k}"
        )));
    }
    let mut eval = |e: f64| -> Result<(f64, bool)> {
        let kd = k * dloc(kind.scale(e, beta, b))?;
        Ok((kd, kind.holds(e, kd)))
    };
    let (kd_lo, holds_lo) = eval(FIXED_POINT_MIN)?;
    if holds_lo {
        return Ok(FixedPointResult {
            value: FIXED_POINT_MIN,
            k,
            kind,
            evidence: vec![(FIXED_POINT_MIN, kd_lo)],
            crossed: false,
        });
    }
    let (kd_hi, holds_hi) = eval(FIXED_POINT_MAX)?;
    if !holds_hi {
        return Ok(FixedPointResult {
            value: FIXED_POINT_MAX,
            k,
            kind,
            evidence: vec![(FIXED_POINT_MAX, kd_hi)],
            crossed: false,
        });
    }
    let (mut lo, mut hi) = ((FIXED_POINT_MIN, kd_lo), (FIXED_POINT_MAX, kd_hi));
    while hi.0 > lo.0 * (1.0 + FIXED_POINT_RTOL) {
        let mid = (lo.0 * hi.0).sqrt();
        let (kd, ok) = eval(mid)?;
        if ok {
            hi = (mid, kd);
        } else {
            lo = (mid, kd);
        }
    }
    Ok(FixedPointResult {
        value: hi.0,
        k,
        kind,
        evidence: vec![lo, hi],
        crossed: true,
    })
}

/// Fixed point of `kind` for the cloud's local entropy. `Zeta` needs an L2
/// cloud, the other kinds an L1 cloud.
pub fn fixed_point(
    cloud: &MetricCloud,
    k: f64,
    beta: f64,
    b: f64,
    kind: FixedPointKind,
) -> Result<FixedPointResult> {
    let want = if kind == FixedPointKind::Zeta {
        Norm::L2
    } else {
        Norm::L1
    };
    if cloud.norm() != want {
        return Err(Error::config(format!(
            "{kind:?} fixed point needs an {want:?} cloud"
        )));
    }
    check_params(1.0, beta, b)?;
    fixed_point_with(kind, k, beta, b, |s| match kind {
        FixedPointKind::Gamma => local_entropy(cloud, s, beta, b, false),
        FixedPointKind::GammaBracket => local_entropy(cloud, s, beta, b, true),
        FixedPointKind::GammaStar | FixedPointKind::Zeta => {
            local_entropy(cloud, s, 1.0, 1.0, false)
        }
    })
}
