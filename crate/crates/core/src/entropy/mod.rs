//! Covering numbers, bracketing numbers, local entropies and their fixed
//! points over finite metric representations of (loss) classes.
//!
//! A class is represented by a [`MetricCloud`]: one real vector per
//! hypothesis, holding the function's values at a fixed set of weighted
//! evaluation points. Loss-class clouds evaluate on the joint law of `(X, Y)`
//! (two label atoms per marginal point), raw-class clouds on the marginal.
//! All covers are proper: centers are cloud members.

mod bracket;
mod cloud;
mod local;
pub mod setcover;

pub use bracket::{bracket_cover, bracketing_number, lemma_chain, Bracket, ChainCheck};
pub use cloud::{build_cloud, CloudMode, CloudSource, MetricCloud, Norm, DEFAULT_CLOUD_POINTS};
pub use local::{
    fixed_point, fixed_point_with, local_entropy, local_entropy_profile, FixedPointKind,
    FixedPointResult, LocalEntropyProfile, FIXED_POINT_MAX, FIXED_POINT_MIN,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use setcover::{exact_cover, greedy_cover, BitSet};

/// Largest member count handed to the exact solvers.
pub const EXACT_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Greedy,
    Exact,
}

impl Solver {
    /// Exact when `size` fits under [`EXACT_CAP`], greedy otherwise.
    pub fn best_for(size: usize) -> Self {
        if size <= EXACT_CAP {
            Solver::Exact
        } else {
            Solver::Greedy
        }
    }
}

/// Minimal proper `eps`-cover of the whole cloud; returns the center indices.
pub fn cover_centers(cloud: &MetricCloud, eps: f64, solver: Solver) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..cloud.len()).collect();
    cover_subset(cloud, &all, eps, solver)
}

/// Number of centers in a minimal (exact) or greedy proper `eps`-cover.
pub fn covering_number(cloud: &MetricCloud, eps: f64, solver: Solver) -> Result<usize> {
    Ok(cover_centers(cloud, eps, solver)?.len())
}

/// Proper cover of `members` (indices into the cloud) by balls of radius
/// `eps` centered at members. Returns cloud indices of the centers.
pub fn cover_subset(
    cloud: &MetricCloud,
    members: &[usize],
    eps: f64,
    solver: Solver,
) -> Result<Vec<usize>> {
    if !(eps > 0.0) {
        return Err(Error::config(format!(
            "covering radius must be positive, got {eps}"
        )));
    }
    if members.is_empty() {
        return Ok(Vec::new());
    }
    let k = members.len();
    let local = match solver {
        Solver::Exact => {
            if k > EXACT_CAP {
                return Err(Error::Capacity {
                    what: "exact covering instance",
                    size: k,
                    cap: EXACT_CAP,
                });
            }
            let sets: Vec<u32> = members
                .iter()
                .map(|&c| {
                    members
                        .iter()
                        .enumerate()
                        .filter(|(_, &v)| cloud.within(c, v, eps))
                        .fold(0u32, |m, (j, _)| m | 1 << j)
                })
                .collect();
            exact_cover(k, &sets).expect("every member covers itself")
        }
        Solver::Greedy => {
            let sets: Vec<BitSet> = members
                .iter()
                .map(|&c| {
                    BitSet::from_indices(
                        k,
                        members
                            .iter()
                            .enumerate()
                            .filter(|(_, &v)| cloud.within(c, v, eps))
                            .map(|(j, _)| j),
                    )
                })
                .collect();
            greedy_cover(&BitSet::full(k), &sets).expect("every member covers itself")
        }
    };
    Ok(local.into_iter().map(|j| members[j]).collect())
}

/// Checks that `centers` is a proper `eps`-cover of the cloud.
pub fn is_proper_cover(cloud: &MetricCloud, centers: &[usize], eps: f64) -> bool {
    centers.iter().all(|&c| c < cloud.len())
        && (0..cloud.len()).all(|v| centers.iter().any(|&c| cloud.within(c, v, eps)))
}
