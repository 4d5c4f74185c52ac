//! Hard-margin maximum-margin separators in low dimension and the stable
//! compression scheme built from their essential support vectors.
//!
//! The solver computes the minimum-norm point `z` of `conv(P) - conv(N)`
//! with Wolfe's algorithm, driven by a linear oracle over the two hulls so the
//! `|P| * |N|` difference set is never materialized. The separator is then
//! `w = 2 z / |z|^2` with the offset centring the slab between the hulls.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::compression::{CompressionScheme, Predictor};
use crate::domain::{canonical, dot, norm, Hypothesis, HypothesisClass, LabeledExample};
use crate::error::{Error, Result};

pub const MAX_DIM: usize = 10;
pub const MAX_POINTS: usize = 10_000;
/// Smallest geometric margin accepted as well conditioned.
pub const MIN_MARGIN: f64 = 1e-6;
/// Relative slack on `y (w . x + b) >= 1`.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Relative tolerance used to compare two solutions.
pub const SOLUTION_TOL: f64 = 1e-8;
/// Largest active set searched exhaustively for essential support vectors.
pub const EXHAUSTIVE_ACTIVE_CAP: usize = 12;

const ACTIVE_TOL: f64 = 1e-7;
const GAP_TOL: f64 = 1e-14;
const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatorSolution {
    pub w: Vec<f64>,
    pub b: f64,
    /// `1 / |w|`; infinite for single-class samples.
    pub margin: f64,
    /// Indices into the input slice whose functional margin is 1.
    pub active_indices: Vec<usize>,
    /// Final Wolfe duality gap `|z|^2 - min_q z . q`.
    pub kkt_residual: f64,
}

impl SeparatorSolution {
    pub fn hypothesis(&self) -> Hypothesis {
        Hypothesis::halfspace(self.w.clone(), self.b)
    }

    pub fn functional_margin(&self, e: &LabeledExample) -> f64 {
        e.y * (dot(&self.w, &e.x) + self.b)
    }

    /// Same `(w, b)` up to [`SOLUTION_TOL`] relative to the larger solution.
    pub fn same_separator(&self, other: &SeparatorSolution) -> bool {
        let scale = 1f64
            .max(norm(&self.w))
            .max(norm(&other.w))
            .max(self.b.abs())
            .max(other.b.abs());
        let tol = SOLUTION_TOL * scale;
        self.w.len() == other.w.len()
            && self
                .w
                .iter()
                .zip(&other.w)
                .all(|(a, b)| (a - b).abs() <= tol)
            && (self.b - other.b).abs() <= tol
    }
}

/// Point of the difference hull `p - n`, remembered by its pair.
#[derive(Clone)]
struct Vertex {
    pair: (usize, usize),
    q: Vec<f64>,
}

/// Weights `alpha` with `sum alpha = 1` minimizing `|sum alpha_i q_i|`.
/// Written as `q_1 + D beta` with `D = [q_i - q_1]` and solved by SVD least
/// squares, so affinely dependent corrals (collinear data) still get the
/// minimum-norm `beta`.
fn affine_minimizer(corral: &[Vertex]) -> Vec<f64> {
    let m = corral.len();
    let dim = corral[0].q.len();
    let d = DMatrix::<f64>::from_fn(dim, m - 1, |r, c| corral[c + 1].q[r] - corral[0].q[r]);
    let rhs = DVector::<f64>::from_iterator(dim, corral[0].q.iter().map(|v| -v));
    let svd = d.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let beta = svd.solve(&rhs, tol).expect("both factors were computed");
    let mut alpha = Vec::with_capacity(m);
    alpha.push(1.0 - beta.sum());
    alpha.extend(beta.iter());
    alpha
}

fn combine(corral: &[Vertex], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (v, &l) in corral.iter().zip(weights) {
        for (xi, qi) in x.iter_mut().zip(&v.q) {
            *xi += l * qi;
        }
    }
    x
}

/// Minimum-norm point of `conv(pos) - conv(neg)` and the duality gap.
fn min_norm_difference(pos: &[&[f64]], neg: &[&[f64]], dim: usize) -> Result<(Vec<f64>, f64)> {
    let vertex = |i: usize, j: usize| Vertex {
        pair: (i, j),
        q: pos[i].iter().zip(neg[j]).map(|(a, b)| a - b).collect(),
    };
    // Linear oracle: argmin over the difference hull of z . q, lowest index on ties.
    let oracle = |z: &[f64]| {
        let i = (0..pos.len())
            .min_by(|&a, &b| dot(z, pos[a]).total_cmp(&dot(z, pos[b])))
            .unwrap();
        let j = (0..neg.len())
            .rev()
            .max_by(|&a, &b| dot(z, neg[a]).total_cmp(&dot(z, neg[b])))
            .unwrap();
        vertex(i, j)
    };
    let r2 = pos
        .iter()
        .flat_map(|p| {
            neg.iter().map(move |n| {
                p.iter()
                    .zip(*n)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
        })
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);

    let mut corral = vec![vertex(0, 0)];
    let mut lambda = vec![1.0];
    let mut x = corral[0].q.clone();
    let mut gap = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let q = oracle(&x);
        gap = dot(&x, &x) - dot(&x, &q.q);
        if gap <= GAP_TOL * r2 || corral.iter().any(|v| v.pair == q.pair) {
            return Ok((x, gap.max(0.0)));
        }
        corral.push(q);
        lambda.push(0.0);
        loop {
            let alpha = affine_minimizer(&corral);
            if alpha.iter().all(|&a| a > 1e-12) {
                lambda = alpha;
                break;
            }
            // Step toward the affine minimizer until a weight hits zero.
            let (mut theta, mut hit) = (1.0, 0);
            for (i, (&a, &l)) in alpha.iter().zip(&lambda).enumerate() {
                if a <= 1e-12 && l - a > 0.0 {
                    let t = l / (l - a);
                    if t < theta {
                        theta = t;
                        hit = i;
                    }
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            lambda[hit] = 0.0;
            let keep: Vec<bool> = lambda.iter().map(|&l| l > 1e-14).collect();
            let mut k = keep.iter();
            corral.retain(|_| *k.next().unwrap());
            lambda.retain(|&l| l > 1e-14);
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            if corral.len() == 1 {
                lambda = vec![1.0];
                break;
            }
        }
        x = combine(&corral, &lambda, dim);
    }
    log::warn!("min-norm iteration cap reached with gap {gap:e}");
    Ok((x, gap.max(0.0)))
}

/// Maximum-margin separator `sign(w . x + b)` of a labeled sample.
///
/// A single-class sample gets the constant separator `w = 0, b = y`, whose
/// functional margin is 1 on every point.
pub fn hard_margin_solve(examples: &[LabeledExample]) -> Result<SeparatorSolution> {
    if examples.is_empty() {
        return Err(Error::config("cannot solve on an empty sample"));
    }
    let dim = examples[0].x.len();
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::Capacity {
            what: "separator dimension",
            size: dim,
            cap: MAX_DIM,
        });
    }
    if examples.len() > MAX_POINTS {
        return Err(Error::Capacity {
            what: "separator sample",
            size: examples.len(),
            cap: MAX_POINTS,
        });
    }
    if let Some(e) = examples
        .iter()
        .find(|e| e.x.len() != dim || !e.x.iter().all(|v| v.is_finite()))
    {
        return Err(Error::config(format!("bad point {:?}", e.x)));
    }
    if let Some(e) = examples.iter().find(|e| e.y != 1.0 && e.y != -1.0) {
        return Err(Error::config(format!(
            "separator labels must be +1 or -1, got {}",
            e.y
        )));
    }

    // Canonical order makes the result independent of the input order.
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.sort_by(|&a, &b| examples[a].total_cmp(&examples[b]));
    let pos: Vec<&[f64]> = order
        .iter()
        .filter(|&&i| examples[i].y > 0.0)
        .map(|&i| examples[i].x.as_slice())
        .collect();
    let neg: Vec<&[f64]> = order
        .iter()
        .filter(|&&i| examples[i].y < 0.0)
        .map(|&i| examples[i].x.as_slice())
        .collect();

    let (w, b, gap) = if pos.is_empty() || neg.is_empty() {
        (vec![0.0; dim], if pos.is_empty() { -1.0 } else { 1.0 }, 0.0)
    } else {
        let (z, gap) = min_norm_difference(&pos, &neg, dim)?;
        let zz = dot(&z, &z);
        let scale = pos.iter().chain(&neg).map(|p| norm(p)).fold(1.0, f64::max);
        let lowest_pos = pos.iter().map(|p| dot(&z, p)).fold(f64::INFINITY, f64::min);
        let highest_neg = neg
            .iter()
            .map(|p| dot(&z, p))
            .fold(f64::NEG_INFINITY, f64::max);
        if zz.sqrt() <= 1e-9 * scale || lowest_pos <= highest_neg {
            return Err(Error::Infeasible(
                "the two classes are not linearly separable".into(),
            ));
        }
        let margin = zz.sqrt() / 2.0;
        if margin < MIN_MARGIN {
            return Err(Error::Conditioning(format!(
                "margin {margin:e} is below {MIN_MARGIN:e}"
            )));
        }
        let w: Vec<f64> = z.iter().map(|v| 2.0 * v / zz).collect();
        let b = -(lowest_pos + highest_neg) / zz;
        (w, b, gap)
    };

    let wn = norm(&w);
    let mut sol = SeparatorSolution {
        margin: if wn > 0.0 { 1.0 / wn } else { f64::INFINITY },
        w,
        b,
        active_indices: Vec::new(),
        kkt_residual: gap,
    };
    for (i, e) in examples.iter().enumerate() {
        let fm = sol.functional_margin(e);
        let tol = 1.0 + wn * norm(&e.x);
        if fm < 1.0 - FEASIBILITY_TOL * tol {
            return Err(Error::Conditioning(format!(
                "solution violates constraint {i} (functional margin {fm})"
            )));
        }
        if fm <= 1.0 + ACTIVE_TOL * tol {
            sol.active_indices.push(i);
        }
    }
    Ok(sol)
}

/// Lexicographically first minimal subsample of the active points whose
/// separator equals the full-sample one.
///
/// All subsets of the active set are searched by size and then by position
/// in the canonical point order when there are at most
/// [`EXHAUSTIVE_ACTIVE_CAP`] active points. Larger active sets are first
/// thinned by greedy deletion in canonical order.
pub fn essential_support_vectors(examples: &[LabeledExample]) -> Result<Vec<LabeledExample>> {
    let full = hard_margin_solve(examples)?;
    let mut active: Vec<LabeledExample> = full
        .active_indices
        .iter()
        .map(|&i| examples[i].clone())
        .collect();
    active = canonical(&active);
    active.dedup_by(|a, b| a.total_cmp(b) == Ordering::Equal);

    let reproduces = |subset: &[LabeledExample]| -> bool {
        hard_margin_solve(subset)
            .map(|s| s.same_separator(&full))
            .unwrap_or(false)
    };

    if active.len() > EXHAUSTIVE_ACTIVE_CAP {
        let mut i = 0;
        while i < active.len() {
            let mut trial = active.clone();
            trial.remove(i);
            if !trial.is_empty() && reproduces(&trial) {
                active = trial;
            } else {
                i += 1;
            }
        }
        if active.len() > EXHAUSTIVE_ACTIVE_CAP {
            return Ok(active);
        }
    }

    let m = active.len();
    for size in 1..=m {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let subset: Vec<LabeledExample> = idx.iter().map(|&i| active[i].clone()).collect();
            if reproduces(&subset) {
                return Ok(subset);
            }
            // next combination in lexicographic order
            let Some(pos) = (0..size).rev().find(|&p| idx[p] < m - size + p) else {
                break;
            };
            idx[pos] += 1;
            for p in pos + 1..size {
                idx[p] = idx[p - 1] + 1;
            }
        }
    }
    Err(Error::Conditioning(
        "no active subset reproduces the separator".into(),
    ))
}

/// Compression by essential support vectors; reconstruction re-solves.
#[derive(Debug, Clone, Copy)]
pub struct SvmScheme {
    pub dim: usize,
}

impl CompressionScheme for SvmScheme {
    fn id(&self) -> &str {
        "svm"
    }

    fn size_bound(&self) -> usize {
        self.dim + 1
    }

    fn output_class(&self) -> Option<HypothesisClass> {
        Some(HypothesisClass::AffineHalfspaces { dim: self.dim })
    }

    fn compress_set(&self, examples: &[LabeledExample]) -> Result<Vec<LabeledExample>> {
        if examples.is_empty() {
            return Ok(Vec::new());
        }
        essential_support_vectors(examples)
    }

    fn reconstruct(&self, compressed: &[LabeledExample]) -> Result<Predictor> {
        if compressed.is_empty() {
            return Ok(Predictor::Concept(Hypothesis::Constant { label: 1 }));
        }
        Ok(Predictor::Concept(
            hard_margin_solve(compressed)?.hypothesis(),
        ))
    }
}
