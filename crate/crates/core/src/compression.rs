//! Sample compression schemes, their structural auditors, and the exhaustive
//! `psi(n, p)` counter.
//!
//! A scheme maps a realizable sample to a small subsample and reconstructs a
//! predictor from any subsample. Samples are treated as sets: duplicate
//! examples collapse and conflicting labels on one point are rejected.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    canonical, check_function_consistent, cmp_points, dot, is_subset, rng_from_seed, same_set,
    sign, Hypothesis, HypothesisClass, LabeledExample, Predict, Sample,
};
use crate::error::{Error, Result};

/// A reconstructed predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Concept(Hypothesis),
    Replay(Replay),
    /// `sign(f1 + f2 + f3)`
    Vote(Box<[Predictor; 3]>),
}

impl Predict for Predictor {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Predictor::Concept(h) => h.predict(x),
            Predictor::Replay(r) => r.predict(x),
            Predictor::Vote(parts) => f64::from(sign(parts.iter().map(|p| p.predict(x)).sum())),
        }
    }
}

pub trait CompressionScheme: Send + Sync {
    fn id(&self) -> &str;

    /// Declared size bound `k`.
    fn size_bound(&self) -> usize;

    /// The class reconstructions land in, when there is one.
    fn output_class(&self) -> Option<HypothesisClass> {
        None
    }

    /// Compression set of a deduplicated, function-consistent sample.
    fn compress_set(&self, examples: &[LabeledExample]) -> Result<Vec<LabeledExample>>;

    fn reconstruct(&self, compressed: &[LabeledExample]) -> Result<Predictor>;

    /// Deduplicates, checks label consistency and the size bound, and returns
    /// the compression set in canonical order.
    fn compress(&self, examples: &[LabeledExample]) -> Result<Vec<LabeledExample>> {
        let set = as_set(examples)?;
        let out = canonical(&self.compress_set(&set)?);
        if out.len() > self.size_bound() {
            return Err(Error::SchemeSize {
                size: out.len(),
                bound: self.size_bound(),
            });
        }
        Ok(out)
    }

    /// `reconstruct(compress(S))`, failing with an inconsistency error when the
    /// result mislabels a sample point.
    fn learn(&self, examples: &[LabeledExample]) -> Result<Predictor> {
        let compressed = self.compress(examples)?;
        let f = self.reconstruct(&compressed)?;
        if let Some(e) = examples.iter().find(|e| f.label(&e.x) != e.label()) {
            return Err(Error::Inconsistent(format!(
                "{} reconstruction mislabels {:?} (label {})",
                self.id(),
                e.x,
                e.y
            )));
        }
        Ok(f)
    }
}

/// Canonical, deduplicated copy of `examples`.
pub fn as_set(examples: &[LabeledExample]) -> Result<Vec<LabeledExample>> {
    check_function_consistent(examples)?;
    let mut v = canonical(examples);
    v.dedup_by(|a, b| a.total_cmp(b) == Ordering::Equal);
    Ok(v)
}

fn positives(examples: &[LabeledExample]) -> Vec<&LabeledExample> {
    examples.iter().filter(|e| e.label() == 1).collect()
}

/// Intervals on the line: keeps the leftmost and rightmost positive.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntervalScheme;

impl CompressionScheme for IntervalScheme {
    fn id(&self) -> &str {
        "intervals"
    }

    fn size_bound(&self) -> usize {
        2
    }

    fn output_class(&self) -> Option<HypothesisClass> {
        Some(HypothesisClass::Intervals { resolution: 0 })
    }

    fn compress_set(&self, examples: &[LabeledExample]) -> Result<Vec<LabeledExample>> {
        RectangleScheme { dim: 1 }.compress_set(examples)
    }

    fn reconstruct(&self, compressed: &[LabeledExample]) -> Result<Predictor> {
        let pos = positives(compressed);
        if pos.is_empty() {
            return Ok(Predictor::Concept(Hypothesis::Constant { label: -1 }));
        }
        let lo = pos.iter().map(|e| e.x[0]).fold(f64::INFINITY, f64::min);
        let hi = pos.iter().map(|e| e.x[0]).fold(f64::NEG_INFINITY, f64::max);
        Ok(Predictor::Concept(Hypothesis::Interval { lo, hi }))
    }
}

/// Axis-aligned rectangles: for every coordinate, the positive attaining the
/// minimum and the one attaining the maximum (lexicographically smallest
/// point on ties).
#[derive(Debug, Clone, Copy)]
pub struct RectangleScheme {
    pub dim: usize,
}

impl CompressionScheme for RectangleScheme {
    fn id(&self) -> &str {
        if self.dim == 1 {
            "intervals"
        } else {
            "rectangles"
        }
    }

    fn size_bound(&self) -> usize {
        2 * self.dim
    }

    fn output_class(&self) -> Option<HypothesisClass> {
        Some(HypothesisClass::Rectangles { dim: self.dim })
    }

    fn compress_set(&self, examples: &[LabeledExample]) -> Result<Vec<LabeledExample>> {
        let pos = positives(examples);
        if let Some(e) = examples.iter().find(|e| e.x.len() != self.dim) {
            return Err(Error::config(format!(
                "point {:?} is not {}-dimensional",
                e.x, self.dim
            )));
        }
        let mut out: Vec<LabeledExample> = Vec::new();
        for j in 0..self.dim {
            let by_coord = |a: &&&LabeledExample, b: &&&LabeledExample| {
                a.x[j]
                    .total_cmp(&b.x[j])
                    .then_with(|| cmp_points(&a.x, &b.x))
            };
            let lo = pos.iter().min_by(by_coord);
            let hi = pos.iter().max_by(|a, b| {
                a.x[j]
                    .total_cmp(&b.x[j])
                    .then_with(|| cmp_points(&b.x, &a.x))
            });
            for e in lo.into_iter().chain(hi) {
                if !out.iter().any(|o| o.total_cmp(e) == Ordering::Equal) {
                    out.push((*e).clone());
                }
            }
        }
        Ok(out)
    }

    fn reconstruct(&self, compressed: &[LabeledExample]) -> Result<Predictor> {
        let pos = positives(compressed);
        if pos.is_empty() {
            return Ok(Predictor::Concept(Hypothesis::Constant { label: -1 }));
        }
        let mut lo = pos[0].x.clone();
        let mut hi = pos[0].x.clone();
        for e in &pos[1..] {
            for j in 0..self.dim {
                lo[j] = lo[j].min(e.x[j]);
                hi[j] = hi[j].max(e.x[j]);
            }
        }
        if self.dim == 1 {
            return Ok(Predictor::Concept(Hypothesis::Interval {
                lo: lo[0],
                hi: hi[0],
            }));
        }
        Ok(Predictor::Concept(Hypothesis::Rectangle { lo, hi }))
    }
}

/// Keeps the first `k` examples in draw order and returns the interval
/// closure of their positives. Order-dependent on purpose: it exists to show
/// that the auditor catches schemes that are not permutation invariant.
#[derive(Debug, Clone, Copy)]
pub struct PrefixScheme {
    pub k: usize,
}

impl CompressionScheme for PrefixScheme {
    fn id(&self) -> &str {
        "prefix"
    }

    fn size_bound(&self) -> usize {
        self.k
    }

    fn compress_set(&self, examples: &[LabeledExample]) -> Result<Vec<LabeledExample>> {
        Ok(examples.iter().take(self.k).cloned().collect())
    }

    // Draw order must survive, so skip the canonicalizing default.
    fn compress(&self, examples: &[LabeledExample]) -> Result<Vec<LabeledExample>> {
        check_function_consistent(examples)?;
        self.compress_set(examples)
    }

    fn reconstruct(&self, compressed: &[LabeledExample]) -> Result<Predictor> {
        IntervalScheme.reconstruct(compressed)
    }
}

/// Conservative online learners: state changes only on mistakes.
#[derive(Debug, Clone, PartialEq)]
pub enum OnlineLearner {
    /// Majority vote of the members still consistent with every mistake seen
    /// (ties predict `+1`).
    Halving {
        members: Vec<Hypothesis>,
        alive: Vec<bool>,
    },
    /// Homogeneous perceptron `sign(w . x)` started at `w = 0`.
    Perceptron { w: Vec<f64> },
}

impl OnlineLearner {
    pub fn halving(members: Vec<Hypothesis>) -> Self {
        let alive = vec![true; members.len()];
        OnlineLearner::Halving { members, alive }
    }

    pub fn perceptron(dim: usize) -> Self {
        OnlineLearner::Perceptron { w: vec![0.0; dim] }
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        match self {
            OnlineLearner::Halving { members, alive } => {
                let vote: i32 = members
                    .iter()
                    .zip(alive)
                    .filter(|(_, &a)| a)
                    .map(|(h, _)| i32::from(h.label(x)))
                    .sum();
                if vote >= 0 {
                    1
                } else {
                    -1
                }
            }
            OnlineLearner::Perceptron { w } => sign(dot(w, x)),
        }
    }

    /// The update applied after a mistake on `(x, y)`.
    pub fn update(&mut self, x: &[f64], y: i8) {
        match self {
            OnlineLearner::Halving { members, alive } => {
                for (h, a) in members.iter().zip(alive.iter_mut()) {
                    if h.label(x) != y {
                        *a = false;
                    }
                }
            }
            OnlineLearner::Perceptron { w } => {
                for (wi, xi) in w.iter_mut().zip(x) {
                    *wi += f64::from(y) * xi;
                }
            }
        }
    }

    /// Feeds one example; returns whether it was a mistake.
    pub fn step(&mut self, e: &LabeledExample) -> bool {
        let mistake = self.predict(&e.x) != e.label();
        if mistake {
            self.update(&e.x, e.label());
        }
        mistake
    }
}

/// Reconstruction of the online-to-batch scheme: learner states after each
/// prefix of the sorted compression set.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    points: Vec<LabeledExample>,
    states: Vec<OnlineLearner>,
}

impl Replay {
    fn new(initial: OnlineLearner, compressed: &[LabeledExample]) -> Self {
        let points = canonical(compressed);
        let mut states = vec![initial];
        for e in &points {
            let mut s = states.last().expect("initial state").clone();
            s.update(&e.x, e.label());
            states.push(s);
        }
        Self { points, states }
    }

    /// A compression point gets its own label; elsewhere the state after
    /// every compression point strictly before `x` predicts.
    fn predict(&self, x: &[f64]) -> f64 {
        let before = self
            .points
            .partition_point(|p| cmp_points(&p.x, x) == Ordering::Less);
        if let Some(p) = self.points.get(before) {
            if cmp_points(&p.x, x) == Ordering::Equal {
                return f64::from(p.label());
            }
        }
        f64::from(self.states[before].predict(x))
    }
}

/// Online-to-batch conversion of a conservative learner with mistake bound
/// `mistake_bound`: the compression set is the set of mistakes made on the
/// sample sorted lexicographically.
#[derive(Debug, Clone)]
pub struct OnlineToBatch {
    pub learner: OnlineLearner,
    pub mistake_bound: usize,
    id: String,
}

impl OnlineToBatch {
    pub fn new(learner: OnlineLearner, mistake_bound: usize) -> Self {
        let id = match &learner {
            OnlineLearner::Halving { .. } => "halving",
            OnlineLearner::Perceptron { .. } => "perceptron",
        };
        Self {
            learner,
            mistake_bound,
            id: id.to_string(),
        }
    }

    /// Halving over a finite class; `k = floor(log2 N)`.
    pub fn halving(members: Vec<Hypothesis>) -> Self {
        let k = (members.len().max(1) as f64).log2().floor() as usize;
        Self::new(OnlineLearner::halving(members), k)
    }

    /// Perceptron for data with margin `gamma` in the unit ball; `k = floor(1/gamma^2)`.
    pub fn perceptron(dim: usize, gamma: f64) -> Self {
        Self::new(
            OnlineLearner::perceptron(dim),
            (1.0 / (gamma * gamma)).floor() as usize,
        )
    }

    /// Mistakes on the sorted sample.
    pub fn mistakes(&self, examples: &[LabeledExample]) -> Result<Vec<LabeledExample>> {
        let mut state = self.learner.clone();
        Ok(as_set(examples)?
            .into_iter()
            .filter(|e| state.step(e))
            .collect())
    }
}

impl CompressionScheme for OnlineToBatch {
    fn id(&self) -> &str {
        &self.id
    }

    fn size_bound(&self) -> usize {
        self.mistake_bound
    }

    fn compress_set(&self, examples: &[LabeledExample]) -> Result<Vec<LabeledExample>> {
        self.mistakes(examples)
    }

    fn reconstruct(&self, compressed: &[LabeledExample]) -> Result<Predictor> {
        Ok(Predictor::Replay(Replay::new(
            self.learner.clone(),
            compressed,
        )))
    }
}

#[derive(Debug, Clone)]
pub struct MajorityVote {
    pub predictor: Predictor,
    /// Examples dropped to make the sample size a multiple of 3.
    pub truncated: usize,
}

/// `sign(f1 + f2 + f3)` with `f1, f2, f3` learned on the first third, the
/// first two thirds and all of the (truncated) sample.
pub fn majority_of_three(scheme: &dyn CompressionScheme, sample: &Sample) -> Result<MajorityVote> {
    let third = sample.len() / 3;
    let truncated = sample.len() - 3 * third;
    let ex = &sample.examples;
    let parts = [
        scheme.learn(&ex[..third])?,
        scheme.learn(&ex[..2 * third])?,
        scheme.learn(&ex[..3 * third])?,
    ];
    Ok(MajorityVote {
        predictor: Predictor::Vote(Box::new(parts)),
        truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Valid,
    PermutationInvariant,
    Stable,
    Homogeneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub property: Property,
    pub seed: u64,
    pub sample: Vec<LabeledExample>,
    /// The deleted element for stability and homogeneity failures.
    pub removed: Option<LabeledExample>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeAudit {
    pub scheme_id: String,
    pub samples: usize,
    pub valid: bool,
    pub permutation_invariant: bool,
    pub stable: bool,
    pub homogeneous: bool,
    pub max_compression_size: usize,
    /// First failure found, in sample order.
    pub counterexample: Option<Counterexample>,
}

const AUDIT_PERMUTATIONS: usize = 5;

fn audit_one(scheme: &dyn CompressionScheme, sample: &Sample) -> (usize, Vec<Counterexample>) {
    let mut fails = Vec::new();
    let mut fail = |property, removed: Option<&LabeledExample>, detail: String| {
        fails.push(Counterexample {
            property,
            seed: sample.seed,
            sample: sample.examples.clone(),
            removed: removed.cloned(),
            detail,
        })
    };
    let base = match scheme.compress(&sample.examples) {
        Ok(c) => c,
        Err(e) => {
            fail(Property::Valid, None, e.to_string());
            return (0, fails);
        }
    };
    match scheme.reconstruct(&base) {
        Ok(f) => {
            if let Some(e) = sample.examples.iter().find(|e| f.label(&e.x) != e.label()) {
                fail(
                    Property::Valid,
                    None,
                    format!("reconstruction mislabels {:?}", e.x),
                );
            }
        }
        Err(e) => fail(Property::Valid, None, e.to_string()),
    }

    let mut rng = rng_from_seed(sample.seed ^ 0xa0d1_7000);
    for _ in 0..AUDIT_PERMUTATIONS {
        let mut perm = sample.examples.clone();
        perm.shuffle(&mut rng);
        match scheme.compress(&perm) {
            Ok(c) if same_set(&c, &base) => {}
            Ok(c) => {
                fail(
                    Property::PermutationInvariant,
                    None,
                    format!("permuted sample compresses to {c:?}"),
                );
                break;
            }
            Err(e) => {
                fail(Property::PermutationInvariant, None, e.to_string());
                break;
            }
        }
    }

    let set = as_set(&sample.examples).unwrap_or_default();
    let mut stable = true;
    let mut homogeneous = true;
    for (i, e) in set.iter().enumerate() {
        let mut rest = set.clone();
        rest.remove(i);
        let reduced = match scheme.compress(&rest) {
            Ok(c) => c,
            Err(err) => {
                fail(Property::Stable, Some(e), err.to_string());
                break;
            }
        };
        let in_base = base.iter().any(|b| b.total_cmp(e) == Ordering::Equal);
        if !in_base && stable && !same_set(&reduced, &base) {
            stable = false;
            fail(
                Property::Stable,
                Some(e),
                format!("compression changed to {reduced:?}"),
            );
        }
        if in_base && homogeneous {
            let others: Vec<LabeledExample> = base
                .iter()
                .filter(|b| b.total_cmp(e) != Ordering::Equal)
                .cloned()
                .collect();
            if !is_subset(&others, &reduced) {
                homogeneous = false;
                fail(
                    Property::Homogeneous,
                    Some(e),
                    format!("remaining compression points not kept: {reduced:?}"),
                );
            }
        }
    }
    (base.len(), fails)
}

/// Runs the validity, permutation, stability and homogeneity audits on every
/// sample.
pub fn audit(scheme: &dyn CompressionScheme, samples: &[Sample]) -> SchemeAudit {
    let results: Vec<(usize, Vec<Counterexample>)> =
        samples.par_iter().map(|s| audit_one(scheme, s)).collect();
    let failed = |p: Property| {
        results
            .iter()
            .any(|(_, f)| f.iter().any(|c| c.property == p))
    };
    SchemeAudit {
        scheme_id: scheme.id().to_string(),
        samples: samples.len(),
        valid: !failed(Property::Valid),
        permutation_invariant: !failed(Property::PermutationInvariant),
        stable: !failed(Property::Stable),
        homogeneous: !failed(Property::Homogeneous),
        max_compression_size: results.iter().map(|r| r.0).max().unwrap_or(0),
        counterexample: results.into_iter().flat_map(|r| r.1).next(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiCount {
    pub scheme_id: String,
    pub n: usize,
    pub p: usize,
    pub value: usize,
}

/// Largest point set accepted by [`count_psi`].
pub const PSI_POINT_CAP: usize = 10;

/// Number of `p`-subsets of `points` that the scheme, trained on the other
/// `n` points, misclassifies entirely.
pub fn count_psi(
    scheme: &dyn CompressionScheme,
    points: &[LabeledExample],
    p: usize,
) -> Result<PsiCount> {
    if points.len() > PSI_POINT_CAP {
        return Err(Error::Capacity {
            what: "psi point set",
            size: points.len(),
            cap: PSI_POINT_CAP,
        });
    }
    if !(1..=3).contains(&p) || points.len() <= p {
        return Err(Error::config(format!(
            "psi needs p in 1..=3 and n >= 1, got p = {p} with {} points",
            points.len()
        )));
    }
    let points = as_set(points)?;
    let total = points.len();
    let mut value = 0;
    for mask in 0u32..1 << total {
        if mask.count_ones() as usize != p {
            continue;
        }
        let (held, train): (Vec<_>, Vec<_>) = points
            .iter()
            .enumerate()
            .partition(|(i, _)| mask >> i & 1 == 1);
        let train: Vec<LabeledExample> = train.into_iter().map(|(_, e)| e.clone()).collect();
        let f = scheme.reconstruct(&scheme.compress(&train)?)?;
        if held.iter().all(|(_, e)| f.label(&e.x) != e.label()) {
            value += 1;
        }
    }
    Ok(PsiCount {
        scheme_id: scheme.id().to_string(),
        n: total - p,
        p,
        value,
    })
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
