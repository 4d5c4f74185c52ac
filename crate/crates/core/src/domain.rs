//! Examples, hypotheses, synthetic distributions and risk evaluation.
//!
//! Every distribution here has a two-point conditional label law, so
//! conditional expectations of a loss given `x` are computed exactly and only
//! the integral over the marginal may need Monte Carlo. Closed forms are used
//! whenever they exist:
//!
//! * finite-support marginals (exact pmf sums),
//! * homogeneous halfspaces under a rotationally symmetric marginal
//!   (disagreement mass is `angle / pi`),
//! * intervals under the uniform law on `[-1, 1]`,
//! * unclamped linear regressors under ball/sphere marginals.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seed of the shared Monte Carlo evaluation set. Independent of any
/// training seed.
pub const EVAL_SEED: u64 = 0x5eed_e7a1_0000_0001;

/// Number of Monte Carlo points used when no closed form is available.
pub const DEFAULT_MC_POINTS: usize = 100_000;

/// Tolerance used when validating pmf weights.
pub const PMF_TOLERANCE: f64 = 1e-12;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl LabeledExample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }

    /// Lexicographic order on `x` (exact `total_cmp` per coordinate), then `y`.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        cmp_points(&self.x, &other.x).then(self.y.total_cmp(&other.y))
    }

    pub fn label(&self) -> i8 {
        if self.y >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// Exact lexicographic comparison of points; shorter vectors sort first on ties.
pub fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    for (u, v) in a.iter().zip(b) {
        match u.total_cmp(v) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Sorts examples into canonical order so that two subsamples can be compared
/// as sets.
pub fn canonical(examples: &[LabeledExample]) -> Vec<LabeledExample> {
    let mut v = examples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Set equality of two lists of examples (multiplicity respected).
pub fn same_set(a: &[LabeledExample], b: &[LabeledExample]) -> bool {
    a.len() == b.len()
        && canonical(a)
            .iter()
            .zip(canonical(b).iter())
            .all(|(u, v)| u.total_cmp(v) == Ordering::Equal)
}

/// `a ⊆ b` as multisets.
pub fn is_subset(a: &[LabeledExample], b: &[LabeledExample]) -> bool {
    let mut rest = canonical(b);
    for e in canonical(a) {
        match rest.binary_search_by(|p| p.total_cmp(&e)) {
            Ok(i) => {
                rest.remove(i);
            }
            Err(_) => return false,
        }
    }
    true
}

/// Rejects samples holding the same point with two different labels.
pub fn check_function_consistent(examples: &[LabeledExample]) -> Result<()> {
    let sorted = canonical(examples);
    for w in sorted.windows(2) {
        if cmp_points(&w[0].x, &w[1].x) == Ordering::Equal && w[0].y != w[1].y {
            return Err(Error::Inconsistent(format!(
                "point {:?} carries labels {} and {}",
                w[0].x, w[0].y, w[1].y
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub examples: Vec<LabeledExample>,
    pub seed: u64,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Anything that maps a point to a real prediction. Binary predictors return
/// exactly `+1.0` or `-1.0`.
pub trait Predict {
    fn predict(&self, x: &[f64]) -> f64;

    fn label(&self, x: &[f64]) -> i8 {
        sign(self.predict(x))
    }
}

/// `sign` with the convention `sign(0) = +1`.
pub fn sign(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Hypothesis {
    /// Label table over a finite domain; points are `[index]`.
    Table {
        labels: Vec<i8>,
    },
    /// `sign(normal . x + offset)`; homogeneous when `offset == 0`.
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    /// `+1` on the closed interval `[lo, hi]` of the first coordinate.
    Interval {
        lo: f64,
        hi: f64,
    },
    /// `+1` on the closed axis-aligned box `[lo, hi]`.
    Rectangle {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Constant {
        label: i8,
    },
    /// Real-valued `clamp(weights . x, -1, 1)`.
    Linear {
        weights: Vec<f64>,
    },
}

impl Hypothesis {
    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Self {
        Hypothesis::Halfspace { normal, offset }
    }

    /// Homogeneous halfspace in the plane with normal at `angle` radians.
    pub fn planar(angle: f64) -> Self {
        Hypothesis::Halfspace {
            normal: vec![angle.cos(), angle.sin()],
            offset: 0.0,
        }
    }

    pub fn is_binary(&self) -> bool {
        !matches!(self, Hypothesis::Linear { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Hypothesis::Table { labels } => {
                if labels.iter().any(|&l| l != 1 && l != -1) {
                    return Err(Error::config("table labels must be +1 or -1"));
                }
            }
            Hypothesis::Halfspace { normal, offset } => {
                if normal.is_empty() || normal.iter().all(|&v| v == 0.0) {
                    return Err(Error::config("halfspace normal must be nonzero"));
                }
                if !offset.is_finite() || normal.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("halfspace parameters must be finite"));
                }
            }
            Hypothesis::Rectangle { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::config(
                        "rectangle bounds must share a nonzero dimension",
                    ));
                }
            }
            Hypothesis::Constant { label } => {
                if *label != 1 && *label != -1 {
                    return Err(Error::config("constant label must be +1 or -1"));
                }
            }
            Hypothesis::Interval { .. } | Hypothesis::Linear { .. } => {}
        }
        Ok(())
    }

    fn is_homogeneous_halfspace(&self) -> Option<&[f64]> {
        match self {
            Hypothesis::Halfspace { normal, offset } if *offset == 0.0 => Some(normal),
            _ => None,
        }
    }
}

impl Predict for Hypothesis {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Hypothesis::Table { labels } => {
                let i = x[0] as usize;
                f64::from(labels[i])
            }
            Hypothesis::Halfspace { normal, offset } => f64::from(sign(dot(normal, x) + offset)),
            Hypothesis::Interval { lo, hi } => {
                if *lo <= x[0] && x[0] <= *hi {
                    1.0
                } else {
                    -1.0
                }
            }
            Hypothesis::Rectangle { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(v, (l, h))| *l <= *v && *v <= *h);
                if inside {
                    1.0
                } else {
                    -1.0
                }
            }
            Hypothesis::Constant { label } => f64::from(*label),
            Hypothesis::Linear { weights } => dot(weights, x).clamp(-1.0, 1.0),
        }
    }
}

/// Evaluates a predictor through a reference so trait objects work too.
impl<P: Predict + ?Sized> Predict for &P {
    fn predict(&self, x: &[f64]) -> f64 {
        (**self).predict(x)
    }
}

/// Largest number of hypotheses a class may expand to.
pub const MAX_ENUMERATED: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HypothesisClass {
    /// Explicit label vectors over a finite domain.
    Finite {
        members: Vec<Vec<i8>>,
    },
    /// Homogeneous halfspaces; `resolution` normals when discretized.
    HomogeneousHalfspaces {
        dim: usize,
        resolution: usize,
    },
    AffineHalfspaces {
        dim: usize,
    },
    /// Intervals of the line; `resolution` endpoint grid on `[-1, 1]`.
    Intervals {
        resolution: usize,
    },
    Rectangles {
        dim: usize,
    },
    /// Clamped linear maps with each weight on a `levels`-point grid of
    /// `[-scale, scale]`.
    RegressionGrid {
        dim: usize,
        levels: usize,
        scale: f64,
    },
}

impl HypothesisClass {
    /// Input dimension, where defined.
    pub fn dim(&self) -> Option<usize> {
        match self {
            HypothesisClass::Finite { .. } => Some(1),
            HypothesisClass::HomogeneousHalfspaces { dim, .. }
            | HypothesisClass::AffineHalfspaces { dim }
            | HypothesisClass::Rectangles { dim }
            | HypothesisClass::RegressionGrid { dim, .. } => Some(*dim),
            HypothesisClass::Intervals { .. } => Some(1),
        }
    }

    /// Expands the class to a finite list of distinct hypotheses.
    pub fn enumerate(&self) -> Result<Vec<Hypothesis>> {
        self.enumerate_capped(MAX_ENUMERATED)
    }

    pub fn enumerate_capped(&self, cap: usize) -> Result<Vec<Hypothesis>> {
        let count = self.count()?;
        if count == 0 {
            return Err(Error::config("hypothesis class is empty"));
        }
        if count > cap {
            return Err(Error::config(format!(
                "discretization overflow: class expands to {count} hypotheses, cap is {cap}"
            )));
        }
        let out = match self {
            HypothesisClass::Finite { members } => {
                let mut seen = members.clone();
                seen.sort();
                if seen.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::config("finite class contains duplicate hypotheses"));
                }
                let out: Vec<Hypothesis> = members
                    .iter()
                    .map(|m| Hypothesis::Table { labels: m.clone() })
                    .collect();
                for h in &out {
                    h.validate()?;
                }
                if members.iter().any(|m| m.len() != members[0].len()) {
                    return Err(Error::config("finite class members differ in domain size"));
                }
                out
            }
            HypothesisClass::HomogeneousHalfspaces { dim, resolution } => {
                homogeneous_directions(*dim, *resolution)
                    .into_iter()
                    .map(|normal| Hypothesis::Halfspace {
                        normal,
                        offset: 0.0,
                    })
                    .collect()
            }
            HypothesisClass::Intervals { resolution } => {
                let grid = linspace(-1.0, 1.0, *resolution);
                let mut out = vec![Hypothesis::Constant { label: -1 }];
                for (i, &lo) in grid.iter().enumerate() {
                    for &hi in &grid[i..] {
                        out.push(Hypothesis::Interval { lo, hi });
                    }
                }
                out
            }
            HypothesisClass::RegressionGrid { dim, levels, scale } => {
                let grid = linspace(-scale, *scale, *levels);
                let mut out = Vec::with_capacity(count);
                let mut idx = vec![0usize; *dim];
                loop {
                    out.push(Hypothesis::Linear {
                        weights: idx.iter().map(|&i| grid[i]).collect(),
                    });
                    let mut j = 0;
                    while j < *dim {
                        idx[j] += 1;
                        if idx[j] < *levels {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                    if j == *dim {
                        break;
                    }
                }
                out
            }
            HypothesisClass::AffineHalfspaces { .. } | HypothesisClass::Rectangles { .. } => {
                unreachable!("count() rejects continuous classes")
            }
        };
        Ok(out)
    }

    fn count(&self) -> Result<usize> {
        match self {
            HypothesisClass::Finite { members } => Ok(members.len()),
            HypothesisClass::HomogeneousHalfspaces { dim, resolution } => {
                if *dim == 0 {
                    return Err(Error::config("dimension must be at least 1"));
                }
                Ok(if *dim == 1 { 2 } else { *resolution })
            }
            HypothesisClass::Intervals { resolution } => Ok(resolution * (resolution + 1) / 2 + 1),
            HypothesisClass::RegressionGrid { dim, levels, scale } => {
                if *dim == 0 || *levels == 0 {
                    return Err(Error::config(
                        "regression grid needs dim >= 1 and levels >= 1",
                    ));
                }
                if !(*scale > 0.0 && *scale <= 1.0) {
                    return Err(Error::config("regression grid scale must lie in (0, 1]"));
                }
                Ok(levels.checked_pow(*dim as u32).unwrap_or(usize::MAX))
            }
            HypothesisClass::AffineHalfspaces { .. } => Err(Error::config(
                "affine halfspaces are not enumerable; use them as a scheme output class",
            )),
            HypothesisClass::Rectangles { .. } => Err(Error::config(
                "rectangles are not enumerable; use them as a scheme output class",
            )),
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![(lo + hi) / 2.0],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Unit normals of a discretized homogeneous-halfspace class. In the plane
/// they are equally spaced angles `2 pi j / resolution`; in higher dimension
/// they are drawn from a fixed seed.
pub fn homogeneous_directions(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..resolution)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / resolution as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut rng = rng_from_seed(0xC1A5_5000 + dim as u64);
            (0..resolution)
                .map(|_| unit_vector(&mut rng, dim))
                .collect()
        }
    }
}

fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Marginal {
    UniformBall {
        dim: usize,
    },
    UniformSphere {
        dim: usize,
    },
    /// Finite support `{[0], [1], ...}` with the given pmf.
    Finite {
        weights: Vec<f64>,
    },
}

impl Marginal {
    pub fn dim(&self) -> usize {
        match self {
            Marginal::UniformBall { dim } | Marginal::UniformSphere { dim } => *dim,
            Marginal::Finite { .. } => 1,
        }
    }

    pub fn is_rotationally_symmetric(&self) -> bool {
        matches!(
            self,
            Marginal::UniformBall { .. } | Marginal::UniformSphere { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Marginal::UniformBall { dim } | Marginal::UniformSphere { dim } => {
                if *dim == 0 {
                    return Err(Error::config("marginal dimension must be at least 1"));
                }
            }
            Marginal::Finite { weights } => {
                if weights.is_empty() {
                    return Err(Error::config("finite marginal has an empty pmf"));
                }
                if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(Error::config("pmf weights must be finite and nonnegative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > PMF_TOLERANCE {
                    return Err(Error::config(format!("pmf weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Marginal::UniformSphere { dim } => unit_vector(rng, *dim),
            Marginal::UniformBall { dim } => {
                let dir = unit_vector(rng, *dim);
                let u: f64 = rng.random();
                let r = u.powf(1.0 / *dim as f64);
                dir.into_iter().map(|c| c * r).collect()
            }
            Marginal::Finite { weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc && *w > 0.0 {
                        pick = i;
                        break;
                    }
                }
                vec![pick as f64]
            }
        }
    }

    /// Exact evaluation points and weights when the support is finite.
    pub fn atoms(&self) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        match self {
            Marginal::Finite { weights } => Some((
                (0..weights.len()).map(|i| vec![i as f64]).collect(),
                weights.clone(),
            )),
            Marginal::UniformSphere { dim: 1 } => {
                Some((vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]))
            }
            _ => None,
        }
    }

    /// `E[x_1^2]`, used for linear regressors.
    fn second_moment(&self) -> Option<f64> {
        match self {
            Marginal::UniformSphere { dim } => Some(1.0 / *dim as f64),
            Marginal::UniformBall { dim } => Some(1.0 / (*dim as f64 + 2.0)),
            Marginal::Finite { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseModel {
    /// `y = f*(x)`.
    Realizable { target: Hypothesis },
    /// `P(y = f*(x) | x) = (1 + margin) / 2`.
    Massart { target: Hypothesis, margin: f64 },
    /// Per-atom margins `|E[y | x]|` on a finite marginal.
    MarginProfile {
        target: Hypothesis,
        margins: Vec<f64>,
    },
    /// `y = f*(x) + s * sigma` with a fair random sign `s`.
    BoundedRegression { target: Hypothesis, sigma: f64 },
}

impl NoiseModel {
    pub fn target(&self) -> &Hypothesis {
        match self {
            NoiseModel::Realizable { target }
            | NoiseModel::Massart { target, .. }
            | NoiseModel::MarginProfile { target, .. }
            | NoiseModel::BoundedRegression { target, .. } => target,
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, NoiseModel::BoundedRegression { .. })
    }

    /// `|E[y | x]|` for classification noise.
    pub fn margin_at(&self, x: &[f64]) -> f64 {
        match self {
            NoiseModel::Realizable { .. } => 1.0,
            NoiseModel::Massart { margin, .. } => *margin,
            NoiseModel::MarginProfile { margins, .. } => margins[x[0] as usize],
            NoiseModel::BoundedRegression { .. } => 0.0,
        }
    }

    /// Constant margin when the noise has one.
    pub fn constant_margin(&self) -> Option<f64> {
        match self {
            NoiseModel::Realizable { .. } => Some(1.0),
            NoiseModel::Massart { margin, .. } => Some(*margin),
            _ => None,
        }
    }

    /// The two-point law of `y` given `x`, as `(value, probability)` pairs.
    pub fn label_law(&self, x: &[f64]) -> [(f64, f64); 2] {
        let t = self.target().predict(x);
        match self {
            NoiseModel::BoundedRegression { sigma, .. } => [(t + sigma, 0.5), (t - sigma, 0.5)],
            _ => {
                let m = self.margin_at(x);
                [(t, (1.0 + m) / 2.0), (-t, (1.0 - m) / 2.0)]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub marginal: Marginal,
    pub noise: NoiseModel,
}

impl DistributionSpec {
    pub fn new(marginal: Marginal, noise: NoiseModel) -> Result<Self> {
        let spec = Self { marginal, noise };
        spec.validate()?;
        Ok(spec)
    }

    pub fn realizable(marginal: Marginal, target: Hypothesis) -> Result<Self> {
        Self::new(marginal, NoiseModel::Realizable { target })
    }

    pub fn massart(marginal: Marginal, target: Hypothesis, margin: f64) -> Result<Self> {
        Self::new(marginal, NoiseModel::Massart { target, margin })
    }

    pub fn target(&self) -> &Hypothesis {
        self.noise.target()
    }

    pub fn validate(&self) -> Result<()> {
        self.marginal.validate()?;
        let target = self.noise.target();
        target.validate()?;
        match &self.noise {
            NoiseModel::Realizable { .. } => {}
            NoiseModel::Massart { margin, .. } => {
                if !(*margin > 0.0 && *margin <= 1.0) {
                    return Err(Error::config(format!(
                        "Massart margin must lie in (0, 1], got {margin}"
                    )));
                }
            }
            NoiseModel::MarginProfile { margins, .. } => {
                let Marginal::Finite { weights } = &self.marginal else {
                    return Err(Error::config("margin profiles need a finite marginal"));
                };
                if margins.len() != weights.len() {
                    return Err(Error::config(
                        "margin profile length differs from pmf length",
                    ));
                }
                if margins.iter().any(|m| !(0.0..=1.0).contains(m)) {
                    return Err(Error::config("margins must lie in [0, 1]"));
                }
            }
            NoiseModel::BoundedRegression { sigma, .. } => {
                if !(0.0..=0.25).contains(sigma) {
                    return Err(Error::config(format!(
                        "regression noise level must lie in [0, 0.25], got {sigma}"
                    )));
                }
                if target.is_binary() && *sigma > 0.0 {
                    return Err(Error::config(
                        "unbounded labels: a binary target plus noise leaves [-1, 1]",
                    ));
                }
                if let (Hypothesis::Linear { weights }, true) =
                    (target, self.marginal.is_rotationally_symmetric())
                {
                    if norm(weights) + sigma > 1.0 + 1e-12 {
                        return Err(Error::config(
                            "unbounded labels: |f*(x)| + sigma may exceed 1",
                        ));
                    }
                }
            }
        }
        if self.noise.is_classification() && !target.is_binary() {
            return Err(Error::config("classification noise needs a binary target"));
        }
        if let (Marginal::Finite { weights }, Hypothesis::Table { labels }) =
            (&self.marginal, target)
        {
            if labels.len() != weights.len() {
                return Err(Error::config(
                    "target table size differs from the pmf support",
                ));
            }
        }
        Ok(())
    }

    /// Draws one labeled example.
    ///
    /// Realizable labels go through the Massart path with margin 1, so both
    /// consume the generator identically.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> LabeledExample {
        let x = self.marginal.draw(rng);
        let u: f64 = rng.random();
        let t = self.target().predict(&x);
        let y = match &self.noise {
            NoiseModel::BoundedRegression { sigma, .. } => {
                if u < 0.5 {
                    t + sigma
                } else {
                    t - sigma
                }
            }
            _ => {
                let m = self.noise.margin_at(&x);
                if u < (1.0 + m) / 2.0 {
                    t
                } else {
                    -t
                }
            }
        };
        LabeledExample { x, y }
    }
}

/// `n` i.i.d. draws from `spec`, deterministic in `(spec, n, seed)`.
pub fn generate_sample(spec: &DistributionSpec, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::config("sample size must be at least 1"));
    }
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let examples = (0..n).map(|_| spec.draw(&mut rng)).collect();
    Ok(Sample { examples, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Binary,
    Square,
}

impl LossKind {
    pub fn eval(self, prediction: f64, y: f64) -> f64 {
        match self {
            LossKind::Binary => {
                if sign(prediction) == sign(y) {
                    0.0
                } else {
                    1.0
                }
            }
            LossKind::Square => (prediction - y).powi(2),
        }
    }
}

/// A probability or risk together with its Monte Carlo standard error
/// (`None` when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub value: f64,
    pub std_error: Option<f64>,
}

impl RiskValue {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.std_error.is_none()
    }
}

/// Points and weights over which a marginal expectation is taken.
#[derive(Debug, Clone)]
pub struct EvaluationDesign {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub exact: bool,
}

impl EvaluationDesign {
    /// Exact atoms for finite supports, otherwise `m` Monte Carlo points
    /// drawn from `seed`.
    pub fn for_marginal(marginal: &Marginal, m: usize, seed: u64) -> Self {
        if let Some((points, weights)) = marginal.atoms() {
            return Self {
                points,
                weights,
                exact: true,
            };
        }
        let mut rng = rng_from_seed(seed);
        let points: Vec<Vec<f64>> = (0..m).map(|_| marginal.draw(&mut rng)).collect();
        Self {
            weights: vec![1.0 / m as f64; m],
            points,
            exact: false,
        }
    }

    /// Midpoint rule on the circle: `m` equally spaced unit vectors at angles
    /// `2 pi (j + 1/2) / m`. Exact for disagreement masses of homogeneous
    /// halfspaces whose angles lie on the grid `2 pi i / m`.
    pub fn circle(m: usize) -> Self {
        let points = (0..m)
            .map(|j| {
                let a = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        Self {
            points,
            weights: vec![1.0 / m as f64; m],
            exact: true,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weighted mean of `f` over the design with its standard error.
    pub fn mean<F: Fn(&[f64]) -> f64>(&self, f: F) -> RiskValue {
        let vals: Vec<f64> = self.points.iter().map(|p| f(p)).collect();
        let mean: f64 = vals.iter().zip(&self.weights).map(|(v, w)| v * w).sum();
        if self.exact {
            return RiskValue::exact(mean);
        }
        let m = vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
        RiskValue {
            value: mean,
            std_error: Some((var / m).sqrt()),
        }
    }
}

/// `P(f(X) != g(X))` under `marginal`.
pub fn disagreement_mass(f: &Hypothesis, g: &Hypothesis, marginal: &Marginal) -> RiskValue {
    if let Some(v) = closed_form_disagreement(f, g, marginal) {
        return RiskValue::exact(v);
    }
    let design = EvaluationDesign::for_marginal(marginal, DEFAULT_MC_POINTS, EVAL_SEED);
    disagreement_on(f, g, &design)
}

/// Disagreement of two arbitrary predictors over a design.
pub fn disagreement_on<F: Predict + ?Sized, G: Predict + ?Sized>(
    f: &F,
    g: &G,
    design: &EvaluationDesign,
) -> RiskValue {
    design.mean(|x| if f.label(x) != g.label(x) { 1.0 } else { 0.0 })
}

/// Angle between two vectors in `[0, pi]`.
pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let c = dot(a, b) / (norm(a) * norm(b));
    c.clamp(-1.0, 1.0).acos()
}

/// Exact `P(f != g)` when a closed form applies: finite marginals, homogeneous
/// halfspaces under rotational symmetry, and segments on `[-1, 1]`.
pub fn closed_form_disagreement(
    f: &Hypothesis,
    g: &Hypothesis,
    marginal: &Marginal,
) -> Option<f64> {
    if let Some((points, weights)) = marginal.atoms() {
        return Some(
            points
                .iter()
                .zip(&weights)
                .filter(|(x, _)| f.label(x) != g.label(x))
                .map(|(_, w)| w)
                .sum(),
        );
    }
    if let (Some(a), Some(b)) = (f.is_homogeneous_halfspace(), g.is_homogeneous_halfspace()) {
        if marginal.is_rotationally_symmetric() && a.len() == marginal.dim() && b.len() == a.len() {
            return Some(angle_between(a, b) / PI);
        }
    }
    if *marginal == (Marginal::UniformBall { dim: 1 }) {
        let (a, b) = (as_segment(f)?, as_segment(g)?);
        // uniform density 1/2 on [-1, 1]
        return Some((seg_len(a) + seg_len(b) - 2.0 * seg_len(intersect(a, b))) / 2.0);
    }
    None
}

type Segment = Option<(f64, f64)>;

fn as_segment(h: &Hypothesis) -> Option<Segment> {
    match h {
        Hypothesis::Interval { lo, hi } => Some(clip(*lo, *hi)),
        Hypothesis::Constant { label: -1 } => Some(None),
        Hypothesis::Constant { .. } => Some(Some((-1.0, 1.0))),
        Hypothesis::Halfspace { normal, offset } if normal.len() == 1 => {
            // normal * x + offset >= 0
            let t = -offset / normal[0];
            Some(if normal[0] > 0.0 {
                clip(t, 1.0)
            } else {
                clip(-1.0, t)
            })
        }
        _ => None,
    }
}

fn clip(lo: f64, hi: f64) -> Segment {
    let (lo, hi) = (lo.max(-1.0), hi.min(1.0));
    (lo <= hi).then_some((lo, hi))
}

fn seg_len(s: Segment) -> f64 {
    s.map_or(0.0, |(a, b)| b - a)
}

fn intersect(a: Segment, b: Segment) -> Segment {
    match (a, b) {
        (Some((a0, a1)), Some((b0, b1))) => clip(a0.max(b0), a1.min(b1)),
        _ => None,
    }
}

/// `||f - g||_{L2(P)}^2` for real-valued predictors.
pub fn l2_distance_sq(f: &Hypothesis, g: &Hypothesis, marginal: &Marginal) -> RiskValue {
    if let (Hypothesis::Linear { weights: a }, Hypothesis::Linear { weights: b }) = (f, g) {
        if let Some(m2) = marginal.second_moment() {
            if norm(a) <= 1.0 && norm(b) <= 1.0 && a.len() == marginal.dim() {
                let d: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum();
                return RiskValue::exact(d * m2);
            }
        }
    }
    let design = EvaluationDesign::for_marginal(marginal, DEFAULT_MC_POINTS, EVAL_SEED);
    design.mean(|x| (f.predict(x) - g.predict(x)).powi(2))
}

/// Expected loss of `h` given `x`, integrating the two-point label law.
pub fn conditional_loss<P: Predict + ?Sized>(
    h: &P,
    x: &[f64],
    noise: &NoiseModel,
    loss: LossKind,
) -> f64 {
    let p = h.predict(x);
    noise
        .label_law(x)
        .iter()
        .map(|(y, prob)| prob * loss.eval(p, *y))
        .sum()
}

fn check_loss(spec: &DistributionSpec, loss: LossKind) -> Result<()> {
    if loss == LossKind::Binary && !spec.noise.is_classification() {
        return Err(Error::config("binary loss needs classification noise"));
    }
    Ok(())
}

/// `R(h) = E loss(h(X), Y)`.
pub fn true_risk(h: &Hypothesis, spec: &DistributionSpec, loss: LossKind) -> Result<RiskValue> {
    check_loss(spec, loss)?;
    let target = spec.target();
    match (loss, &spec.noise) {
        (LossKind::Binary, noise) if h.is_binary() => {
            if let Some(m) = noise.constant_margin() {
                let d = disagreement_mass(h, target, &spec.marginal);
                return Ok(RiskValue {
                    value: (1.0 - m) / 2.0 + m * d.value,
                    std_error: d.std_error.map(|s| m * s),
                });
            }
        }
        (LossKind::Square, NoiseModel::BoundedRegression { sigma, .. }) => {
            let d = l2_distance_sq(h, target, &spec.marginal);
            return Ok(RiskValue {
                value: d.value + sigma * sigma,
                std_error: d.std_error,
            });
        }
        _ => {}
    }
    let design = EvaluationDesign::for_marginal(&spec.marginal, DEFAULT_MC_POINTS, EVAL_SEED);
    Ok(design.mean(|x| conditional_loss(h, x, &spec.noise, loss)))
}

/// `R(h) - R(f*)`.
///
/// For constant-margin classification this is `margin * P(h != f*)`, and for
/// well-specified regression it is `||h - f*||^2`; both are evaluated in that
/// form so no Monte Carlo noise from the Bayes term enters.
pub fn excess_risk(h: &Hypothesis, spec: &DistributionSpec, loss: LossKind) -> Result<RiskValue> {
    check_loss(spec, loss)?;
    let target = spec.target();
    match (loss, &spec.noise) {
        (LossKind::Binary, noise) if h.is_binary() => {
            if let Some(m) = noise.constant_margin() {
                let d = disagreement_mass(h, target, &spec.marginal);
                return Ok(RiskValue {
                    value: m * d.value,
                    std_error: d.std_error.map(|s| m * s),
                });
            }
        }
        (LossKind::Square, NoiseModel::BoundedRegression { .. }) => {
            return Ok(l2_distance_sq(h, target, &spec.marginal));
        }
        _ => {}
    }
    let design = EvaluationDesign::for_marginal(&spec.marginal, DEFAULT_MC_POINTS, EVAL_SEED);
    Ok(design.mean(|x| {
        conditional_loss(h, x, &spec.noise, loss) - conditional_loss(target, x, &spec.noise, loss)
    }))
}

/// Whether a loss-derived family is the loss class `l(f)` or the excess loss
/// class `l(f) - l(f*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossFamily {
    Loss,
    Excess,
}

/// First moments of one member `g` of a loss family: `Pg`, `P|g|`, `Pg^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossMoments {
    pub mean: f64,
    pub abs_mean: f64,
    pub sq_mean: f64,
}

/// Exact (or design-based) moments of the family member built from `h`.
pub fn loss_moments(
    h: &Hypothesis,
    spec: &DistributionSpec,
    loss: LossKind,
    family: LossFamily,
) -> Result<LossMoments> {
    check_loss(spec, loss)?;
    let target = spec.target();
    if loss == LossKind::Binary && h.is_binary() {
        if let Some(m) = spec.noise.constant_margin() {
            if let Some(d) = closed_form_disagreement(h, target, &spec.marginal) {
                // |g| = 1[h != f*] for the excess family, g = 1[h(X) != Y] otherwise
                return Ok(match family {
                    LossFamily::Excess => LossMoments {
                        mean: m * d,
                        abs_mean: d,
                        sq_mean: d,
                    },
                    LossFamily::Loss => {
                        let r = (1.0 - m) / 2.0 + m * d;
                        LossMoments {
                            mean: r,
                            abs_mean: r,
                            sq_mean: r,
                        }
                    }
                });
            }
        }
    }
    let design = EvaluationDesign::for_marginal(&spec.marginal, DEFAULT_MC_POINTS, EVAL_SEED);
    let mut acc = [0.0; 3];
    for (x, w) in design.points.iter().zip(&design.weights) {
        let ph = h.predict(x);
        let pt = target.predict(x);
        for (y, prob) in spec.noise.label_law(x) {
            let g = match family {
                LossFamily::Loss => loss.eval(ph, y),
                LossFamily::Excess => loss.eval(ph, y) - loss.eval(pt, y),
            };
            acc[0] += w * prob * g;
            acc[1] += w * prob * g.abs();
            acc[2] += w * prob * g * g;
        }
    }
    Ok(LossMoments {
        mean: acc[0],
        abs_mean: acc[1],
        sq_mean: acc[2],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BernsteinKind {
    /// `P|g| <= B (Pg)^beta`
    L1,
    /// `Pg^2 <= B (Pg)^beta`
    L2,
}

/// Values of `Pg` at or below this are treated as zero.
pub const BERNSTEIN_ZERO_MEAN: f64 = 1e-9;
/// A zero-mean member must have `P|g|` (or `Pg^2`) at most this.
pub const BERNSTEIN_ZERO_SPREAD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinEstimate {
    pub kind: BernsteinKind,
    pub beta: f64,
    pub b: f64,
    /// Hypothesis index attaining the binding ratio (`None` if every member
    /// satisfied the condition vacuously).
    pub witness: Option<usize>,
    /// `(beta, smallest B or None if infeasible)` over the requested grid.
    pub grid: Vec<(f64, Option<f64>)>,
}

/// Smallest `B >= 1` per `beta` such that the Bernstein condition holds for
/// every member of the family, and the pair at the largest feasible `beta`.
pub fn estimate_bernstein(
    class: &HypothesisClass,
    spec: &DistributionSpec,
    loss: LossKind,
    family: LossFamily,
    kind: BernsteinKind,
    beta_grid: &[f64],
) -> Result<BernsteinEstimate> {
    let members = class.enumerate()?;
    let moments = members
        .iter()
        .map(|h| loss_moments(h, spec, loss, family))
        .collect::<Result<Vec<_>>>()?;
    bernstein_from_moments(&moments, kind, beta_grid)
}

/// Same as [`estimate_bernstein`] from precomputed member moments.
pub fn bernstein_from_moments(
    moments: &[LossMoments],
    kind: BernsteinKind,
    beta_grid: &[f64],
) -> Result<BernsteinEstimate> {
    if moments.is_empty() {
        return Err(Error::config("Bernstein estimate over an empty class"));
    }
    if beta_grid.is_empty() || beta_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::config("beta grid must be nonempty within [0, 1]"));
    }
    let spread = |m: &LossMoments| match kind {
        BernsteinKind::L1 => m.abs_mean,
        BernsteinKind::L2 => m.sq_mean,
    };
    let mut grid = Vec::with_capacity(beta_grid.len());
    let mut witnesses = Vec::with_capacity(beta_grid.len());
    for &beta in beta_grid {
        let mut best_b = 1.0;
        let mut witness = None;
        let mut feasible = true;
        for (i, m) in moments.iter().enumerate() {
            let s = spread(m);
            let ratio = if m.mean <= BERNSTEIN_ZERO_MEAN {
                if beta == 0.0 {
                    s
                } else if s <= BERNSTEIN_ZERO_SPREAD {
                    continue;
                } else {
                    feasible = false;
                    break;
                }
            } else {
                s / m.mean.powf(beta)
            };
            if ratio > best_b {
                best_b = ratio;
                witness = Some(i);
            }
        }
        grid.push((beta, feasible.then_some(best_b)));
        witnesses.push(witness);
    }
    let pick = grid
        .iter()
        .enumerate()
        .filter(|(_, (_, b))| b.is_some())
        .max_by(|(_, (a, ba)), (_, (b, bb))| {
            a.total_cmp(b).then(bb.unwrap().total_cmp(&ba.unwrap()))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::config("no beta in the grid is feasible"))?;
    Ok(BernsteinEstimate {
        kind,
        beta: grid[pick].0,
        b: grid[pick].1.unwrap(),
        witness: witnesses[pick],
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn finite_spec(weights: Vec<f64>, target: Vec<i8>, margin: f64) -> DistributionSpec {
        DistributionSpec::massart(
            Marginal::Finite { weights },
            Hypothesis::Table { labels: target },
            margin,
        )
        .unwrap()
    }

    #[test]
    fn realizable_labels_follow_target() {
        let spec = DistributionSpec::realizable(
            Marginal::UniformBall { dim: 2 },
            Hypothesis::halfspace(vec![1.0, -0.5], 0.1),
        )
        .unwrap();
        let s = generate_sample(&spec, 10, 1).unwrap();
        assert_eq!(s.len(), 10);
        for e in &s.examples {
            assert_eq!(e.y, spec.target().predict(&e.x));
        }
    }

    #[test]
    fn massart_one_matches_realizable_bit_for_bit() {
        let target = Hypothesis::planar(0.3);
        let m = Marginal::UniformSphere { dim: 2 };
        let a = DistributionSpec::realizable(m.clone(), target.clone()).unwrap();
        let b = DistributionSpec::massart(m, target, 1.0).unwrap();
        for seed in 0..5 {
            assert_eq!(
                generate_sample(&a, 10, seed).unwrap(),
                generate_sample(&b, 10, seed).unwrap()
            );
        }
    }

    #[test]
    fn massart_flip_rate() {
        let spec = DistributionSpec::massart(
            Marginal::UniformBall { dim: 3 },
            Hypothesis::halfspace(vec![0.0, 0.0, 1.0], 0.0),
            0.4,
        )
        .unwrap();
        let s = generate_sample(&spec, 100_000, 11).unwrap();
        let flips = s
            .examples
            .iter()
            .filter(|e| e.y != spec.target().predict(&e.x))
            .count();
        let rate = flips as f64 / 1e5;
        assert!((rate - 0.3).abs() <= 0.01, "flip rate {rate}");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let t = Hypothesis::planar(0.0);
        for margin in [0.0, -0.1, 1.5] {
            assert!(matches!(
                DistributionSpec::massart(Marginal::UniformBall { dim: 2 }, t.clone(), margin),
                Err(Error::Config(_))
            ));
        }
        assert!(
            DistributionSpec::realizable(Marginal::Finite { weights: vec![] }, t.clone()).is_err()
        );
        assert!(DistributionSpec::realizable(
            Marginal::Finite {
                weights: vec![0.5, 0.4]
            },
            t
        )
        .is_err());
        let zero = Hypothesis::halfspace(vec![0.0, 0.0], 0.0);
        assert!(DistributionSpec::realizable(Marginal::UniformBall { dim: 2 }, zero).is_err());
        assert!(generate_sample(
            &DistributionSpec::realizable(
                Marginal::UniformBall { dim: 2 },
                Hypothesis::planar(0.0)
            )
            .unwrap(),
            0,
            1
        )
        .is_err());
    }

    #[test]
    fn risk_closed_forms() {
        let sphere = Marginal::UniformSphere { dim: 2 };
        let target = Hypothesis::planar(0.0);
        let real = DistributionSpec::realizable(sphere.clone(), target.clone()).unwrap();
        assert_eq!(
            true_risk(&target, &real, LossKind::Binary).unwrap().value,
            0.0
        );

        let noisy = DistributionSpec::massart(sphere.clone(), target.clone(), 0.4).unwrap();
        assert_abs_diff_eq!(
            true_risk(&target, &noisy, LossKind::Binary).unwrap().value,
            0.3,
            epsilon = 1e-15
        );

        for theta in [0.1, 0.7, 1.3, 2.9] {
            let r = true_risk(&Hypothesis::planar(theta), &real, LossKind::Binary).unwrap();
            assert!(r.is_exact());
            assert_abs_diff_eq!(r.value, theta / PI, epsilon = 1e-12);
        }
    }

    #[test]
    fn disagreement_examples() {
        let sphere = Marginal::UniformSphere { dim: 2 };
        let f = Hypothesis::planar(0.4);
        assert_eq!(disagreement_mass(&f, &f, &sphere).value, 0.0);
        let d = disagreement_mass(
            &Hypothesis::planar(0.0),
            &Hypothesis::planar(PI / 2.0),
            &sphere,
        );
        assert_abs_diff_eq!(d.value, 0.5, epsilon = 1e-12);

        let m = Marginal::Finite {
            weights: vec![0.25, 0.75],
        };
        let f = Hypothesis::Table { labels: vec![1, 1] };
        let g = Hypothesis::Table {
            labels: vec![1, -1],
        };
        assert_eq!(disagreement_mass(&f, &g, &m).value, 0.75);
    }

    #[test]
    fn interval_disagreement_matches_monte_carlo() {
        let line = Marginal::UniformBall { dim: 1 };
        let f = Hypothesis::Interval { lo: -0.3, hi: 0.4 };
        let g = Hypothesis::Interval { lo: -0.1, hi: 0.9 };
        let exact = disagreement_mass(&f, &g, &line);
        assert!(exact.is_exact());
        assert_abs_diff_eq!(exact.value, (0.2 + 0.5) / 2.0, epsilon = 1e-12);
        let mc = disagreement_on(&f, &g, &EvaluationDesign::for_marginal(&line, 200_000, 3));
        assert!((mc.value - exact.value).abs() < 5.0 * mc.std_error.unwrap());
        let empty = Hypothesis::Constant { label: -1 };
        assert_abs_diff_eq!(
            disagreement_mass(&f, &empty, &line).value,
            0.35,
            epsilon = 1e-12
        );
    }

    #[test]
    fn excess_risk_examples() {
        let sphere = Marginal::UniformSphere { dim: 2 };
        let target = Hypothesis::planar(0.0);
        let spec = DistributionSpec::massart(sphere, target.clone(), 0.5).unwrap();
        assert_eq!(
            excess_risk(&target, &spec, LossKind::Binary).unwrap().value,
            0.0
        );
        // disagreement 0.2 <=> angle 0.2 pi
        let h = Hypothesis::planar(0.2 * PI);
        assert_abs_diff_eq!(
            excess_risk(&h, &spec, LossKind::Binary).unwrap().value,
            0.1,
            epsilon = 1e-12
        );

        // ||f - f*||^2 = 0.04 under the sphere with E x1^2 = 1/2: |dw|^2 = 0.08
        let reg = DistributionSpec::new(
            Marginal::UniformSphere { dim: 2 },
            NoiseModel::BoundedRegression {
                target: Hypothesis::Linear {
                    weights: vec![0.3, 0.0],
                },
                sigma: 0.2,
            },
        )
        .unwrap();
        let f = Hypothesis::Linear {
            weights: vec![0.3, 0.08f64.sqrt()],
        };
        assert_abs_diff_eq!(
            excess_risk(&f, &reg, LossKind::Square).unwrap().value,
            0.04,
            epsilon = 1e-12
        );
        let r = true_risk(&f, &reg, LossKind::Square).unwrap().value;
        assert_abs_diff_eq!(r, 0.04 + 0.04, epsilon = 1e-12);
    }

    #[test]
    fn regression_excess_matches_direct_integration() {
        let spec = DistributionSpec::new(
            Marginal::Finite {
                weights: vec![0.2, 0.3, 0.5],
            },
            NoiseModel::BoundedRegression {
                target: Hypothesis::Table {
                    labels: vec![1, -1, 1],
                },
                sigma: 0.0,
            },
        );
        let spec = spec.unwrap();
        let h = Hypothesis::Table {
            labels: vec![1, 1, -1],
        };
        let excess = excess_risk(&h, &spec, LossKind::Square).unwrap().value;
        assert_abs_diff_eq!(excess, 0.3 * 4.0 + 0.5 * 4.0, epsilon = 1e-12);
    }

    #[test]
    fn massart_sandwich_is_exact_on_finite_support() {
        let spec = finite_spec(vec![0.1, 0.2, 0.3, 0.4], vec![1, -1, 1, 1], 0.35);
        let class = HypothesisClass::Finite {
            members: vec![
                vec![1, -1, 1, 1],
                vec![-1, -1, 1, 1],
                vec![1, 1, -1, 1],
                vec![-1, 1, -1, -1],
            ],
        };
        for h in class.enumerate().unwrap() {
            let m = loss_moments(&h, &spec, LossKind::Binary, LossFamily::Excess).unwrap();
            assert_abs_diff_eq!(0.35 * m.abs_mean, m.mean, epsilon = 1e-9);
            assert!(excess_risk(&h, &spec, LossKind::Binary).unwrap().value >= 0.0);
            // |l_f - l_g| = 1[f != g] for +-1 labels
            let d = disagreement_mass(&h, spec.target(), &spec.marginal).value;
            assert_abs_diff_eq!(m.abs_mean, d, epsilon = 1e-12);
        }
    }

    #[test]
    fn bernstein_examples() {
        let spec = finite_spec(vec![0.1, 0.2, 0.3, 0.4], vec![1, -1, 1, 1], 0.25);
        let class = HypothesisClass::Finite {
            members: vec![vec![1, -1, 1, 1], vec![-1, -1, 1, 1], vec![1, 1, -1, 1]],
        };
        let grid = [0.0, 0.5, 1.0];
        let est = estimate_bernstein(
            &class,
            &spec,
            LossKind::Binary,
            LossFamily::Excess,
            BernsteinKind::L1,
            &grid,
        )
        .unwrap();
        assert_eq!(est.beta, 1.0);
        assert_abs_diff_eq!(est.b, 4.0, epsilon = 1e-9);

        let real = finite_spec(vec![0.1, 0.2, 0.3, 0.4], vec![1, -1, 1, 1], 1.0);
        let est = estimate_bernstein(
            &class,
            &real,
            LossKind::Binary,
            LossFamily::Loss,
            BernsteinKind::L1,
            &grid,
        )
        .unwrap();
        assert_eq!((est.beta, est.b), (1.0, 1.0));

        let single = HypothesisClass::Finite {
            members: vec![vec![1, -1, 1, 1]],
        };
        let est = estimate_bernstein(
            &single,
            &spec,
            LossKind::Binary,
            LossFamily::Excess,
            BernsteinKind::L1,
            &grid,
        )
        .unwrap();
        assert_eq!((est.beta, est.b, est.witness), (1.0, 1.0, None));

        let empty = HypothesisClass::Finite { members: vec![] };
        assert!(estimate_bernstein(
            &empty,
            &spec,
            LossKind::Binary,
            LossFamily::Excess,
            BernsteinKind::L1,
            &grid
        )
        .is_err());
    }

    #[test]
    fn zero_mean_with_spread_caps_beta() {
        let moments = [
            LossMoments {
                mean: 0.0,
                abs_mean: 0.1,
                sq_mean: 0.1,
            },
            LossMoments {
                mean: 0.2,
                abs_mean: 0.2,
                sq_mean: 0.2,
            },
        ];
        let est = bernstein_from_moments(&moments, BernsteinKind::L1, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(est.beta, 0.0);
        assert_eq!(est.grid[1].1, None);
    }

    #[test]
    fn enumeration_rules() {
        let c = HypothesisClass::HomogeneousHalfspaces {
            dim: 2,
            resolution: 720,
        };
        assert_eq!(c.enumerate().unwrap().len(), 720);
        let dup = HypothesisClass::Finite {
            members: vec![vec![1, -1], vec![1, -1]],
        };
        assert!(dup.enumerate().is_err());
        let big = HypothesisClass::RegressionGrid {
            dim: 3,
            levels: 30,
            scale: 0.5,
        };
        match big.enumerate() {
            Err(Error::Config(msg)) => assert!(msg.contains("27000")),
            other => panic!("unexpected {other:?}"),
        }
        let iv = HypothesisClass::Intervals { resolution: 5 };
        assert_eq!(iv.enumerate().unwrap().len(), 16);
        assert!(HypothesisClass::Rectangles { dim: 2 }.enumerate().is_err());
    }

    #[test]
    fn function_consistency_check() {
        let a = LabeledExample::new(vec![0.5], 1.0);
        let b = LabeledExample::new(vec![0.5], -1.0);
        assert!(check_function_consistent(&[a.clone(), b]).is_err());
        assert!(check_function_consistent(&[a.clone(), a]).is_ok());
    }
}
