use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::Solver;
use crate::domain::{
    loss_moments, DistributionSpec, EvaluationDesign, Hypothesis, HypothesisClass, LossFamily,
    LossKind, LossMoments, Marginal, Predict, DEFAULT_MC_POINTS,
};
use crate::error::{Error, Result};

/// Distances are compared with this slack so grid-aligned radii are inclusive.
pub(crate) const DIST_SLACK: f64 = 1e-12;

/// Largest cloud whose full distance matrix is cached.
const DISTANCE_CACHE_CAP: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn exponent(self) -> u32 {
        match self {
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudMode {
    /// Vectors hold `loss(h(x), y)`.
    LossClass,
    /// Vectors hold `loss(h(x), y) - loss(f*(x), y)`.
    ExcessLossClass,
    /// Vectors hold the predictions `h(x)` on the marginal.
    RawClass,
}

/// Where a cloud came from, kept so learners can map members back to
/// hypotheses and exact risks.
#[derive(Debug, Clone)]
pub struct CloudSource {
    pub hypotheses: Vec<Hypothesis>,
    pub spec: DistributionSpec,
    pub loss: LossKind,
    pub mode: CloudMode,
    moments: Arc<OnceLock<Vec<LossMoments>>>,
}

impl CloudSource {
    /// Exact `(Pg, P|g|, Pg^2)` for every member, with `g` taken from the
    /// excess-loss family for excess and raw clouds and from the loss family
    /// otherwise. Computed on first use.
    pub fn moments(&self) -> Result<&[LossMoments]> {
        if let Some(m) = self.moments.get() {
            return Ok(m);
        }
        let family = match self.mode {
            CloudMode::LossClass => LossFamily::Loss,
            _ => LossFamily::Excess,
        };
        let m = self
            .hypotheses
            .iter()
            .map(|h| loss_moments(h, &self.spec, self.loss, family))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.moments.get_or_init(|| m))
    }
}

/// Finite representation of a class in `L_r(P)`: one vector per member,
/// entries at weighted evaluation points.
#[derive(Debug, Clone)]
pub struct MetricCloud {
    vectors: Vec<Vec<f64>>,
    weights: Vec<f64>,
    norm: Norm,
    labels: Vec<String>,
    source: Option<CloudSource>,
    distances: Arc<OnceLock<Vec<f64>>>,
    local_counts: Arc<Mutex<HashMap<LocalKey, (usize, Solver)>>>,
}

/// `(gamma, radius, bracketing)`, floats by bit pattern.
type LocalKey = (u64, u64, bool);

impl MetricCloud {
    pub fn new(vectors: Vec<Vec<f64>>, weights: Vec<f64>, norm: Norm) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::config("metric cloud needs at least one vector"));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != weights.len()) {
            return Err(Error::config(format!(
                "cloud vector has {} entries but there are {} weights",
                v.len(),
                weights.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0))
            || (total - 1.0).abs() > 1e-12 * weights.len().max(1) as f64
        {
            return Err(Error::config(format!(
                "cloud weights must be nonnegative and sum to 1, got {total}"
            )));
        }
        let labels = (0..vectors.len()).map(|i| format!("h{i}")).collect();
        Ok(Self {
            vectors,
            weights,
            norm,
            labels,
            source: None,
            distances: Arc::default(),
            local_counts: Arc::default(),
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.vectors.len() {
            return Err(Error::config("one label per cloud vector is required"));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn source(&self) -> Option<&CloudSource> {
        self.source.as_ref()
    }

    /// `||u - v||_{L_r(P)}` for arbitrary vectors on the cloud's points.
    pub fn norm_of_difference(&self, u: &[f64], v: &[f64]) -> f64 {
        let w = &self.weights;
        match self.norm {
            Norm::L1 => u
                .iter()
                .zip(v)
                .zip(w)
                .map(|((a, b), w)| w * (a - b).abs())
                .sum(),
            Norm::L2 => u
                .iter()
                .zip(v)
                .zip(w)
                .map(|((a, b), w)| w * (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let n = self.len();
        if n <= DISTANCE_CACHE_CAP {
            let d = self.distances.get_or_init(|| {
                let mut d = vec![0.0; n * n];
                for a in 0..n {
                    for b in a + 1..n {
                        let v = self.norm_of_difference(&self.vectors[a], &self.vectors[b]);
                        d[a * n + b] = v;
                        d[b * n + a] = v;
                    }
                }
                d
            });
            d[i * n + j]
        } else {
            self.norm_of_difference(&self.vectors[i], &self.vectors[j])
        }
    }

    /// Memoized largest local cover count; the vectors never change after
    /// construction, so counts stay valid for the cloud's lifetime.
    pub(crate) fn local_count(
        &self,
        gamma: f64,
        radius: f64,
        bracketing: bool,
        compute: impl FnOnce() -> Result<(usize, Solver)>,
    ) -> Result<(usize, Solver)> {
        let key = (gamma.to_bits(), radius.to_bits(), bracketing);
        if let Some(&hit) = self.local_counts.lock().expect("cache lock").get(&key) {
            return Ok(hit);
        }
        let value = compute()?;
        self.local_counts
            .lock()
            .expect("cache lock")
            .insert(key, value);
        Ok(value)
    }

    /// `distance(i, j) <= radius`, with a small absolute slack.
    pub fn within(&self, i: usize, j: usize, radius: f64) -> bool {
        self.distance(i, j) <= radius + DIST_SLACK
    }

    /// Indices of members within `radius` of member `center`.
    pub fn ball(&self, center: usize, radius: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.within(center, j, radius))
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.distance(i, j))
            .fold(0.0, f64::max)
    }

    /// The cloud restricted to `indices` (same points and weights).
    pub fn subcloud(&self, indices: &[usize]) -> MetricCloud {
        let source = self.source.as_ref().map(|s| CloudSource {
            hypotheses: indices.iter().map(|&i| s.hypotheses[i].clone()).collect(),
            spec: s.spec.clone(),
            loss: s.loss,
            mode: s.mode,
            moments: Arc::default(),
        });
        MetricCloud {
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
            weights: self.weights.clone(),
            norm: self.norm,
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            source,
            distances: Arc::default(),
            local_counts: Arc::default(),
        }
    }
}

/// Builds the metric cloud of `class` under `spec`.
///
/// Loss and excess clouds evaluate on the joint law of `(X, Y)`: each marginal
/// point carries one atom per label value with weight `w(x) p(y | x)` (atoms of
/// zero weight are dropped). Raw clouds evaluate predictions on the marginal.
/// Finite marginals use their atoms; planar homogeneous halfspaces under a
/// rotationally symmetric marginal use the exact circle midpoint design with
/// `m` rounded up to a multiple of `lcm(resolution, 4)`; everything else uses
/// `m` Monte Carlo points drawn from `seed`.
pub fn build_cloud(
    class: &HypothesisClass,
    spec: &DistributionSpec,
    loss: LossKind,
    m: usize,
    seed: u64,
    mode: CloudMode,
) -> Result<MetricCloud> {
    spec.validate()?;
    if m == 0 {
        return Err(Error::config("cloud needs at least one evaluation point"));
    }
    if loss == LossKind::Binary && !spec.noise.is_classification() {
        return Err(Error::config("binary loss needs classification noise"));
    }
    let hypotheses = class.enumerate()?;
    if let Some(d) = class.dim() {
        if d != spec.marginal.dim() {
            return Err(Error::config(format!(
                "class dimension {d} does not match marginal dimension {}",
                spec.marginal.dim()
            )));
        }
    }
    let design = match class {
        HypothesisClass::HomogeneousHalfspaces { dim: 2, resolution }
            if spec.marginal.is_rotationally_symmetric()
                && !matches!(spec.marginal, Marginal::Finite { .. }) =>
        {
            let step = lcm(*resolution, 4);
            EvaluationDesign::circle(m.div_ceil(step) * step)
        }
        _ => EvaluationDesign::for_marginal(&spec.marginal, m, seed),
    };

    let target = spec.target();
    let mut weights = Vec::new();
    let mut atoms: Vec<(usize, f64)> = Vec::new();
    for (xi, (x, w)) in design.points.iter().zip(&design.weights).enumerate() {
        if mode == CloudMode::RawClass {
            if *w > 0.0 {
                weights.push(*w);
                atoms.push((xi, 0.0));
            }
            continue;
        }
        for (y, p) in spec.noise.label_law(x) {
            if w * p > 0.0 {
                weights.push(w * p);
                atoms.push((xi, y));
            }
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }

    let target_preds: Vec<f64> = design.points.iter().map(|x| target.predict(x)).collect();
    let vectors: Vec<Vec<f64>> = hypotheses
        .iter()
        .map(|h| {
            let preds: Vec<f64> = design.points.iter().map(|x| h.predict(x)).collect();
            atoms
                .iter()
                .map(|&(xi, y)| match mode {
                    CloudMode::RawClass => preds[xi],
                    CloudMode::LossClass => loss.eval(preds[xi], y),
                    CloudMode::ExcessLossClass => {
                        loss.eval(preds[xi], y) - loss.eval(target_preds[xi], y)
                    }
                })
                .collect()
        })
        .collect();
    let norm = match loss {
        LossKind::Binary => Norm::L1,
        LossKind::Square => Norm::L2,
    };
    let mut cloud = MetricCloud::new(vectors, weights, norm)?;
    cloud.source = Some(CloudSource {
        hypotheses,
        spec: spec.clone(),
        loss,
        mode,
        moments: Arc::default(),
    });
    Ok(cloud)
}

/// Default Monte Carlo size for clouds, kept below the risk-evaluation size
/// because distance matrices are quadratic in the member count.
pub const DEFAULT_CLOUD_POINTS: usize = DEFAULT_MC_POINTS / 50;

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::disagreement_mass;
    use rand::{Rng, SeedableRng};

    fn finite_spec() -> DistributionSpec {
        DistributionSpec::realizable(
            Marginal::Finite {
                weights: vec![0.25, 0.75],
            },
            Hypothesis::Table { labels: vec![1, 1] },
        )
        .unwrap()
    }

    fn finite_class() -> HypothesisClass {
        HypothesisClass::Finite {
            members: vec![vec![1, 1], vec![1, -1], vec![-1, -1]],
        }
    }

    #[test]
    fn finite_support_cloud_is_exact() {
        let c = build_cloud(
            &finite_class(),
            &finite_spec(),
            LossKind::Binary,
            10,
            0,
            CloudMode::LossClass,
        )
        .unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.weights(), &[0.25, 0.75]);
        assert!(c.vectors().iter().all(|v| v.len() == 2));
        assert_eq!(c.vector(1), &[0.0, 1.0]);
    }

    #[test]
    fn excess_cloud_has_zero_vector_at_target() {
        let spec = DistributionSpec::massart(
            Marginal::Finite {
                weights: vec![0.25, 0.75],
            },
            Hypothesis::Table { labels: vec![1, 1] },
            0.4,
        )
        .unwrap();
        let c = build_cloud(
            &finite_class(),
            &spec,
            LossKind::Binary,
            10,
            0,
            CloudMode::ExcessLossClass,
        )
        .unwrap();
        assert_eq!(c.weights().len(), 4);
        assert!(c.vector(0).iter().all(|&v| v == 0.0));
        // the excess mean equals margin times disagreement
        let mean: f64 = c
            .vector(1)
            .iter()
            .zip(c.weights())
            .map(|(v, w)| v * w)
            .sum();
        assert!((mean - 0.4 * 0.75).abs() < 1e-12);
        let moments = c.source().unwrap().moments().unwrap();
        assert!((moments[1].mean - mean).abs() < 1e-12);
    }

    #[test]
    fn loss_distances_are_half_raw_distances() {
        let spec = DistributionSpec::massart(
            Marginal::UniformBall { dim: 2 },
            Hypothesis::halfspace(vec![0.0, 1.0], 0.1),
            0.6,
        )
        .unwrap();
        let class = HypothesisClass::Finite { members: vec![] };
        assert!(build_cloud(&class, &spec, LossKind::Binary, 10, 0, CloudMode::LossClass).is_err());
        let class = HypothesisClass::Intervals { resolution: 4 };
        assert!(build_cloud(&class, &spec, LossKind::Binary, 10, 0, CloudMode::LossClass).is_err());

        let spec = DistributionSpec::massart(
            Marginal::UniformBall { dim: 1 },
            Hypothesis::Interval { lo: -0.2, hi: 0.5 },
            0.6,
        )
        .unwrap();
        let loss = build_cloud(
            &class,
            &spec,
            LossKind::Binary,
            500,
            3,
            CloudMode::LossClass,
        )
        .unwrap();
        let raw =
            build_cloud(&class, &spec, LossKind::Binary, 500, 3, CloudMode::RawClass).unwrap();
        for i in 0..loss.len() {
            for j in 0..loss.len() {
                assert!((loss.distance(i, j) - raw.distance(i, j) / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn circle_design_distances_are_exact() {
        let spec = DistributionSpec::realizable(
            Marginal::UniformSphere { dim: 2 },
            Hypothesis::planar(0.0),
        )
        .unwrap();
        let class = HypothesisClass::HomogeneousHalfspaces {
            dim: 2,
            resolution: 36,
        };
        let c = build_cloud(&class, &spec, LossKind::Binary, 50, 0, CloudMode::LossClass).unwrap();
        assert_eq!(c.weights().len(), 72);
        let hs = &c.source().unwrap().hypotheses;
        for i in 0..c.len() {
            for j in 0..c.len() {
                let exact = disagreement_mass(&hs[i], &hs[j], &spec.marginal).value;
                assert!((c.distance(i, j) - exact).abs() < 1e-12, "{i} {j}");
            }
        }
        assert!((c.diameter() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_inequality_on_random_triples() {
        let spec = DistributionSpec::new(
            Marginal::UniformBall { dim: 1 },
            crate::domain::NoiseModel::BoundedRegression {
                target: Hypothesis::Linear { weights: vec![0.5] },
                sigma: 0.2,
            },
        )
        .unwrap();
        let class = HypothesisClass::RegressionGrid {
            dim: 1,
            levels: 9,
            scale: 0.8,
        };
        let c = build_cloud(
            &class,
            &spec,
            LossKind::Square,
            300,
            1,
            CloudMode::LossClass,
        )
        .unwrap();
        assert_eq!(c.norm(), Norm::L2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (a, b, d) = (
                rng.random_range(0..c.len()),
                rng.random_range(0..c.len()),
                rng.random_range(0..c.len()),
            );
            assert!(c.distance(a, d) <= c.distance(a, b) + c.distance(b, d) + 1e-12);
            assert_eq!(c.distance(a, a), 0.0);
        }
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(MetricCloud::new(vec![vec![0.0, 1.0]], vec![0.5, 0.6], Norm::L1).is_err());
        assert!(MetricCloud::new(vec![vec![0.0]], vec![0.5, 0.5], Norm::L1).is_err());
        assert!(MetricCloud::new(vec![], vec![1.0], Norm::L1).is_err());
    }
}
