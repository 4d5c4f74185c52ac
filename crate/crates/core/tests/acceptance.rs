//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each, and
//! exits nonzero if any failed. Built without the libtest harness so the
//! lines always reach the terminal.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rand::Rng;
use riskbounds::compression::{
    audit, binomial, count_psi, CompressionScheme, IntervalScheme, OnlineToBatch, RectangleScheme,
};
use riskbounds::domain::{
    generate_sample, rng_from_seed, DistributionSpec, Hypothesis, HypothesisClass, LabeledExample,
    LossKind, Marginal, Sample,
};
use riskbounds::entropy::{
    build_cloud, covering_number, lemma_chain, local_entropy_profile, CloudMode, MetricCloud, Norm,
    Solver,
};
use riskbounds::harness::{
    adversarial_family_eval, floyd_warmuth, polynomial_bound, rate_fit, run_trials, verify_bound,
    BoundId, Learner, NetErmConfig, RiskTable, Statistic,
};
use riskbounds::skeleton::aggregation_decomposition;
use riskbounds::svm::SvmScheme;

// Pinned tolerances.
const SVM_N: usize = 99;
const SVM_TRIALS: usize = 2000;
const SVM_EXPECTATION: f64 = 0.03;
const INTERVAL_N: usize = 200;
const INTERVAL_TRIALS: usize = 5000;
const DELTA: f64 = 0.05;
const DEVIATION_BOUND: f64 = 0.0814;
const PSI_MAX_POINTS: usize = 8;
const AUDIT_SAMPLES: u64 = 200;
const FORMULA_TOL: f64 = 5e-4;
const FLOYD_WARMUTH_VALUE: f64 = 0.2322;
const POLYNOMIAL_VALUE: f64 = 0.0646;
const RANDOM_CLOUDS: u64 = 50;
const GREEDY_FACTOR: f64 = 1.0;
const DLOC_RATIO: f64 = 2.0;
const DLOC_EPS: [f64; 4] = [0.05, 0.1, 0.2, 0.4];
const RATE_GRID: [usize; 5] = [100, 200, 400, 800, 1600];
const RATE_TRIALS: usize = 1000;
// Greedy net spacing is rounded to the class grid; 2880 directions keep it
// close to the ideal halving across the rate grid.
const NET_RESOLUTION: usize = 2880;
const SLOPE_RANGE: (f64, f64) = (-1.15, -0.85);
const AGGREGATION_TRIALS: usize = 200;
const ADVERSARIAL_PACKING: usize = 8;
const ADVERSARIAL_TRIALS: usize = 200;
const ADVERSARIAL_CONSTANT: f64 = 10.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn halfspace_spec() -> DistributionSpec {
    DistributionSpec::realizable(
        Marginal::UniformBall { dim: 2 },
        Hypothesis::halfspace(vec![0.6, -0.8], 0.1),
    )
    .unwrap()
}

fn interval_spec() -> DistributionSpec {
    DistributionSpec::realizable(
        Marginal::UniformBall { dim: 1 },
        Hypothesis::Interval { lo: -0.3, hi: 0.4 },
    )
    .unwrap()
}

fn planar_class() -> HypothesisClass {
    HypothesisClass::HomogeneousHalfspaces {
        dim: 2,
        resolution: 720,
    }
}

fn expectation_bound() -> Outcome {
    let t = run_trials(
        &Learner::Scheme(Arc::new(SvmScheme { dim: 2 })),
        &halfspace_spec(),
        &[SVM_N],
        SVM_TRIALS,
        1,
    )
    .map_err(|e| e.to_string())?;
    let r = verify_bound(&t, &BoundId::KOverNPlus1 { k: 3 }, DELTA).map_err(|e| e.to_string())?;
    let row = &r.rows[0];
    let stat = row.mean + 3.0 * row.std_error;
    check(
        row.failed == 0 && stat <= SVM_EXPECTATION,
        format!(
            "SVM n={SVM_N}: mean {:.5} + 3 SE = {stat:.5} <= {SVM_EXPECTATION} ({} failed)",
            row.mean, row.failed
        ),
    )
}

fn deviation_bound() -> Outcome {
    let t = run_trials(
        &Learner::Scheme(Arc::new(IntervalScheme)),
        &interval_spec(),
        &[INTERVAL_N],
        INTERVAL_TRIALS,
        2,
    )
    .map_err(|e| e.to_string())?;
    let r = verify_bound(&t, &BoundId::DeviationKLog { k: 2 }, DELTA).map_err(|e| e.to_string())?;
    let row = &r.rows[0];
    check(
        row.quantile <= row.bound && (row.bound - DEVIATION_BOUND).abs() <= FORMULA_TOL,
        format!(
            "interval n={INTERVAL_N}: 95% quantile {:.5} <= e*2*ln(20)/200 = {:.5}",
            row.quantile, row.bound
        ),
    )
}

/// Every labeling of `points` whose positives' closure contains no negative.
fn realizable_labelings(
    points: &[Vec<f64>],
    scheme: &dyn CompressionScheme,
) -> Vec<Vec<LabeledExample>> {
    let m = points.len();
    (0u32..1 << m)
        .map(|mask| {
            points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    LabeledExample::new(p.clone(), if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                })
                .collect::<Vec<_>>()
        })
        .filter(|s| scheme.learn(s).is_ok())
        .collect()
}

fn psi_counting() -> Outcome {
    let mut instances = 0;
    let mut violations = Vec::new();
    let mut max_seen = [0usize; 3];
    let mut run = |scheme: &dyn CompressionScheme, points: &[Vec<f64>]| {
        let k = scheme.size_bound();
        for s in realizable_labelings(points, scheme) {
            for (p, seen) in (1..=3usize).zip(max_seen.iter_mut()) {
                if s.len() <= p {
                    continue;
                }
                let psi = count_psi(scheme, &s, p).expect("psi count");
                instances += 1;
                *seen = (*seen).max(psi.value);
                if psi.value > k.pow(p as u32) || psi.value > binomial(k + p, p) {
                    violations.push(format!(
                        "{} p={p} psi={} on {:?}",
                        scheme.id(),
                        psi.value,
                        s
                    ));
                }
            }
        }
    };
    for m in 2..=PSI_MAX_POINTS {
        let line: Vec<Vec<f64>> = (0..m).map(|i| vec![i as f64 / m as f64]).collect();
        run(&IntervalScheme, &line);
    }
    let mut rng = rng_from_seed(33);
    let rect = RectangleScheme { dim: 2 };
    for m in 2..=PSI_MAX_POINTS {
        for _ in 0..4 {
            let pts: Vec<Vec<f64>> = (0..m)
                .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
                .collect();
            run(&rect, &pts);
        }
        // grid with shared coordinates, where extremes tie
        let grid: Vec<Vec<f64>> = (0..m)
            .map(|i| vec![(i % 3) as f64, (i / 3) as f64])
            .collect();
        run(&rect, &grid);
    }
    check(
        violations.is_empty(),
        format!(
            "{instances} exhaustive counts, max psi for p=1,2,3: {:?}, violations: {}",
            max_seen,
            violations.first().cloned().unwrap_or_else(|| "none".into())
        ),
    )
}

fn samples(spec: &DistributionSpec, offset: u64) -> Vec<Sample> {
    (0..AUDIT_SAMPLES)
        .map(|s| generate_sample(spec, 4 + (s as usize % 17), offset + s).unwrap())
        .collect()
}

fn scheme_audits() -> Outcome {
    let rect_spec = DistributionSpec::realizable(
        Marginal::UniformBall { dim: 2 },
        Hypothesis::Rectangle {
            lo: vec![-0.5, -0.3],
            hi: vec![0.4, 0.6],
        },
    )
    .unwrap();
    let iv = audit(&IntervalScheme, &samples(&interval_spec(), 0));
    let rc = audit(&RectangleScheme { dim: 2 }, &samples(&rect_spec, 1000));
    let sv = audit(&SvmScheme { dim: 2 }, &samples(&halfspace_spec(), 2000));

    let mut rng = rng_from_seed(16);
    let mut tables: Vec<Vec<i8>> = Vec::new();
    while tables.len() < 16 {
        let t: Vec<i8> = (0..8)
            .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
            .collect();
        if !tables.contains(&t) {
            tables.push(t);
        }
    }
    let class: Vec<Hypothesis> = tables
        .into_iter()
        .map(|labels| Hypothesis::Table { labels })
        .collect();
    let halving = OnlineToBatch::halving(class.clone());
    let hv_samples: Vec<Sample> = (0..AUDIT_SAMPLES)
        .map(|s| {
            let spec = DistributionSpec::realizable(
                Marginal::Finite {
                    weights: vec![0.125; 8],
                },
                class[(s % 16) as usize].clone(),
            )
            .unwrap();
            generate_sample(&spec, 4 + (s as usize % 17), 3000 + s).unwrap()
        })
        .collect();
    let hv = audit(&halving, &hv_samples);

    let closure_ok = [&iv, &rc]
        .iter()
        .all(|a| a.valid && a.permutation_invariant && a.stable && a.homogeneous);
    let implication = [&iv, &rc, &sv, &hv]
        .iter()
        .all(|a| !a.homogeneous || a.stable);
    check(
        closure_ok && sv.valid && sv.permutation_invariant && sv.stable && hv.valid && hv.stable && hv.max_compression_size <= 4 && implication,
        format!(
            "intervals stable={} homogeneous={}; rectangles stable={} homogeneous={}; svm stable={} (homogeneous={}, reported); halving stable={} max size {}",
            iv.stable, iv.homogeneous, rc.stable, rc.homogeneous, sv.stable, sv.homogeneous, hv.stable, hv.max_compression_size
        ),
    )
}

fn formulas() -> Outcome {
    let fw = floyd_warmuth(5, 105, 0.05);
    let pol = polynomial_bound(3, 300, 0.1);
    check(
        (fw - FLOYD_WARMUTH_VALUE).abs() <= FORMULA_TOL && (pol - POLYNOMIAL_VALUE).abs() <= FORMULA_TOL,
        format!("Floyd-Warmuth(5, 105, 0.05) = {fw:.5}; k^2/(n delta^(1/k)) at (3, 300, 0.1) = {pol:.5}"),
    )
}

/// Minimal proper cover by trying every center subset.
fn brute_cover(c: &MetricCloud, eps: f64) -> usize {
    let n = c.len();
    (1u32..1 << n)
        .filter(|mask| (0..n).all(|v| (0..n).any(|i| mask >> i & 1 == 1 && c.within(i, v, eps))))
        .map(|mask| mask.count_ones() as usize)
        .min()
        .unwrap()
}

fn entropy_oracles() -> Outcome {
    let mut rng = rng_from_seed(6);
    let (mut agree, mut sandwich, mut oracle, mut chains, mut chain_ok) = (0, 0, 0, 0, 0);
    for _ in 0..RANDOM_CLOUDS {
        let n = rng.random_range(4..=12);
        let m = rng.random_range(4..=16);
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| if rng.random_bool(0.4) { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let cloud = MetricCloud::new(vectors, vec![1.0 / m as f64; m], Norm::L1).unwrap();
        let eps = [0.125, 0.25, 0.375][rng.random_range(0..3)];
        let exact = covering_number(&cloud, eps, Solver::Exact).unwrap();
        let greedy = covering_number(&cloud, eps, Solver::Greedy).unwrap();
        oracle += usize::from(exact == brute_cover(&cloud, eps));
        agree += usize::from(greedy == exact);
        sandwich += usize::from(
            exact <= greedy && greedy as f64 <= exact as f64 * (GREEDY_FACTOR + 16f64.ln()),
        );
        for delta in [2.0, 4.0, 8.0] {
            for bracketing in [false, true] {
                let c = lemma_chain(&cloud, eps, 1.0, 1.0, delta, bracketing).unwrap();
                chains += 1;
                chain_ok += usize::from(c.holds);
            }
        }
    }
    let total = RANDOM_CLOUDS as usize;
    check(
        oracle == total && sandwich == total && chain_ok == chains,
        format!(
            "exact = brute force on {oracle}/{total}; greedy optimal on {agree}/{total}; greedy <= exact(1 + ln 16) on {sandwich}/{total}; chain holds {chain_ok}/{chains}"
        ),
    )
}

fn halfspace_local_entropy() -> Outcome {
    let spec =
        DistributionSpec::realizable(Marginal::UniformSphere { dim: 2 }, Hypothesis::planar(0.0))
            .unwrap();
    let cloud = build_cloud(
        &planar_class(),
        &spec,
        LossKind::Binary,
        1440,
        0,
        CloudMode::LossClass,
    )
    .unwrap();
    let p = local_entropy_profile(&cloud, &DLOC_EPS, 1.0, 1.0, false).unwrap();
    let hi = p.dloc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = p.dloc.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        lo > 0.0 && hi / lo <= DLOC_RATIO,
        format!(
            "D_loc over {DLOC_EPS:?} = {:.4?}, max/min = {:.3}",
            p.dloc,
            hi / lo
        ),
    )
}

fn massart_spec(h: f64) -> DistributionSpec {
    DistributionSpec::massart(Marginal::UniformBall { dim: 2 }, Hypothesis::planar(0.0), h).unwrap()
}

fn net_class() -> HypothesisClass {
    HypothesisClass::HomogeneousHalfspaces {
        dim: 2,
        resolution: NET_RESOLUTION,
    }
}

/// Net ERM under Massart noise, shared by the rate and decomposition checks.
fn net_table() -> Result<&'static RiskTable, String> {
    static TABLE: OnceLock<Result<RiskTable, String>> = OnceLock::new();
    TABLE
        .get_or_init(|| {
            let net = Learner::NetErm(NetErmConfig::massart(net_class(), 0.5, DELTA));
            run_trials(&net, &massart_spec(0.5), &RATE_GRID, RATE_TRIALS, 8)
                .map_err(|e| e.to_string())
        })
        .as_ref()
        .map_err(Clone::clone)
}

fn rate_checks() -> Outcome {
    let t = net_table()?;
    let a = rate_fit(t, Statistic::Mean).map_err(|e| e.to_string())?;
    let iv = run_trials(
        &Learner::Scheme(Arc::new(IntervalScheme)),
        &interval_spec(),
        &RATE_GRID,
        RATE_TRIALS,
        9,
    )
    .map_err(|e| e.to_string())?;
    let b = rate_fit(&iv, Statistic::Mean).map_err(|e| e.to_string())?;
    let inside = |s: f64| (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&s);
    check(
        inside(a.slope) && inside(b.slope),
        format!(
            "net ERM slope {:.3} (se {:.3}), interval slope {:.3} (se {:.3}), range {SLOPE_RANGE:?}",
            a.slope, a.slope_std_error, b.slope, b.slope_std_error
        ),
    )
}

fn pathwise_decompositions() -> Outcome {
    let spec = massart_spec(0.5);
    let t = net_table()?;
    let cor_total = t
        .rows
        .iter()
        .filter(|r| r.decomposition_holds.is_some())
        .count();
    let cor_ok = t
        .rows
        .iter()
        .filter(|r| r.decomposition_holds == Some(true))
        .count();

    let cloud = build_cloud(
        &planar_class(),
        &spec,
        LossKind::Binary,
        1440,
        0,
        CloudMode::LossClass,
    )
    .unwrap();
    let (mut agg_total, mut agg_ok, mut mixed_ok) = (0, 0, 0);
    for n in [100, 400] {
        for s in 0..AGGREGATION_TRIALS as u64 {
            let sample = generate_sample(&spec, n, 50_000 + s).unwrap();
            let half = aggregation_decomposition(&cloud, &sample, 0.5).unwrap();
            let one = aggregation_decomposition(&cloud, &sample, 1.0).unwrap();
            agg_total += 2;
            agg_ok += usize::from(half.holds) + usize::from(one.holds);
            // literal mixed form: c = 1/2 left side against the c = 1 right side
            mixed_ok += usize::from(half.lhs <= one.rhs + 1e-12);
        }
    }
    check(
        cor_total == t.rows.len() && cor_ok == cor_total && agg_ok == agg_total,
        format!(
            "net decomposition {cor_ok}/{cor_total}; aggregation identity (c = 1/2, 1) {agg_ok}/{agg_total}; mixed form reported {mixed_ok}/{}",
            agg_total / 2
        ),
    )
}

fn adversarial_sandwich() -> Outcome {
    let h = 0.25;
    let learner = Learner::NetErm(NetErmConfig::massart(planar_class(), h, DELTA));
    let r = adversarial_family_eval(
        &learner,
        2,
        h,
        400,
        ADVERSARIAL_PACKING,
        ADVERSARIAL_TRIALS,
        DELTA,
        12,
    )
    .map_err(|e| e.to_string())?;
    check(
        r.worst_mean_excess >= 0.0 && r.fitted_constant <= ADVERSARIAL_CONSTANT && r.min_pairwise_distance >= r.eps,
        format!(
            "packing of {} at eps {:.4}: worst mean excess {:.5}, lower reference d(1-h)/(nh) = {:.5}, upper value {:.5}, constant {:.3} <= {ADVERSARIAL_CONSTANT}",
            r.members.len(),
            r.eps,
            r.worst_mean_excess,
            r.lower_reference,
            r.upper_value,
            r.fitted_constant
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("expectation bound k/(n+1)", expectation_bound),
        ("deviation bound e k ln(1/delta)/n", deviation_bound),
        ("psi counting", psi_counting),
        ("scheme audits", scheme_audits),
        ("bound formulas", formulas),
        ("entropy oracles", entropy_oracles),
        ("halfspace local entropy", halfspace_local_entropy),
        ("rate checks", rate_checks),
        ("pathwise decompositions", pathwise_decompositions),
        ("adversarial family sandwich", adversarial_sandwich),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
