//! Executes a resolved configuration. Nothing here touches the filesystem:
//! a run returns its artifacts, summary and check outcomes, and the caller
//! decides where they go.

use std::fmt::Write as _;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use riskbounds::compression::{
    audit, CompressionScheme, IntervalScheme, OnlineToBatch, PrefixScheme, RectangleScheme,
    SchemeAudit,
};
use riskbounds::domain::{generate_sample, DistributionSpec, NoiseModel, Sample};
use riskbounds::entropy::{build_cloud, fixed_point, local_entropy_profile};
use riskbounds::harness::{
    prepare_nets, run_trials, trial_seed, verify_bound, BoundId, BoundReport, Learner,
    NetErmConfig, RegressionConfig, RiskTable,
};
use riskbounds::svm::SvmScheme;
use serde::Serialize;

use crate::config::{
    BoundName, BoundSpec, ExperimentConfig, Format, LearnerConfig, LearnerKind, SchemeName,
    Subcommand,
};

/// One named file produced by a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: String,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn distribution(cfg: &ExperimentConfig) -> Result<&DistributionSpec> {
    cfg.distribution
        .as_ref()
        .ok_or_else(|| anyhow!("this run needs a [distribution] block"))
}

fn learner_config(cfg: &ExperimentConfig) -> Result<&LearnerConfig> {
    cfg.learner
        .as_ref()
        .ok_or_else(|| anyhow!("this run needs a [learner] block"))
}

pub fn build_scheme(cfg: &ExperimentConfig) -> Result<Arc<dyn CompressionScheme>> {
    let l = learner_config(cfg)?;
    let name = l.scheme.ok_or_else(|| anyhow!("no scheme selected"))?;
    let dim = cfg.distribution.as_ref().map(|d| d.marginal.dim());
    let need_dim = || dim.ok_or_else(|| anyhow!("scheme `{name}` needs a distribution"));
    Ok(match name {
        SchemeName::Intervals => Arc::new(IntervalScheme),
        SchemeName::Rectangles => Arc::new(RectangleScheme { dim: need_dim()? }),
        SchemeName::Svm => Arc::new(SvmScheme { dim: need_dim()? }),
        SchemeName::Perceptron => Arc::new(OnlineToBatch::perceptron(
            need_dim()?,
            l.gamma
                .ok_or_else(|| anyhow!("perceptron needs learner.gamma"))?,
        )),
        SchemeName::Prefix => Arc::new(PrefixScheme {
            k: l.k.ok_or_else(|| anyhow!("prefix needs learner.k"))?,
        }),
        SchemeName::Halving => {
            let class = cfg
                .class
                .as_ref()
                .ok_or_else(|| anyhow!("halving needs a [class] block"))?;
            Arc::new(OnlineToBatch::halving(class.enumerate()?))
        }
    })
}

/// Bernstein constant for net ERM: explicit, else `1/h` under Massart noise.
fn bernstein_b(l: &LearnerConfig, spec: &DistributionSpec) -> f64 {
    l.b.unwrap_or(match &spec.noise {
        NoiseModel::Massart { margin, .. } => 1.0 / margin,
        _ => 1.0,
    })
}

fn net_config(cfg: &ExperimentConfig, spec: &DistributionSpec) -> Result<NetErmConfig> {
    let l = learner_config(cfg)?;
    Ok(NetErmConfig {
        class: cfg
            .class
            .clone()
            .ok_or_else(|| anyhow!("net ERM needs a [class] block"))?,
        delta: cfg.delta,
        beta: l.beta,
        b: bernstein_b(l, spec),
        variant: l.variant,
        cloud_points: l.cloud_points,
        cloud_seed: l.cloud_seed,
        c: l.c,
    })
}

fn build_learner(cfg: &ExperimentConfig, spec: &DistributionSpec) -> Result<Learner> {
    let l = learner_config(cfg)?;
    Ok(match l.kind {
        LearnerKind::Scheme => Learner::Scheme(build_scheme(cfg)?),
        LearnerKind::MajorityOfThree => Learner::MajorityOfThree(build_scheme(cfg)?),
        LearnerKind::NetErm => Learner::NetErm(net_config(cfg, spec)?),
        LearnerKind::SkeletonRegression => Learner::SkeletonRegression(RegressionConfig {
            class: cfg
                .class
                .clone()
                .ok_or_else(|| anyhow!("skeleton regression needs a [class] block"))?,
            delta: cfg.delta,
            cloud_points: l.cloud_points,
            cloud_seed: l.cloud_seed,
        }),
        LearnerKind::Fixed => Learner::Fixed(spec.target().clone()),
    })
}

/// Fills a bound's parameters from the learner and data where not given.
fn resolve_bound(
    spec_b: &BoundSpec,
    cfg: &ExperimentConfig,
    spec: &DistributionSpec,
) -> Result<BoundId> {
    let k = || -> Result<usize> {
        if let Some(k) = spec_b.k {
            return Ok(k);
        }
        let scheme = build_scheme(cfg).context("bound.k is not set and there is no scheme")?;
        Ok(scheme.size_bound())
    };
    let d = spec_b.d.unwrap_or_else(|| spec.marginal.dim());
    let l = cfg.learner.as_ref();
    let b = spec_b
        .b
        .or_else(|| l.map(|l| bernstein_b(l, spec)))
        .unwrap_or(1.0);
    let beta = spec_b.beta.or(l.map(|l| l.beta)).unwrap_or(1.0);
    Ok(match spec_b.bound {
        BoundName::FloydWarmuth => BoundId::FloydWarmuth { k: k()? },
        BoundName::KOverNPlus1 => BoundId::KOverNPlus1 { k: k()? },
        BoundName::DeviationKLog => BoundId::DeviationKLog { k: k()? },
        BoundName::Polynomial => BoundId::Polynomial { k: k()? },
        BoundName::MajorityVote => BoundId::MajorityVote { k: k()? },
        BoundName::Homogeneous => BoundId::Homogeneous { k: k()? },
        BoundName::Svm => BoundId::Svm { d },
        BoundName::LogConcave => BoundId::LogConcave { d, b, beta },
        BoundName::NetErm => {
            let mut net = net_config(cfg, spec)?;
            net.b = b;
            net.beta = beta;
            let fixed_points = prepare_nets(&net, spec, &cfg.n_grid)?
                .into_iter()
                .map(|(n, p)| (n, p.fixed_point.value))
                .collect();
            BoundId::NetErm {
                b,
                beta,
                fixed_points,
            }
        }
    })
}

fn table_artifact(cfg: &ExperimentConfig, table: &RiskTable) -> Artifact {
    match cfg.output.format {
        Format::Csv => Artifact {
            name: "risk_table.csv".into(),
            contents: table.to_csv(),
        },
        Format::Json => Artifact {
            name: "risk_table.json".into(),
            contents: json(table),
        },
    }
}

fn describe_trials(summary: &mut String, table: &RiskTable) {
    let _ = writeln!(
        summary,
        "{:>7} {:>7} {:>7} {:>11} {:>11}",
        "n", "trials", "failed", "mean risk", "mean excess"
    );
    for n in table.ns() {
        let risk = table
            .rows
            .iter()
            .filter(|r| r.n == n)
            .filter_map(|r| r.risk)
            .collect::<Vec<_>>();
        let excess = table.values(n, true);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let total = table.rows.iter().filter(|r| r.n == n).count();
        let _ = writeln!(
            summary,
            "{n:>7} {total:>7} {:>7} {:>11.5} {:>11.5}",
            table.failures(n),
            mean(&risk),
            mean(&excess)
        );
    }
}

fn describe_report(summary: &mut String, report: &BoundReport) {
    let _ = writeln!(
        summary,
        "bound {} ({}), delta {}, constant {:.4e} ({}), least-squares fit {:.4e}",
        report.bound_id.name(),
        json_name(&report.kind),
        report.delta,
        report.constant_used,
        if report.constant_stated {
            "stated"
        } else {
            "fitted at smallest n"
        },
        report.fitted_constant
    );
    let _ = writeln!(
        summary,
        "{:>7} {:>11} {:>11} {:>11} {:>11} {:>10} {:>6}",
        "n", "mean", "std err", "quantile", "bound", "violations", "holds"
    );
    for r in &report.rows {
        let _ = writeln!(
            summary,
            "{:>7} {:>11.5} {:>11.5} {:>11.5} {:>11.5} {:>10.4} {:>6}",
            r.n,
            r.mean,
            r.std_error,
            r.quantile,
            r.scaled_bound,
            r.violation_fraction,
            if r.holds { "yes" } else { "NO" }
        );
    }
}

/// Trial-based subcommands: net-erm, compress, svm and experiment.
fn run_learner(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = distribution(cfg)?;
    let learner = build_learner(cfg, spec)?;
    log::info!(
        "running {} on n = {:?}, {} trials each",
        learner.id(),
        cfg.n_grid,
        cfg.trials
    );
    let table = run_trials(&learner, spec, &cfg.n_grid, cfg.trials, cfg.master_seed)?;

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "{}: learner {}, master seed {}",
        cfg.subcommand,
        learner.id(),
        cfg.master_seed
    );
    describe_trials(&mut summary, &table);

    let mut artifacts = vec![table_artifact(cfg, &table)];
    let mut checks = Vec::new();

    let evaluated: Vec<bool> = table
        .rows
        .iter()
        .filter_map(|r| r.decomposition_holds)
        .collect();
    if !evaluated.is_empty() {
        let ok = evaluated.iter().filter(|h| **h).count();
        checks.push(check(
            "net decomposition",
            ok == evaluated.len(),
            format!("held on {ok}/{} trials", evaluated.len()),
        ));
    }

    let bound = match (&cfg.bound, cfg.subcommand) {
        (Some(b), _) => Some(b.clone()),
        // scheme runs compare against the expectation bound by default
        (None, Subcommand::Compress | Subcommand::Svm) => Some(BoundSpec {
            bound: BoundName::KOverNPlus1,
            k: None,
            d: None,
            b: None,
            beta: None,
        }),
        _ => None,
    };
    if let Some(b) = bound {
        let id = resolve_bound(&b, cfg, spec)?;
        let report = verify_bound(&table, &id, cfg.delta)?;
        describe_report(&mut summary, &report);
        checks.push(check(
            format!("bound {}", id.name()),
            report.holds,
            format!(
                "{} of {} grid points hold",
                report.rows.iter().filter(|r| r.holds).count(),
                report.rows.len()
            ),
        ));
        artifacts.push(Artifact {
            name: "bound_report.json".into(),
            contents: json(&report),
        });
    }
    Ok(Outcome {
        artifacts,
        summary,
        checks,
    })
}

#[derive(Serialize)]
struct EntropyRow {
    eps: f64,
    value: f64,
    kind: String,
    solver: String,
}

fn run_entropy(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = distribution(cfg)?;
    let e = cfg
        .entropy
        .as_ref()
        .ok_or_else(|| anyhow!("the entropy subcommand needs an [entropy] block"))?;
    let class = cfg
        .class
        .as_ref()
        .ok_or_else(|| anyhow!("the entropy subcommand needs a [class] block"))?;
    let cloud = build_cloud(class, spec, e.loss, e.cloud_points, e.cloud_seed, e.mode)?;
    let profile = local_entropy_profile(&cloud, &e.epsilon, e.beta, e.b, e.bracketing)?;

    let mut rows: Vec<EntropyRow> = profile
        .epsilons
        .iter()
        .zip(&profile.dloc)
        .zip(&profile.solvers)
        .map(|((&eps, &value), solver)| EntropyRow {
            eps,
            value,
            kind: "local-entropy".into(),
            solver: json_name(solver),
        })
        .collect();
    // fixed points at k = B/n, the multiplier the net ERM learner uses
    for &n in &cfg.n_grid {
        let k = e.b / n as f64;
        let fp = fixed_point(&cloud, k, e.beta, e.b, e.fixed_point)?;
        rows.push(EntropyRow {
            eps: k,
            value: fp.value,
            kind: format!("fixed-point-{}", json_name(&fp.kind)),
            solver: if fp.crossed { "bisection" } else { "boundary" }.into(),
        });
    }

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "entropy: {} members, {} evaluation points",
        cloud.len(),
        cloud.weights().len()
    );
    let _ = writeln!(
        summary,
        "{:>12} {:>12}  {:<24} solver",
        "eps", "value", "kind"
    );
    for r in &rows {
        let _ = writeln!(
            summary,
            "{:>12.6} {:>12.6}  {:<24} {}",
            r.eps, r.value, r.kind, r.solver
        );
    }

    // anchoring the scale grid at powers of two makes D_loc non-increasing
    let mut order: Vec<(f64, f64)> = profile
        .epsilons
        .iter()
        .copied()
        .zip(profile.dloc.iter().copied())
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = order.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let finite = profile.dloc.iter().all(|v| v.is_finite() && *v >= 0.0);
    let checks = vec![check(
        "local entropy non-increasing in eps",
        monotone && finite,
        format!("{} scales", order.len()),
    )];

    let contents = match cfg.output.format {
        Format::Csv => {
            let mut s = String::from("eps,value,kind,solver\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{},{}", r.eps, r.value, r.kind, r.solver);
            }
            s
        }
        Format::Json => json(&rows),
    };
    let ext = cfg.output.format.as_str();
    Ok(Outcome {
        artifacts: vec![Artifact {
            name: format!("entropy.{ext}"),
            contents,
        }],
        summary,
        checks,
    })
}

fn json_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Closure schemes must be homogeneous; the others only report it.
fn homogeneity_asserted(s: SchemeName) -> bool {
    matches!(s, SchemeName::Intervals | SchemeName::Rectangles)
}

fn run_audit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = distribution(cfg)?;
    let name = cfg
        .scheme()
        .ok_or_else(|| anyhow!("the audit subcommand needs learner.scheme"))?;
    let scheme = build_scheme(cfg)?;
    let a = &cfg.audit;
    let span = a.max_size - a.min_size + 1;
    let samples: Vec<Sample> = (0..a.samples)
        .map(|i| {
            let size = a.min_size + i % span;
            generate_sample(spec, size, trial_seed(cfg.master_seed, "audit", size, i))
        })
        .collect::<riskbounds::Result<_>>()?;
    let report: SchemeAudit = audit(scheme.as_ref(), &samples);

    let mut checks = vec![
        check(
            "valid",
            report.valid,
            "reconstruction labels every sample point",
        ),
        check(
            "permutation invariant",
            report.permutation_invariant,
            "same compression set under reordering",
        ),
        check(
            "stable",
            report.stable,
            "removing a non-compression point keeps the set",
        ),
        check(
            "size bound",
            report.max_compression_size <= scheme.size_bound(),
            format!(
                "largest compression set {} against bound {}",
                report.max_compression_size,
                scheme.size_bound()
            ),
        ),
    ];
    if homogeneity_asserted(name) {
        checks.push(check(
            "homogeneous",
            report.homogeneous,
            "asserted for closure schemes",
        ));
    }

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "audit of {} on {} samples (sizes {}..={}):",
        report.scheme_id, report.samples, a.min_size, a.max_size
    );
    let _ = writeln!(
        summary,
        "valid={} permutation_invariant={} stable={} homogeneous={}{} max_compression_size={}",
        report.valid,
        report.permutation_invariant,
        report.stable,
        report.homogeneous,
        if homogeneity_asserted(name) {
            ""
        } else {
            " (reported)"
        },
        report.max_compression_size
    );
    if let Some(c) = &report.counterexample {
        let _ = writeln!(summary, "counterexample: {:?} {}", c.property, c.detail);
    }
    Ok(Outcome {
        artifacts: vec![Artifact {
            name: "audit.json".into(),
            contents: json(&report),
        }],
        summary,
        checks,
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut outcome = match cfg.subcommand {
        Subcommand::Entropy => run_entropy(cfg)?,
        Subcommand::Audit => run_audit(cfg)?,
        Subcommand::NetErm | Subcommand::Compress | Subcommand::Svm | Subcommand::Experiment => {
            if cfg.n_grid.is_empty() {
                bail!("n_grid is empty");
            }
            run_learner(cfg)?
        }
    };
    outcome.artifacts.push(Artifact {
        name: "config.toml".into(),
        contents: cfg.to_toml(),
    });
    Ok(outcome)
}
