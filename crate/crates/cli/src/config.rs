//! Experiment configuration: TOML text plus command-line overrides, resolved
//! into an [`ExperimentConfig`]. Every problem found is collected, so a bad
//! file reports all of its errors at once.

use std::fmt;
use std::path::PathBuf;

use riskbounds::domain::{
    DistributionSpec, Hypothesis, HypothesisClass, LossKind, Marginal, NoiseModel,
};
use riskbounds::entropy::{CloudMode, FixedPointKind};
use riskbounds::skeleton::EtaVariant;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Declares a string-valued choice with its spellings, so config values and
/// flags share one parser and one suggestion list.
macro_rules! choice {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const NAMES: &'static [&'static str] = &[$($text),+];

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    $($text => Some(Self::$variant),)+
                    _ => None,
                }
            }

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Self::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

choice!(Subcommand {
    Entropy => "entropy",
    NetErm => "net-erm",
    Compress => "compress",
    Svm => "svm",
    Experiment => "experiment",
    Audit => "audit",
});

choice!(
    /// Compression schemes selectable by name.
    SchemeName {
        Intervals => "intervals",
        Rectangles => "rectangles",
        Svm => "svm",
        Halving => "halving",
        Perceptron => "perceptron",
        Prefix => "prefix",
    }
);

choice!(LearnerKind {
    Scheme => "scheme",
    MajorityOfThree => "majority-of-three",
    NetErm => "net-erm",
    SkeletonRegression => "skeleton-regression",
    Fixed => "fixed",
});

choice!(BoundName {
    FloydWarmuth => "floyd_warmuth",
    KOverNPlus1 => "k_over_n_plus_1",
    DeviationKLog => "deviation_k_log",
    Polynomial => "polynomial",
    MajorityVote => "majority_vote",
    Homogeneous => "homogeneous",
    Svm => "svm",
    LogConcave => "log_concave",
    NetErm => "net_erm",
});

choice!(Format {
    Csv => "csv",
    Json => "json",
});

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_CLOUD_POINTS: usize = 1440;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeName>,
    /// Perceptron margin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Prefix scheme size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub beta: f64,
    /// Bernstein constant; `1/h` under Massart noise when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub variant: EtaVariant,
    pub cloud_points: usize,
    pub cloud_seed: u64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSpec {
    pub bound: BoundName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyConfig {
    pub epsilon: Vec<f64>,
    pub beta: f64,
    pub b: f64,
    pub bracketing: bool,
    pub loss: LossKind,
    pub mode: CloudMode,
    pub cloud_points: usize,
    pub cloud_seed: u64,
    pub fixed_point: FixedPointKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditConfig {
    pub samples: usize,
    pub min_size: usize,
    pub max_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: Format,
}

/// A fully resolved run. Serializes back to the config grammar, so the copy
/// written next to the outputs reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    pub master_seed: u64,
    pub trials: usize,
    pub delta: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub n_grid: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<HypothesisClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyConfig>,
    pub audit: AuditConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved configs always serialize")
    }

    pub fn scheme(&self) -> Option<SchemeName> {
        self.learner.as_ref().and_then(|l| l.scheme)
    }
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub scheme: Option<String>,
    pub bound: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<String>,
}

const TOP_KEYS: &[&str] = &[
    "subcommand",
    "master_seed",
    "trials",
    "delta",
    "n_grid",
    "distribution",
    "class",
    "learner",
    "bound",
    "entropy",
    "audit",
    "output",
];
const DISTRIBUTION_KEYS: &[&str] = &["marginal", "noise"];
const LEARNER_KEYS: &[&str] = &[
    "kind",
    "scheme",
    "gamma",
    "k",
    "beta",
    "b",
    "variant",
    "cloud_points",
    "cloud_seed",
    "c",
];
const BOUND_KEYS: &[&str] = &["bound", "k", "d", "b", "beta"];
const ENTROPY_KEYS: &[&str] = &[
    "epsilon",
    "beta",
    "b",
    "bracketing",
    "loss",
    "mode",
    "cloud_points",
    "cloud_seed",
    "fixed_point",
];
const AUDIT_KEYS: &[&str] = &["samples", "min_size", "max_size"];
const OUTPUT_KEYS: &[&str] = &["dir", "format"];

const SECTIONS: &[(&str, &[&str])] = &[
    ("distribution", DISTRIBUTION_KEYS),
    ("learner", LEARNER_KEYS),
    ("bound", BOUND_KEYS),
    ("entropy", ENTROPY_KEYS),
    ("audit", AUDIT_KEYS),
    ("output", OUTPUT_KEYS),
];

/// Closest candidate within a small edit distance.
pub fn suggest<'a>(word: &str, candidates: &[&'a str]) -> Option<&'a str> {
    let limit = (word.len() / 3).max(2);
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(word, c), *c))
        .filter(|&(d, _)| d <= limit)
        .min()
        .map(|(_, c)| c)
}

fn unknown_key(section: &str, key: &str, allowed: &[&str]) -> String {
    let place = if section.is_empty() {
        "at top level".to_string()
    } else {
        format!("in [{section}]")
    };
    let hint = suggest(key, allowed).map(|s| s.to_string()).or_else(|| {
        // the key may belong to another section
        std::iter::once(("", TOP_KEYS))
            .chain(SECTIONS.iter().copied())
            .filter(|(s, _)| *s != section)
            .find_map(|(s, keys)| {
                suggest(key, keys).map(|k| {
                    if s.is_empty() {
                        k.to_string()
                    } else {
                        format!("{s}.{k}")
                    }
                })
            })
    });
    match hint {
        Some(h) => format!("unknown key `{key}` {place}; did you mean `{h}`?"),
        None => format!("unknown key `{key}` {place}"),
    }
}

fn parse_choice<T>(
    value: &str,
    what: &str,
    names: &[&str],
    parse: fn(&str) -> Option<T>,
) -> Result<T, String> {
    parse(value).ok_or_else(|| {
        let hint = suggest(value, names)
            .map(|s| format!("; did you mean `{s}`?"))
            .unwrap_or_else(|| format!(" (expected one of {})", names.join(", ")));
        format!("unknown {what} `{value}`{hint}")
    })
}

/// One TOML table being read, with unknown keys reported once.
struct Section<'a> {
    path: String,
    table: Option<&'a toml::Table>,
}

impl<'a> Section<'a> {
    fn new(
        path: &str,
        table: Option<&'a toml::Table>,
        allowed: &[&str],
        errors: &mut Vec<String>,
    ) -> Self {
        if let Some(t) = table {
            for key in t.keys() {
                if !allowed.contains(&key.as_str()) {
                    errors.push(unknown_key(path, key, allowed));
                }
            }
        }
        Self {
            path: path.to_string(),
            table,
        }
    }

    fn qualified(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn has(&self, key: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(key))
    }

    fn get<T: DeserializeOwned>(&self, key: &str, errors: &mut Vec<String>) -> Option<T> {
        let value = self.table?.get(key)?;
        match value.clone().try_into::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                errors.push(format!(
                    "`{}`: {}",
                    self.qualified(key),
                    e.to_string().trim()
                ));
                None
            }
        }
    }

    fn choice<T>(
        &self,
        key: &str,
        what: &str,
        names: &[&str],
        parse: fn(&str) -> Option<T>,
        errors: &mut Vec<String>,
    ) -> Option<T> {
        let s: String = self.get(key, errors)?;
        match parse_choice(&s, what, names, parse) {
            Ok(v) => Some(v),
            Err(e) => {
                errors.push(format!("`{}`: {e}", self.qualified(key)));
                None
            }
        }
    }

    fn subtable(
        &self,
        key: &str,
        allowed: &[&str],
        errors: &mut Vec<String>,
    ) -> Option<Section<'a>> {
        let value = self.table?.get(key)?;
        match value.as_table() {
            Some(t) => Some(Section::new(&self.qualified(key), Some(t), allowed, errors)),
            None => {
                errors.push(format!("`{}` must be a table", self.qualified(key)));
                None
            }
        }
    }
}

/// The file's contents before defaults and requirements are applied.
#[derive(Debug, Clone, Default)]
struct Raw {
    subcommand: Option<Subcommand>,
    master_seed: Option<i64>,
    trials: Option<i64>,
    delta: Option<f64>,
    n_grid: Option<Vec<i64>>,
    marginal: Option<Marginal>,
    noise: Option<NoiseModel>,
    class: Option<HypothesisClass>,
    learner_present: bool,
    learner_kind: Option<LearnerKind>,
    scheme: Option<SchemeName>,
    gamma: Option<f64>,
    prefix_k: Option<i64>,
    net_beta: Option<f64>,
    net_b: Option<f64>,
    variant: Option<EtaVariant>,
    cloud_points: Option<i64>,
    cloud_seed: Option<i64>,
    c: Option<f64>,
    bound_present: bool,
    bound: Option<BoundName>,
    bound_k: Option<i64>,
    bound_d: Option<i64>,
    bound_b: Option<f64>,
    bound_beta: Option<f64>,
    entropy_present: bool,
    epsilon: Option<Vec<f64>>,
    entropy_beta: Option<f64>,
    entropy_b: Option<f64>,
    bracketing: Option<bool>,
    loss: Option<LossKind>,
    mode: Option<CloudMode>,
    entropy_points: Option<i64>,
    entropy_seed: Option<i64>,
    fixed_point: Option<FixedPointKind>,
    audit_samples: Option<i64>,
    audit_min: Option<i64>,
    audit_max: Option<i64>,
    out_dir: Option<PathBuf>,
    format: Option<Format>,
}

fn read_raw(text: &str, errors: &mut Vec<String>) -> Raw {
    let table: toml::Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            errors.push(format!("syntax error: {}", e.to_string().trim()));
            return Raw::default();
        }
    };
    let top = Section::new("", Some(&table), TOP_KEYS, errors);
    let mut raw = Raw {
        subcommand: top.choice(
            "subcommand",
            "subcommand",
            Subcommand::NAMES,
            Subcommand::parse,
            errors,
        ),
        master_seed: top.get("master_seed", errors),
        trials: top.get("trials", errors),
        delta: top.get("delta", errors),
        n_grid: top.get("n_grid", errors),
        class: top.get("class", errors),
        ..Raw::default()
    };
    if let Some(d) = top.subtable("distribution", DISTRIBUTION_KEYS, errors) {
        raw.marginal = d.get("marginal", errors);
        raw.noise = d.get("noise", errors);
    }
    if let Some(l) = top.subtable("learner", LEARNER_KEYS, errors) {
        raw.learner_present = true;
        raw.learner_kind = l.choice(
            "kind",
            "learner kind",
            LearnerKind::NAMES,
            LearnerKind::parse,
            errors,
        );
        raw.scheme = l.choice(
            "scheme",
            "scheme",
            SchemeName::NAMES,
            SchemeName::parse,
            errors,
        );
        raw.gamma = l.get("gamma", errors);
        raw.prefix_k = l.get("k", errors);
        raw.net_beta = l.get("beta", errors);
        raw.net_b = l.get("b", errors);
        raw.variant = l.get("variant", errors);
        raw.cloud_points = l.get("cloud_points", errors);
        raw.cloud_seed = l.get("cloud_seed", errors);
        raw.c = l.get("c", errors);
    }
    if let Some(b) = top.subtable("bound", BOUND_KEYS, errors) {
        raw.bound_present = true;
        raw.bound = b.choice("bound", "bound", BoundName::NAMES, BoundName::parse, errors);
        raw.bound_k = b.get("k", errors);
        raw.bound_d = b.get("d", errors);
        raw.bound_b = b.get("b", errors);
        raw.bound_beta = b.get("beta", errors);
        if !b.has("bound") {
            errors.push("missing required key `bound.bound`".into());
        }
    }
    if let Some(e) = top.subtable("entropy", ENTROPY_KEYS, errors) {
        raw.entropy_present = true;
        raw.epsilon = e.get("epsilon", errors);
        raw.entropy_beta = e.get("beta", errors);
        raw.entropy_b = e.get("b", errors);
        raw.bracketing = e.get("bracketing", errors);
        raw.loss = e.get("loss", errors);
        raw.mode = e.get("mode", errors);
        raw.entropy_points = e.get("cloud_points", errors);
        raw.entropy_seed = e.get("cloud_seed", errors);
        raw.fixed_point = e.get("fixed_point", errors);
    }
    if let Some(a) = top.subtable("audit", AUDIT_KEYS, errors) {
        raw.audit_samples = a.get("samples", errors);
        raw.audit_min = a.get("min_size", errors);
        raw.audit_max = a.get("max_size", errors);
    }
    if let Some(o) = top.subtable("output", OUTPUT_KEYS, errors) {
        raw.out_dir = o.get("dir", errors);
        raw.format = o.choice("format", "format", Format::NAMES, Format::parse, errors);
    }
    raw
}

/// Default data for a scheme run without a `[distribution]` block.
pub fn default_distribution(scheme: SchemeName) -> Option<DistributionSpec> {
    let (marginal, target) = match scheme {
        SchemeName::Intervals => (
            Marginal::UniformBall { dim: 1 },
            Hypothesis::Interval { lo: -0.3, hi: 0.4 },
        ),
        SchemeName::Rectangles => (
            Marginal::UniformBall { dim: 2 },
            Hypothesis::Rectangle {
                lo: vec![-0.5, -0.3],
                hi: vec![0.4, 0.6],
            },
        ),
        SchemeName::Svm => (
            Marginal::UniformBall { dim: 2 },
            Hypothesis::halfspace(vec![0.6, -0.8], 0.1),
        ),
        _ => return None,
    };
    DistributionSpec::realizable(marginal, target).ok()
}

/// Converts a non-negative integer, recording an error otherwise.
fn count(v: Option<i64>, key: &str, min: i64, errors: &mut Vec<String>) -> Option<usize> {
    let v = v?;
    if v < min {
        errors.push(format!("`{key}` must be at least {min}, got {v}"));
        None
    } else {
        Some(v as usize)
    }
}

fn seed(v: Option<i64>, key: &str, errors: &mut Vec<String>) -> Option<u64> {
    count(v, key, 0, errors).map(|v| v as u64)
}

/// Parses and validates a self-contained config; `subcommand` must be set
/// in the text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    load(Some(text), None, &Overrides::default())
}

/// Resolves a run from optional config text, the subcommand given on the
/// command line, and flag overrides.
pub fn load(
    text: Option<&str>,
    subcommand: Option<Subcommand>,
    overrides: &Overrides,
) -> Result<ExperimentConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let mut raw = text.map(|t| read_raw(t, &mut errors)).unwrap_or_default();

    let sub = match (subcommand, raw.subcommand) {
        (Some(cli), Some(file)) if cli != file => {
            errors.push(format!(
                "config is for `{file}` but the `{cli}` subcommand was given"
            ));
            Some(cli)
        }
        (cli, file) => cli.or(file),
    };

    if let Some(s) = &overrides.scheme {
        match parse_choice(s, "scheme", SchemeName::NAMES, SchemeName::parse) {
            Ok(v) => {
                raw.scheme = Some(v);
                raw.learner_present = true;
            }
            Err(e) => errors.push(format!("--scheme: {e}")),
        }
    }
    if let Some(b) = &overrides.bound {
        match parse_choice(b, "bound", BoundName::NAMES, BoundName::parse) {
            Ok(v) => {
                raw.bound = Some(v);
                raw.bound_present = true;
            }
            Err(e) => errors.push(format!("--bound: {e}")),
        }
    }
    if let Some(f) = &overrides.format {
        match parse_choice(f, "format", Format::NAMES, Format::parse) {
            Ok(v) => raw.format = Some(v),
            Err(e) => errors.push(format!("--format: {e}")),
        }
    }

    let Some(sub) = sub else {
        errors.push("missing required key `subcommand`".into());
        return Err(ConfigErrors(errors));
    };

    if sub == Subcommand::Svm {
        match raw.scheme {
            Some(SchemeName::Svm) | None => raw.scheme = Some(SchemeName::Svm),
            Some(other) => errors.push(format!(
                "the svm subcommand runs the svm scheme, not `{other}`"
            )),
        }
        raw.learner_present = true;
    }

    let master_seed = match overrides.seed {
        Some(s) => Some(s),
        None => seed(raw.master_seed, "master_seed", &mut errors),
    }
    .unwrap_or(0);
    if master_seed > i64::MAX as u64 {
        errors.push(format!(
            "master seed {master_seed} does not fit a signed 64-bit integer"
        ));
    }
    let trials = overrides
        .trials
        .or_else(|| count(raw.trials, "trials", 1, &mut errors))
        .unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        errors.push("`trials` must be at least 1, got 0".into());
    }
    let delta = raw.delta.unwrap_or(DEFAULT_DELTA);
    if !(delta > 0.0 && delta < 1.0) {
        errors.push(format!("`delta` must lie in (0, 1), got {delta}"));
    }
    let n_grid: Vec<usize> = match &overrides.n_grid {
        Some(g) => g.clone(),
        None => raw
            .n_grid
            .clone()
            .unwrap_or_default()
            .into_iter()
            .filter_map(|n| count(Some(n), "n_grid", 1, &mut errors))
            .collect(),
    };
    if n_grid.contains(&0) {
        errors.push("`n_grid` entries must be at least 1".into());
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        errors.push(format!("n_grid not increasing: {n_grid:?}"));
    }

    let learner_kind = raw.learner_kind.unwrap_or(match sub {
        Subcommand::NetErm => LearnerKind::NetErm,
        _ => LearnerKind::Scheme,
    });
    if sub == Subcommand::NetErm && learner_kind != LearnerKind::NetErm {
        errors.push(format!(
            "the net-erm subcommand runs the net-erm learner, not `{learner_kind}`"
        ));
    }

    let distribution = match (raw.marginal.clone(), raw.noise.clone()) {
        (Some(m), Some(n)) => match DistributionSpec::new(m, n) {
            Ok(d) => Some(d),
            Err(e) => {
                errors.push(format!("`distribution`: {e}"));
                None
            }
        },
        (None, None) => raw.scheme.and_then(default_distribution),
        (m, _) => {
            let missing = if m.is_none() { "marginal" } else { "noise" };
            errors.push(format!("missing required key `distribution.{missing}`"));
            None
        }
    };

    // requirements that depend on what the subcommand runs
    let mut missing: Vec<&str> = Vec::new();
    let uses_scheme = matches!(
        sub,
        Subcommand::Compress | Subcommand::Svm | Subcommand::Audit
    ) || (sub == Subcommand::Experiment
        && matches!(
            learner_kind,
            LearnerKind::Scheme | LearnerKind::MajorityOfThree
        ));
    if uses_scheme && raw.scheme.is_none() {
        missing.push("learner.scheme");
    }
    if sub != Subcommand::Audit && sub != Subcommand::Entropy && n_grid.is_empty() {
        missing.push("n_grid");
    }
    if distribution.is_none() && raw.marginal.is_none() && raw.noise.is_none() {
        missing.push("distribution");
    }
    let needs_class = sub == Subcommand::Entropy
        || matches!(
            learner_kind,
            LearnerKind::NetErm | LearnerKind::SkeletonRegression
        ) && sub != Subcommand::Audit
        || (uses_scheme && raw.scheme == Some(SchemeName::Halving));
    if needs_class && raw.class.is_none() {
        missing.push("class");
    }
    if sub == Subcommand::Experiment && raw.bound.is_none() {
        missing.push("bound");
    }
    if sub == Subcommand::Entropy && raw.epsilon.is_none() {
        missing.push("entropy.epsilon");
    }
    if uses_scheme && raw.scheme == Some(SchemeName::Perceptron) && raw.gamma.is_none() {
        missing.push("learner.gamma");
    }
    if uses_scheme && raw.scheme == Some(SchemeName::Prefix) && raw.prefix_k.is_none() {
        missing.push("learner.k");
    }
    if !missing.is_empty() {
        errors.push(format!("missing required keys: {}", missing.join(", ")));
    }

    if let Some(g) = raw.gamma {
        if !(g > 0.0 && g <= 1.0) {
            errors.push(format!("`learner.gamma` must lie in (0, 1], got {g}"));
        }
    }
    let b = raw.net_b;
    if let Some(b) = b {
        if !(b >= 1.0) {
            errors.push(format!("`learner.b` must be at least 1, got {b}"));
        }
    }
    let beta = raw.net_beta.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&beta) {
        errors.push(format!("`learner.beta` must lie in [0, 1], got {beta}"));
    }

    let learner = (raw.learner_present
        || uses_scheme
        || sub == Subcommand::NetErm
        || sub == Subcommand::Experiment)
        .then(|| LearnerConfig {
            kind: learner_kind,
            scheme: raw.scheme,
            gamma: raw.gamma,
            k: count(raw.prefix_k, "learner.k", 1, &mut errors),
            beta,
            b,
            variant: raw.variant.unwrap_or(EtaVariant::Cor),
            cloud_points: count(raw.cloud_points, "learner.cloud_points", 1, &mut errors)
                .unwrap_or(DEFAULT_CLOUD_POINTS),
            cloud_seed: seed(raw.cloud_seed, "learner.cloud_seed", &mut errors).unwrap_or(0),
            c: raw.c.unwrap_or(1.0),
        });

    let bound = raw.bound.map(|name| BoundSpec {
        bound: name,
        k: count(raw.bound_k, "bound.k", 1, &mut errors),
        d: count(raw.bound_d, "bound.d", 1, &mut errors),
        b: raw.bound_b,
        beta: raw.bound_beta,
    });

    let entropy = (raw.entropy_present || sub == Subcommand::Entropy).then(|| {
        let eps = raw.epsilon.clone().unwrap_or_default();
        if raw.epsilon.is_some() && eps.is_empty() {
            errors.push("`entropy.epsilon` must list at least one scale".into());
        }
        if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            errors.push(format!(
                "`entropy.epsilon` entries must be positive, got {e}"
            ));
        }
        EntropyConfig {
            epsilon: eps,
            beta: raw.entropy_beta.unwrap_or(1.0),
            b: raw.entropy_b.unwrap_or(1.0),
            bracketing: raw.bracketing.unwrap_or(false),
            loss: raw.loss.unwrap_or(LossKind::Binary),
            mode: raw.mode.unwrap_or(CloudMode::LossClass),
            cloud_points: count(raw.entropy_points, "entropy.cloud_points", 1, &mut errors)
                .unwrap_or(DEFAULT_CLOUD_POINTS),
            cloud_seed: seed(raw.entropy_seed, "entropy.cloud_seed", &mut errors).unwrap_or(0),
            fixed_point: raw.fixed_point.unwrap_or(FixedPointKind::Gamma),
        }
    });

    let audit = AuditConfig {
        samples: count(raw.audit_samples, "audit.samples", 1, &mut errors).unwrap_or(200),
        min_size: count(raw.audit_min, "audit.min_size", 1, &mut errors).unwrap_or(4),
        max_size: count(raw.audit_max, "audit.max_size", 1, &mut errors).unwrap_or(20),
    };
    if audit.min_size > audit.max_size {
        errors.push(format!(
            "`audit.min_size` ({}) exceeds `audit.max_size` ({})",
            audit.min_size, audit.max_size
        ));
    }

    let output = OutputConfig {
        dir: overrides
            .out_dir
            .clone()
            .or(raw.out_dir)
            .unwrap_or_else(|| PathBuf::from("results")),
        format: raw.format.unwrap_or(Format::Csv),
    };

    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    Ok(ExperimentConfig {
        subcommand: sub,
        master_seed,
        trials,
        delta,
        n_grid,
        distribution,
        class: raw.class,
        learner,
        bound,
        entropy,
        audit,
        output,
    })
}
