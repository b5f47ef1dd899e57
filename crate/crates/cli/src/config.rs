//! Run configuration files.
//!
//! A configuration is a JSON object whose `command` key selects the
//! subcommand. Unknown keys are rejected everywhere, and errors carry the
//! path of the offending field (`priors.beta_var`, `cells[0].n`, ...).
//! Relative file paths are resolved against the directory of the
//! configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use doi_core::net::AngularDistance;
use doi_core::simbench::{BenchmarkCell, BenchmarkConfig, DgpConfig, GraphSpec, HouseholdConfig};
use doi_core::{ChainConfig, Error as CoreError, FeatureTerm, Priors, Subgroup, TreatmentKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Simulate,
    Benchmark,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Simulate => "simulate",
            Command::Benchmark => "benchmark",
        }
    }

    fn parse(name: &str) -> Option<Self> {
        match name {
            "fit" => Some(Command::Fit),
            "simulate" => Some(Command::Simulate),
            "benchmark" => Some(Command::Benchmark),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunConfig {
    Fit(FitConfig),
    Simulate(SimulateConfig),
    Benchmark(BenchmarkRun),
}

/// Where the interference network of a fitted dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSource {
    /// Edge list CSV `src,dst,w` keyed by `unit_id`.
    Edges { path: PathBuf },
    /// Complete subgraph within each value of the `household` column.
    Households,
    /// `A_ij = 1/d(angle_i, angle_j)` within `cutoff`, from the `angle` column.
    InverseDistance {
        cutoff: f64,
        #[serde(default)]
        metric: AngularDistance,
    },
    /// No interference structure.
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    /// The `score` column when present, otherwise PageRank if a feature
    /// needs scores.
    #[default]
    Auto,
    Column,
    Pagerank,
    None,
}

/// Assignment mechanism with stratum probabilities keyed by stratum label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismSpec {
    Bernoulli { p: f64 },
    StratifiedBernoulli { probs: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedAssignment {
    Observed,
    AllControl,
    AllTreated,
}

/// An assignment vector, either spelled out or by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AssignmentSpec {
    Named(NamedAssignment),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuerySpec {
    ACate {
        z: f64,
        zprime: AssignmentSpec,
    },
    ACase {
        z: f64,
        zprime: AssignmentSpec,
        zstar: AssignmentSpec,
    },
    /// `mech` defaults to the configuration's `mechanism`.
    EAte {
        z: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mech: Option<MechanismSpec>,
    },
    EAse {
        z: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mech: Option<MechanismSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subgroup: Option<Subgroup>,
    },
}

fn yes() -> bool {
    true
}

fn default_features() -> Vec<FeatureTerm> {
    BenchmarkConfig::feature_spec().terms().to_vec()
}

fn default_truth_draws() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Unit CSV `unit_id,stratum,treatment,outcome,x1..xd[,score][,household][,angle]`.
    pub data: PathBuf,
    pub network: NetworkSource,
    /// Prepend a constant covariate.
    #[serde(default = "yes")]
    pub intercept: bool,
    #[serde(default)]
    pub treatment: TreatmentKind,
    #[serde(default = "default_features")]
    pub features: Vec<FeatureTerm>,
    #[serde(default)]
    pub scores: ScoreSource,
    /// Default mechanism of expected-effect estimands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismSpec>,
    pub estimands: Vec<QuerySpec>,
    #[serde(default)]
    pub priors: Priors,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

/// What `simulate` generates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimDesign {
    /// A benchmark scenario on a random graph.
    Network {
        graph: GraphSpec,
        n: usize,
        #[serde(default)]
        dgp: DgpConfig,
    },
    /// Household-clustered binary-outcome experiment.
    Household {
        #[serde(default)]
        household: HouseholdConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub design: SimDesign,
    #[serde(default = "default_truth_draws")]
    pub truth_draws: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkRun {
    pub cells: Vec<BenchmarkCell>,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub priors: Priors,
    #[serde(default = "default_truth_draws")]
    pub truth_draws: usize,
    #[serde(default)]
    pub ease_level: f64,
    /// Record wall-clock timings; the outputs are then no longer
    /// reproducible byte for byte.
    #[serde(default)]
    pub wall_time: bool,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

impl BenchmarkRun {
    pub fn to_core(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            cells: self.cells.clone(),
            chain: self.chain.clone(),
            priors: self.priors.clone(),
            truth_draws: self.truth_draws,
            ease_level: self.ease_level,
            seed: self.seed.unwrap_or_default(),
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Prefixes the parameter name of a core validation error with `path`.
fn at(path: &str, err: CoreError) -> CliError {
    match err {
        CoreError::InvalidParameter { name, reason } => {
            config_error(format!("{path}.{name}: {reason}"))
        }
        other => config_error(format!("{path}: {other}")),
    }
}

fn deserialize<T: for<'de> Deserialize<'de>>(value: Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            config_error(inner.to_string())
        } else {
            config_error(format!("{path}: {inner}"))
        }
    })
}

/// Reads, parses and validates a configuration file. A `manifest.json`
/// written by an earlier run is accepted as well.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
    parse_config_str(&text, &base)
}

/// Parses configuration text; relative paths are resolved against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, CliError> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| config_error(format!("malformed JSON: {e}")))?;
    if let Some(inner) = value
        .get("config")
        .filter(|_| value.get("doi_version").is_some())
    {
        value = inner.clone();
    }
    let Value::Object(mut map) = value else {
        return Err(config_error("configuration must be a JSON object"));
    };
    let command = match map.remove("command") {
        Some(Value::String(s)) => Command::parse(&s)
            .ok_or_else(|| config_error(format!("command: unknown command `{s}`")))?,
        Some(_) => return Err(config_error("command: expected a string")),
        None => return Err(config_error("command: missing field")),
    };
    if map.get("chain").and_then(|c| c.get("seed")).is_some() {
        return Err(config_error(
            "chain.seed: chain seeds are derived from the top-level `seed`",
        ));
    }
    let value = Value::Object(map);
    let mut cfg = match command {
        Command::Fit => RunConfig::Fit(deserialize(value)?),
        Command::Simulate => RunConfig::Simulate(deserialize(value)?),
        Command::Benchmark => RunConfig::Benchmark(deserialize(value)?),
    };
    cfg.resolve_paths(base);
    Ok(cfg)
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn validate_mechanism(path: &str, mech: &MechanismSpec) -> Result<(), CliError> {
    let check = |p: f64, at: String| {
        if (0.0..=1.0).contains(&p) {
            Ok(())
        } else {
            Err(config_error(format!(
                "{at}: probability {p} is outside [0, 1]"
            )))
        }
    };
    match mech {
        MechanismSpec::Bernoulli { p } => check(*p, format!("{path}.bernoulli.p")),
        MechanismSpec::StratifiedBernoulli { probs } => {
            if probs.is_empty() {
                return Err(config_error(format!(
                    "{path}.stratified_bernoulli.probs: empty"
                )));
            }
            probs
                .iter()
                .try_for_each(|(s, &p)| check(p, format!("{path}.stratified_bernoulli.probs.{s}")))
        }
    }
}

impl RunConfig {
    pub fn command(&self) -> Command {
        match self {
            RunConfig::Fit(_) => Command::Fit,
            RunConfig::Simulate(_) => Command::Simulate,
            RunConfig::Benchmark(_) => Command::Benchmark,
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        match self {
            RunConfig::Fit(f) => {
                resolve(base, &mut f.data);
                if let NetworkSource::Edges { path } = &mut f.network {
                    resolve(base, path);
                }
                if let Some(o) = &mut f.output {
                    resolve(base, o);
                }
            }
            RunConfig::Simulate(s) => {
                if let Some(o) = &mut s.output {
                    resolve(base, o);
                }
            }
            RunConfig::Benchmark(b) => {
                if let Some(o) = &mut b.output {
                    resolve(base, o);
                }
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            RunConfig::Fit(f) => f.seed,
            RunConfig::Simulate(s) => s.seed,
            RunConfig::Benchmark(b) => b.seed,
        }
    }

    pub fn output(&self) -> Option<&Path> {
        match self {
            RunConfig::Fit(f) => f.output.as_deref(),
            RunConfig::Simulate(s) => s.output.as_deref(),
            RunConfig::Benchmark(b) => b.output.as_deref(),
        }
    }

    /// Applies command-line overrides.
    pub fn override_with(&mut self, seed: Option<u64>, output: Option<PathBuf>) {
        let (s, o) = match self {
            RunConfig::Fit(f) => (&mut f.seed, &mut f.output),
            RunConfig::Simulate(c) => (&mut c.seed, &mut c.output),
            RunConfig::Benchmark(b) => (&mut b.seed, &mut b.output),
        };
        if seed.is_some() {
            *s = seed;
        }
        if output.is_some() {
            *o = output;
        }
    }

    /// Checks every value; errors name the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.seed().is_none() {
            return Err(config_error(
                "seed: missing; pass it in the file or with --seed",
            ));
        }
        if self.output().is_none() {
            return Err(config_error(
                "output: missing; pass it in the file or with --out",
            ));
        }
        match self {
            RunConfig::Fit(f) => f.validate(),
            RunConfig::Simulate(s) => s.validate(),
            RunConfig::Benchmark(b) => b.validate(),
        }
    }

    /// The resolved configuration as written to the manifest.
    pub fn to_value(&self) -> Value {
        let mut v = match self {
            RunConfig::Fit(f) => serde_json::to_value(f),
            RunConfig::Simulate(s) => serde_json::to_value(s),
            RunConfig::Benchmark(b) => serde_json::to_value(b),
        }
        .expect("configuration serialises");
        if let Value::Object(map) = &mut v {
            map.insert(
                "command".into(),
                Value::String(self.command().name().into()),
            );
            // Chain seeds are always derived from the master seed.
            if let Some(Value::Object(chain)) = map.get_mut("chain") {
                chain.remove("seed");
            }
        }
        v
    }
}

impl FitConfig {
    fn validate(&self) -> Result<(), CliError> {
        if !self.data.is_file() {
            return Err(config_error(format!(
                "data: no such file {}",
                self.data.display()
            )));
        }
        match &self.network {
            NetworkSource::Edges { path } if !path.is_file() => {
                return Err(config_error(format!(
                    "network.path: no such file {}",
                    path.display()
                )))
            }
            NetworkSource::InverseDistance { cutoff, .. }
                if !(*cutoff > 0.0 && cutoff.is_finite()) =>
            {
                return Err(config_error(format!(
                    "network.cutoff: {cutoff} must be positive"
                )))
            }
            _ => {}
        }
        if self.features.is_empty() {
            return Err(config_error(
                "features: at least one feature term is required",
            ));
        }
        if self.estimands.is_empty() {
            return Err(config_error("estimands: at least one estimand is required"));
        }
        if let Some(m) = &self.mechanism {
            validate_mechanism("mechanism", m)?;
        }
        for (i, q) in self.estimands.iter().enumerate() {
            match q {
                QuerySpec::EAte { mech, .. } | QuerySpec::EAse { mech, .. } => match mech {
                    Some(m) => validate_mechanism(&format!("estimands[{i}].mech"), m)?,
                    None if self.mechanism.is_none() => {
                        return Err(config_error(format!(
                            "estimands[{i}].mech: missing and no default `mechanism` given"
                        )))
                    }
                    None => {}
                },
                _ => {}
            }
        }
        self.priors.validate().map_err(|e| at("priors", e))?;
        self.chain.validate().map_err(|e| at("chain", e))?;
        if self.priors.k_init > self.chain.k_max {
            return Err(config_error("priors.k_init: exceeds chain.k_max"));
        }
        Ok(())
    }
}

impl SimulateConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.truth_draws < 1 {
            return Err(config_error("truth_draws: must be at least 1"));
        }
        match &self.design {
            SimDesign::Network { graph, n, dgp } => {
                if *n < 2 {
                    return Err(config_error("design.n: must be at least 2"));
                }
                validate_graph("design.graph", graph, *n)?;
                dgp.validate().map_err(|e| at("design.dgp", e))
            }
            SimDesign::Household { household } => {
                if household.households < 1 {
                    return Err(config_error(
                        "design.household.households: must be at least 1",
                    ));
                }
                if household
                    .stratum_probs
                    .iter()
                    .any(|p| !(0.0..=1.0).contains(p))
                {
                    return Err(config_error(
                        "design.household.stratum_probs: outside [0, 1]",
                    ));
                }
                Ok(())
            }
        }
    }
}

fn validate_graph(path: &str, graph: &GraphSpec, n: usize) -> Result<(), CliError> {
    match *graph {
        GraphSpec::ErdosRenyi { p } if !(0.0..=1.0).contains(&p) => {
            Err(config_error(format!("{path}.p: {p} is outside [0, 1]")))
        }
        GraphSpec::BarabasiAlbert { n0, k } if k == 0 || k > n0 || n0 > n => Err(config_error(
            format!("{path}: need 1 <= k <= n0 <= n, got k = {k}, n0 = {n0}, n = {n}"),
        )),
        _ => Ok(()),
    }
}

impl BenchmarkRun {
    fn validate(&self) -> Result<(), CliError> {
        if self.cells.is_empty() {
            return Err(config_error("cells: benchmark grid is empty"));
        }
        for (i, cell) in self.cells.iter().enumerate() {
            let path = format!("cells[{i}]");
            if cell.n < 2 {
                return Err(config_error(format!("{path}.n: must be at least 2")));
            }
            if cell.n_sim < 1 {
                return Err(config_error(format!("{path}.n_sim: must be at least 1")));
            }
            validate_graph(&format!("{path}.graph"), &cell.graph, cell.n)?;
            cell.dgp
                .validate()
                .map_err(|e| at(&format!("{path}.dgp"), e))?;
            if !(cell.dgp.treat_prob > 0.0 && cell.dgp.treat_prob < 1.0) {
                return Err(config_error(format!(
                    "{path}.dgp.treat_prob: must lie in (0, 1)"
                )));
            }
        }
        if self.truth_draws < 1 {
            return Err(config_error("truth_draws: must be at least 1"));
        }
        if self.ease_level != 0.0 && self.ease_level != 1.0 {
            return Err(config_error("ease_level: must be 0 or 1"));
        }
        self.priors.validate().map_err(|e| at("priors", e))?;
        self.chain.validate().map_err(|e| at("chain", e))?;
        self.to_core()
            .validate()
            .map_err(|e| config_error(e.to_string()))
    }
}
