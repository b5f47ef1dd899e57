//! Command-line front end: configuration, ingestion, orchestration and
//! reports for the `fit`, `simulate` and `benchmark` subcommands.

pub mod config;
pub mod ingest;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use doi_core::ddpm::run_chain;
use doi_core::net::{pagerank_default, write_edge_list};
use doi_core::rng::{component, derive_seed, stream};
use doi_core::simbench::{
    dgp_generate, household_probit_dataset, run_benchmark, true_estimand_mc, TrueEstimand,
};
use doi_core::{
    summarize, AssignmentMechanism, ChainConfig, Dataset, EstimandQuery, FeatureSpec, OutcomeFamily,
};
use serde_json::{json, Value};
use thiserror::Error;

use config::{
    AssignmentSpec, BenchmarkRun, Command, FitConfig, MechanismSpec, NamedAssignment, QuerySpec,
    RunConfig, SimDesign, SimulateConfig,
};
use ingest::{ingest_dataset, IngestOptions};
use report::{emit_report, FitDiagnostics, LabelledSummary, RunResults};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input data: {0}")]
    Data(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] doi_core::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io {
            context: "i/o failure".into(),
            source: e,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl CliError {
    /// 2 for configuration problems, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "doi",
    version,
    about = "Bayesian causal inference under network interference"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Fit the sampler to a dataset and report posterior summaries.
    Fit(RunArgs),
    /// Generate a synthetic dataset with its ground truth.
    Simulate(RunArgs),
    /// Run a simulation grid and report bias, MSE and coverage.
    Benchmark(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON configuration file (or a manifest.json from an earlier run).
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel replicates. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl CliCommand {
    fn parts(&self) -> (Command, &RunArgs) {
        match self {
            CliCommand::Fit(a) => (Command::Fit, a),
            CliCommand::Simulate(a) => (Command::Simulate, a),
            CliCommand::Benchmark(a) => (Command::Benchmark, a),
        }
    }
}

/// Loads the configuration, applies overrides and validates it.
pub fn load(command: Command, args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = config::parse_config(&args.config)?;
    if cfg.command() != command {
        return Err(CliError::Config(format!(
            "command: file is a `{}` configuration but `{}` was invoked",
            cfg.command().name(),
            command.name()
        )));
    }
    cfg.override_with(args.seed, args.out.clone());
    cfg.validate()?;
    if args.threads == Some(0) {
        return Err(CliError::Config("--threads: must be at least 1".into()));
    }
    Ok(cfg)
}

fn manifest(cfg: &RunConfig) -> Value {
    json!({
        "doi_version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_value(),
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let (command, args) = cli.command.parts();
    let cfg = load(command, args)?;
    let work = || execute(&cfg);
    let results = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let out = cfg.output().expect("validated");
    emit_report(out, &results, &manifest(&cfg))?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

/// Runs a validated configuration.
pub fn execute(cfg: &RunConfig) -> Result<RunResults, CliError> {
    match cfg {
        RunConfig::Fit(f) => fit(f),
        RunConfig::Simulate(s) => simulate(s),
        RunConfig::Benchmark(b) => benchmark(b),
    }
}

fn mechanism(spec: &MechanismSpec, data: &Dataset) -> Result<AssignmentMechanism, CliError> {
    match spec {
        MechanismSpec::Bernoulli { p } => Ok(AssignmentMechanism::Bernoulli { p: *p }),
        MechanismSpec::StratifiedBernoulli { probs } => {
            let names = data.stratum_names();
            let mut out = Vec::with_capacity(names.len());
            for name in names {
                let p = probs.get(name).ok_or_else(|| {
                    CliError::Data(format!(
                        "stratified mechanism has no probability for stratum `{name}`"
                    ))
                })?;
                out.push(*p);
            }
            if let Some(extra) = probs.keys().find(|k| !names.contains(k)) {
                return Err(CliError::Data(format!(
                    "stratum `{extra}` does not occur in the data"
                )));
            }
            Ok(AssignmentMechanism::StratifiedBernoulli { probs: out })
        }
    }
}

fn assignment(spec: &AssignmentSpec, data: &Dataset) -> Vec<f64> {
    match spec {
        AssignmentSpec::Named(NamedAssignment::Observed) => data.z().to_vec(),
        AssignmentSpec::Named(NamedAssignment::AllControl) => vec![0.0; data.n()],
        AssignmentSpec::Named(NamedAssignment::AllTreated) => vec![1.0; data.n()],
        AssignmentSpec::Vector(v) => v.clone(),
    }
}

/// Turns configured queries into sampler queries for `data`.
pub fn build_queries(f: &FitConfig, data: &Dataset) -> Result<Vec<EstimandQuery>, CliError> {
    let default_mech = |m: &Option<MechanismSpec>| -> Result<AssignmentMechanism, CliError> {
        let spec = m.as_ref().or(f.mechanism.as_ref()).expect("validated");
        mechanism(spec, data)
    };
    let queries = f
        .estimands
        .iter()
        .map(|q| {
            Ok(match q {
                QuerySpec::ACate { z, zprime } => EstimandQuery::ACate {
                    z: *z,
                    zprime: assignment(zprime, data),
                },
                QuerySpec::ACase { z, zprime, zstar } => EstimandQuery::ACase {
                    z: *z,
                    zprime: assignment(zprime, data),
                    zstar: assignment(zstar, data),
                },
                QuerySpec::EAte { z, mech } => EstimandQuery::EAte {
                    z: *z,
                    mech: default_mech(mech)?,
                },
                QuerySpec::EAse { z, mech, subgroup } => EstimandQuery::EAse {
                    z: *z,
                    mech: default_mech(mech)?,
                    subgroup: subgroup.clone(),
                },
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    for (i, q) in queries.iter().enumerate() {
        q.validate(data)
            .map_err(|e| CliError::Data(format!("estimands[{i}]: {e}")))?;
    }
    Ok(queries)
}

fn fit(f: &FitConfig) -> Result<RunResults, CliError> {
    let seed = f.seed.expect("validated");
    let opts = IngestOptions {
        network: f.network.clone(),
        intercept: f.intercept,
        treatment: f.treatment,
        scores: f.scores,
        needs_scores: IngestOptions::needs_scores(&f.features),
        binary_outcome: f.chain.family == OutcomeFamily::Probit,
    };
    let ingested = ingest_dataset(&f.data, &opts)?;
    if ingested.mirrored > 0 {
        eprintln!("mirrored {} one-directional edge(s)", ingested.mirrored);
    }
    let data = &ingested.dataset;
    let queries = build_queries(f, data)?;
    let spec = FeatureSpec::new(f.features.clone());
    let chain = ChainConfig {
        seed: derive_seed(seed, &[component::FIT]),
        ..f.chain.clone()
    };
    let draws = run_chain(data, &spec, &f.priors, &chain, &queries)?;
    let summaries = draws
        .labels
        .iter()
        .zip(&draws.estimands)
        .map(|(label, d)| {
            Ok(LabelledSummary {
                estimand: label.clone(),
                row: summarize(d)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let diag = &draws.diagnostics;
    let diagnostics = FitDiagnostics {
        sweeps: diag.sweeps,
        retained: draws.len(),
        alpha_acceptance: diag.alpha_acceptance,
        final_k: diag.final_k,
        growth: diag.growth.clone(),
        sign_violations: diag.sign_violations,
        mean_occupied: draws.occupied.iter().sum::<usize>() as f64 / draws.len() as f64,
        units: data.n(),
        mirrored_edges: ingested.mirrored,
        households: ingested.households,
        pagerank_scores: ingested.pagerank,
    };
    Ok(RunResults::Fit {
        summaries,
        draws,
        diagnostics,
    })
}

fn unit_table(
    data: &Dataset,
    skip_intercept: bool,
    scores: Option<&[f64]>,
    households: Option<&[usize]>,
) -> Result<Vec<u8>, CliError> {
    let first = usize::from(skip_intercept);
    let d = data.d() - first;
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["unit_id", "stratum", "treatment", "outcome"]
        .map(String::from)
        .to_vec();
    header.extend((1..=d).map(|k| format!("x{k}")));
    if scores.is_some() {
        header.push("score".into());
    }
    if households.is_some() {
        header.push("household".into());
    }
    out.write_record(&header)?;
    for i in 0..data.n() {
        let stratum = match data.strata() {
            Some(s) => data.stratum_names()[s[i]].clone(),
            None => "all".into(),
        };
        let mut row = vec![
            i.to_string(),
            stratum,
            data.z()[i].to_string(),
            data.y()[i].to_string(),
        ];
        row.extend(data.x_row(i)[first..].iter().map(f64::to_string));
        if let Some(s) = scores {
            row.push(s[i].to_string());
        }
        if let Some(h) = households {
            row.push(h[i].to_string());
        }
        out.write_record(&row)?;
    }
    out.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

fn simulate(s: &SimulateConfig) -> Result<RunResults, CliError> {
    let seed = s.seed.expect("validated");
    match &s.design {
        SimDesign::Network { graph, n, dgp } => {
            let net = graph.generate(*n, &mut stream(seed, &[component::GRAPH]))?;
            let pr = pagerank_default(&net)?;
            let sim = dgp_generate(dgp, &net, Some(&pr), &mut stream(seed, &[component::DGP]))?;
            let mech = AssignmentMechanism::Bernoulli { p: dgp.treat_prob };
            let mut rng = stream(seed, &[component::TRUTH]);
            let mut truth = serde_json::Map::new();
            for est in [
                TrueEstimand::EAte { z: 1.0 },
                TrueEstimand::EAse { z: 0.0 },
                TrueEstimand::EAse { z: 1.0 },
            ] {
                let label = match est {
                    TrueEstimand::EAte { z } => format!("e_ate(z={z})"),
                    TrueEstimand::EAse { z } => format!("e_ase(z={z})"),
                };
                let v = true_estimand_mc(&sim.oracle, &mech, est, s.truth_draws, &mut rng)?;
                truth.insert(label, json!(v));
            }
            let mut edges = Vec::new();
            write_edge_list(&net, &mut edges)?;
            Ok(RunResults::Simulate {
                units: unit_table(&sim.data, true, Some(&pr.scores), None)?,
                edges: Some(edges),
                truth: json!({ "treat_prob": dgp.treat_prob, "truth_draws": s.truth_draws, "estimands": truth }),
            })
        }
        SimDesign::Household { household } => {
            let (data, households) =
                household_probit_dataset(household, &mut stream(seed, &[component::DGP]))?;
            Ok(RunResults::Simulate {
                units: unit_table(&data, true, None, Some(&households))?,
                edges: None,
                truth: json!({
                    "households": household.households,
                    "units": data.n(),
                    "stratum_probs": household.stratum_probs,
                }),
            })
        }
    }
}

fn benchmark(b: &BenchmarkRun) -> Result<RunResults, CliError> {
    let report = run_benchmark(&b.to_core())?;
    Ok(RunResults::Benchmark {
        report,
        wall_time: b.wall_time,
    })
}
