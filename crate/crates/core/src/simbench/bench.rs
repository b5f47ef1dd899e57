use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    dgp_generate, metrics, true_estimand_mc, DgpConfig, MetricsRow, ReplicateRecord, TrueEstimand,
};
use crate::ddpm::{run_chain, ChainConfig};
use crate::error::{invalid, Error, Result};
use crate::estimands::{ht_e_ate, summarize, EstimandQuery};
use crate::model::{AssignmentMechanism, FeatureSpec, FeatureTerm, Priors};
use crate::net::{gen_barabasi_albert, gen_erdos_renyi, pagerank_default, Network};
use crate::rng::{component, derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    ErdosRenyi { p: f64 },
    BarabasiAlbert { n0: usize, k: usize },
}

impl GraphSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GraphSpec::ErdosRenyi { .. } => "erdos_renyi",
            GraphSpec::BarabasiAlbert { .. } => "barabasi_albert",
        }
    }

    pub fn params(&self) -> String {
        match self {
            GraphSpec::ErdosRenyi { p } => format!("p={p}"),
            GraphSpec::BarabasiAlbert { n0, k } => format!("n0={n0};k={k}"),
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Network> {
        match *self {
            GraphSpec::ErdosRenyi { p } => gen_erdos_renyi(n, p, rng),
            GraphSpec::BarabasiAlbert { n0, k } => gen_barabasi_albert(n, n0, k, rng),
        }
    }
}

/// One grid cell: a scenario on a graph family at a sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkCell {
    #[serde(default)]
    pub dgp: DgpConfig,
    pub graph: GraphSpec,
    pub n: usize,
    pub n_sim: usize,
}

fn default_truth_draws() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub cells: Vec<BenchmarkCell>,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub priors: Priors,
    /// Assignments averaged for the ground truth of each replicate.
    #[serde(default = "default_truth_draws")]
    pub truth_draws: usize,
    /// Own-treatment level of the E-ASE estimand.
    #[serde(default)]
    pub ease_level: f64,
    pub seed: u64,
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(invalid("cells", "benchmark grid is empty"));
        }
        for cell in &self.cells {
            cell.dgp.validate()?;
            if cell.n < 2 {
                return Err(invalid("n", "cells need at least 2 units"));
            }
            if cell.n_sim < 1 {
                return Err(invalid("n_sim", "cells need at least 1 replicate"));
            }
            if !(cell.dgp.treat_prob > 0.0 && cell.dgp.treat_prob < 1.0) {
                return Err(invalid(
                    "treat_prob",
                    "the HT baseline needs a probability in (0, 1)",
                ));
            }
        }
        if self.truth_draws < 1 {
            return Err(invalid("truth_draws", "must be at least 1"));
        }
        if self.ease_level != 0.0 && self.ease_level != 1.0 {
            return Err(invalid("ease_level", "must be 0 or 1"));
        }
        self.chain.validate()?;
        self.priors.validate()
    }

    /// Inference features used for every cell.
    pub fn feature_spec() -> FeatureSpec {
        FeatureSpec::new(vec![
            FeatureTerm::WeightedTreatedSum,
            FeatureTerm::ScoredTreatedSum,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DoiEate,
    HtEate,
    DoiEase,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::DoiEate, Method::HtEate, Method::DoiEase];

    pub fn name(self) -> &'static str {
        match self {
            Method::DoiEate => "doi_eate",
            Method::HtEate => "ht_eate",
            Method::DoiEase => "doi_ease",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub cell: usize,
    pub replicate: usize,
    pub method: Method,
    pub record: ReplicateRecord,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub cell: usize,
    pub method: Method,
    pub metrics: MetricsRow,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub cells: Vec<CellMetrics>,
    pub replicates: Vec<ReplicateRow>,
}

fn seconds(value: f64, record: bool) -> String {
    if record {
        format!("{value:.3}")
    } else {
        "NA".into()
    }
}

impl BenchmarkReport {
    pub fn metrics(&self, cell: usize, method: Method) -> Option<&MetricsRow> {
        self.cells
            .iter()
            .find(|c| c.cell == cell && c.method == method)
            .map(|c| &c.metrics)
    }

    /// Columns `scenario,graph,params,N,method,bias,mse,coverage,n_sim,wall_seconds`.
    /// Timings are written as `NA` unless `wall_time` is set, which keeps the
    /// file a pure function of the configuration.
    pub fn write_summary<W: Write>(&self, w: W, wall_time: bool) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "scenario",
            "graph",
            "params",
            "N",
            "method",
            "bias",
            "mse",
            "coverage",
            "n_sim",
            "wall_seconds",
        ])?;
        for c in &self.cells {
            let cell = &self.config.cells[c.cell];
            out.write_record([
                cell.dgp.scenario.to_string(),
                cell.graph.name().to_string(),
                cell.graph.params(),
                cell.n.to_string(),
                c.method.name().to_string(),
                c.metrics.bias.to_string(),
                c.metrics.mse.to_string(),
                c.metrics.coverage.to_string(),
                c.metrics.n_sim.to_string(),
                seconds(c.wall_seconds, wall_time),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Replicate log: `cell,replicate,method,truth,estimate,lo,hi,wall_seconds`.
    pub fn write_replicates<W: Write>(&self, w: W, wall_time: bool) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "cell",
            "replicate",
            "method",
            "truth",
            "estimate",
            "lo",
            "hi",
            "wall_seconds",
        ])?;
        for r in &self.replicates {
            out.write_record([
                r.cell.to_string(),
                r.replicate.to_string(),
                r.method.name().to_string(),
                r.record.truth.to_string(),
                r.record.estimate.to_string(),
                r.record.lo.to_string(),
                r.record.hi.to_string(),
                seconds(r.wall_seconds, wall_time),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn run_replicate(cfg: &BenchmarkConfig, c: usize, r: usize) -> Result<Vec<ReplicateRow>> {
    let cell = &cfg.cells[c];
    let (ci, ri) = (c as u64, r as u64);
    let net = cell
        .graph
        .generate(cell.n, &mut stream(cfg.seed, &[component::GRAPH, ci, ri]))?;
    let scores = pagerank_default(&net)?;
    let sim = dgp_generate(
        &cell.dgp,
        &net,
        Some(&scores),
        &mut stream(cfg.seed, &[component::DGP, ci, ri]),
    )?;
    let mech = AssignmentMechanism::Bernoulli {
        p: cell.dgp.treat_prob,
    };
    let mut truth_rng = stream(cfg.seed, &[component::TRUTH, ci, ri]);
    let true_ate = true_estimand_mc(
        &sim.oracle,
        &mech,
        TrueEstimand::EAte { z: 1.0 },
        cfg.truth_draws,
        &mut truth_rng,
    )?;
    let true_ase = true_estimand_mc(
        &sim.oracle,
        &mech,
        TrueEstimand::EAse { z: cfg.ease_level },
        cfg.truth_draws,
        &mut truth_rng,
    )?;

    let clock = Instant::now();
    let ht = ht_e_ate(&sim.data, cell.dgp.treat_prob)?;
    let ht_seconds = clock.elapsed().as_secs_f64();

    let chain = ChainConfig {
        seed: derive_seed(cfg.seed, &[component::FIT, ci, ri]),
        ..cfg.chain.clone()
    };
    let queries = [
        EstimandQuery::EAte {
            z: 1.0,
            mech: mech.clone(),
        },
        EstimandQuery::EAse {
            z: cfg.ease_level,
            mech,
            subgroup: None,
        },
    ];
    let clock = Instant::now();
    let draws = run_chain(
        &sim.data,
        &BenchmarkConfig::feature_spec(),
        &cfg.priors,
        &chain,
        &queries,
    )?;
    let doi_seconds = clock.elapsed().as_secs_f64();
    let ate = summarize(&draws.estimands[0])?;
    let ase = summarize(&draws.estimands[1])?;

    let row = |method, truth, estimate, lo, hi, wall_seconds| ReplicateRow {
        cell: c,
        replicate: r,
        method,
        record: ReplicateRecord {
            truth,
            estimate,
            lo,
            hi,
        },
        wall_seconds,
    };
    Ok(vec![
        row(
            Method::DoiEate,
            true_ate,
            ate.mean,
            ate.q025,
            ate.q975,
            doi_seconds,
        ),
        row(
            Method::HtEate,
            true_ate,
            ht.estimate,
            ht.lo,
            ht.hi,
            ht_seconds,
        ),
        row(
            Method::DoiEase,
            true_ase,
            ase.mean,
            ase.q025,
            ase.q975,
            doi_seconds,
        ),
    ])
}

/// Runs every replicate of every cell in parallel. Each replicate derives
/// its graph, data, truth and chain streams from `(seed, cell, replicate)`,
/// so results do not depend on the number of threads.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .cells
        .iter()
        .enumerate()
        .flat_map(|(c, cell)| (0..cell.n_sim).map(move |r| (c, r)))
        .collect();
    let results: Vec<Result<Vec<ReplicateRow>>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            run_replicate(cfg, c, r).map_err(|e| Error::Replicate {
                cell: c,
                replicate: r,
                source: Box::new(e),
            })
        })
        .collect();
    let mut replicates = Vec::with_capacity(jobs.len() * Method::ALL.len());
    for res in results {
        replicates.extend(res?);
    }
    let mut cells = Vec::new();
    for c in 0..cfg.cells.len() {
        for method in Method::ALL {
            let rows: Vec<&ReplicateRow> = replicates
                .iter()
                .filter(|r| r.cell == c && r.method == method)
                .collect();
            let records: Vec<ReplicateRecord> = rows.iter().map(|r| r.record).collect();
            cells.push(CellMetrics {
                cell: c,
                method,
                metrics: metrics(&records)?,
                wall_seconds: rows.iter().map(|r| r.wall_seconds).sum(),
            });
        }
    }
    Ok(BenchmarkReport {
        config: cfg.clone(),
        cells,
        replicates,
    })
}
