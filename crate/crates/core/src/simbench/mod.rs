//! Simulation study: the five data-generating scenarios, Monte Carlo ground
//! truth, and the bias/MSE/coverage harness comparing the DoI sampler with
//! the Horvitz–Thompson estimator.

mod bench;
mod household;

pub use bench::{
    run_benchmark, BenchmarkCell, BenchmarkConfig, BenchmarkReport, CellMetrics, GraphSpec, Method,
    ReplicateRow,
};
pub use household::{household_probit_dataset, HouseholdConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ddpm::normal;
use crate::error::{invalid, Result};
use crate::model::{AssignmentMechanism, Dataset, Treatment};
use crate::net::{Network, PageRankScores};

/// Parameters of the outcome-generating scenarios.
///
/// With `S_i = Σ_{j∈N_i} [P_j] Z_j A_ij / (|N_i| + 1)` (the score factor
/// `P_j` present in scenarios 2 to 5):
///
/// 1. `Xβ + Zτ + ψ1 S + ε`
/// 2. `Xβ + Zτ + ψ1 S + ε`
/// 3. `(Xβ + ψ1 S) exp(ψ2 Z S) + ε`
/// 4. `(Xβ + Zτ + ψ1 S) exp(ψ2 Z S) + ε`
/// 5. `(Xβ + Zτ + ψ1 S) cos(π ψ2 S) + ε`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub scenario: u8,
    pub beta: [f64; 2],
    pub tau: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub treat_prob: f64,
    pub noise_sd: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            scenario: 1,
            beta: [-1.0, 1.5],
            tau: 5.0,
            psi1: 2.0,
            psi2: 0.2,
            treat_prob: 0.5,
            noise_sd: 1.0,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.scenario) {
            return Err(invalid(
                "scenario",
                format!("{} is not in 1..=5", self.scenario),
            ));
        }
        if !(0.0..=1.0).contains(&self.treat_prob) {
            return Err(invalid("treat_prob", "must lie in [0, 1]"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(invalid("noise_sd", "must be nonnegative"));
        }
        let finite = [self.beta[0], self.beta[1], self.tau, self.psi1, self.psi2];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(invalid("dgp", "coefficients must be finite"));
        }
        Ok(())
    }

    fn uses_scores(&self) -> bool {
        self.scenario >= 2
    }
}

/// Evaluates `Y_i(z_i, z_{-i})` for arbitrary assignments.
#[derive(Debug, Clone)]
pub struct Oracle {
    cfg: DgpConfig,
    x2: Vec<f64>,
    eps: Vec<f64>,
    net: Network,
    scores: Option<Vec<f64>>,
}

impl Oracle {
    pub fn config(&self) -> &DgpConfig {
        &self.cfg
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    /// Spillover summary `S_i` under assignment `z`.
    pub fn spillover(&self, i: usize, z: &[f64]) -> f64 {
        let row = self.net.row(i);
        let sum: f64 = match (&self.scores, self.cfg.uses_scores()) {
            (Some(p), true) => row.iter().map(|&(j, a)| p[j] * z[j] * a).sum(),
            _ => row.iter().map(|&(j, a)| z[j] * a).sum(),
        };
        sum / (row.len() as f64 + 1.0)
    }

    /// Noiseless outcome of unit `i` with own treatment `zi` and the others
    /// treated as in `z`.
    pub fn mean_outcome(&self, i: usize, zi: f64, z: &[f64]) -> f64 {
        let c = &self.cfg;
        let s = self.spillover(i, z);
        let xb = c.beta[0] + c.beta[1] * self.x2[i];
        match c.scenario {
            1 | 2 => xb + zi * c.tau + c.psi1 * s,
            3 => (xb + c.psi1 * s) * (c.psi2 * zi * s).exp(),
            4 => (xb + zi * c.tau + c.psi1 * s) * (c.psi2 * zi * s).exp(),
            _ => (xb + zi * c.tau + c.psi1 * s) * (std::f64::consts::PI * c.psi2 * s).cos(),
        }
    }

    pub fn outcome(&self, i: usize, zi: f64, z: &[f64]) -> f64 {
        self.mean_outcome(i, zi, z) + self.eps[i]
    }
}

/// A generated dataset with its potential-outcome oracle.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    pub oracle: Oracle,
}

/// Draws covariates, a Bernoulli assignment and outcomes on `net`. Scores,
/// when given, are attached to the dataset.
pub fn dgp_generate<R: Rng + ?Sized>(
    cfg: &DgpConfig,
    net: &Network,
    scores: Option<&PageRankScores>,
    rng: &mut R,
) -> Result<Simulated> {
    cfg.validate()?;
    let n = net.n();
    if cfg.uses_scores() && scores.is_none() {
        return Err(invalid(
            "scores",
            format!("scenario {} needs unit scores", cfg.scenario),
        ));
    }
    if let Some(s) = scores {
        if s.scores.len() != n {
            return Err(invalid("scores", "one score per unit required"));
        }
    }
    let x2: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
    let z: Vec<f64> = (0..n)
        .map(|_| f64::from(u8::from(rng.random::<f64>() < cfg.treat_prob)))
        .collect();
    let eps: Vec<f64> = (0..n).map(|_| cfg.noise_sd * normal(rng)).collect();
    let oracle = Oracle {
        cfg: cfg.clone(),
        x2,
        eps,
        net: net.clone(),
        scores: scores.map(|s| s.scores.clone()),
    };
    let y = (0..n).map(|i| oracle.outcome(i, z[i], &z)).collect();
    let x = oracle.x2.iter().map(|&v| vec![1.0, v]).collect();
    let mut data = Dataset::new(x, Treatment::binary(z)?, y, net.clone())?;
    if let Some(s) = scores {
        data = data.with_scores(s.scores.clone())?;
    }
    Ok(Simulated { data, oracle })
}

/// Ground-truth estimands evaluated through the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrueEstimand {
    /// `E_π[(1/N) Σ Y_i(z, Z_{-i}) − Y_i(0, Z_{-i})]`.
    EAte { z: f64 },
    /// `E_π[(1/N) Σ Y_i(z, Z_{-i}) − Y_i(z, 0)]`.
    EAse { z: f64 },
}

/// Average of noiseless unit contrasts over `n_draws` assignments from
/// `mech`. The noise `ε_i` is common to both arms of each contrast and
/// cancels exactly.
pub fn true_estimand_mc<R: Rng + ?Sized>(
    oracle: &Oracle,
    mech: &AssignmentMechanism,
    estimand: TrueEstimand,
    n_draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_draws < 1 {
        return Err(invalid("n_draws", "must be at least 1"));
    }
    let n = oracle.n();
    mech.check_units(n, None)?;
    let zero = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0.0;
    for _ in 0..n_draws {
        mech.sample_into(None, &mut z, rng);
        total += contrast(oracle, estimand, &z, &zero);
    }
    Ok(total / n_draws as f64)
}

/// Unit-averaged contrast under one assignment.
pub fn contrast(oracle: &Oracle, estimand: TrueEstimand, z: &[f64], zero: &[f64]) -> f64 {
    let n = oracle.n();
    let sum: f64 = (0..n)
        .map(|i| match estimand {
            TrueEstimand::EAte { z: level } => {
                oracle.outcome(i, level, z) - oracle.outcome(i, 0.0, z)
            }
            TrueEstimand::EAse { z: level } => {
                oracle.outcome(i, level, z) - oracle.outcome(i, level, zero)
            }
        })
        .sum();
    sum / n as f64
}

/// Point and interval estimate of one replicate against its truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub truth: f64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub bias: f64,
    pub mse: f64,
    pub coverage: f64,
    pub n_sim: usize,
}

/// `bias = Σ(τ − τ̂)/n`, `mse = Σ(τ − τ̂)²/n`, `coverage = #{lo ≤ τ ≤ hi}/n`.
pub fn metrics(records: &[ReplicateRecord]) -> Result<MetricsRow> {
    if records.is_empty() {
        return Err(invalid("records", "no replicates"));
    }
    let n = records.len() as f64;
    let bias = records.iter().map(|r| r.truth - r.estimate).sum::<f64>() / n;
    let mse = records
        .iter()
        .map(|r| (r.truth - r.estimate).powi(2))
        .sum::<f64>()
        / n;
    let covered = records
        .iter()
        .filter(|r| r.lo <= r.truth && r.truth <= r.hi)
        .count();
    Ok(MetricsRow {
        bias,
        mse,
        coverage: covered as f64 / n,
        n_sim: records.len(),
    })
}
