use std::fmt;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// One covariate of the DoI atom location `μ(T_i, z_{-i}, γ_k) = γ_k · f_i`.
///
/// Sums run over the neighbours `j ∈ N_i`; `A_ij` is the network weight and
/// `P_j` the unit score (e.g. PageRank).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureTerm {
    /// Constant 1.
    Intercept,
    /// `Σ z_j A_ij`.
    WeightedTreatedSum,
    /// `Σ z_j P_j A_ij`.
    ScoredTreatedSum,
    /// `Σ z_j A_ij / (|N_i| + 1)`.
    NormalizedTreatedSum,
    /// `Σ z_j A_ij / |N_i|`, or 0 for isolated units.
    TreatedFraction,
    /// `x_{i,c} − Σ x_{j,c} z_j A_ij / |N_i|`; the sum is 0 for isolated units.
    CovariateGap(usize),
}

impl fmt::Display for FeatureTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureTerm::Intercept => f.write_str("intercept"),
            FeatureTerm::WeightedTreatedSum => f.write_str("weighted_treated_sum"),
            FeatureTerm::ScoredTreatedSum => f.write_str("scored_treated_sum"),
            FeatureTerm::NormalizedTreatedSum => f.write_str("normalized_treated_sum"),
            FeatureTerm::TreatedFraction => f.write_str("treated_fraction"),
            FeatureTerm::CovariateGap(c) => write!(f, "covariate_gap({c})"),
        }
    }
}

/// Ordered list of feature terms; its length is the atom dimension `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSpec {
    terms: Vec<FeatureTerm>,
}

impl FeatureSpec {
    pub fn new(terms: Vec<FeatureTerm>) -> Self {
        FeatureSpec { terms }
    }

    pub fn terms(&self) -> &[FeatureTerm] {
        &self.terms
    }

    pub fn q(&self) -> usize {
        self.terms.len()
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Feature {
                term: "<none>".into(),
                reason: "feature specification is empty".into(),
            });
        }
        for term in &self.terms {
            match *term {
                FeatureTerm::ScoredTreatedSum if data.scores().is_none() => {
                    return Err(Error::Feature {
                        term: term.to_string(),
                        reason: "dataset has no unit scores".into(),
                    })
                }
                FeatureTerm::CovariateGap(c) if c >= data.d() => {
                    return Err(Error::Feature {
                        term: term.to_string(),
                        reason: format!("column {c} out of range for {} covariates", data.d()),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Evaluates every term for unit `i` under the assignment `z`.
    pub fn eval(&self, data: &Dataset, z: &[f64], i: usize) -> Result<Vec<f64>> {
        self.validate(data)?;
        if z.len() != data.n() || i >= data.n() {
            return Err(Error::InvalidDataset(format!(
                "assignment of length {} / unit {i} incompatible with {} units",
                z.len(),
                data.n()
            )));
        }
        let mut out = vec![0.0; self.q()];
        self.fill(data, z, i, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation; the spec must have been validated against `data`.
    pub(crate) fn fill(&self, data: &Dataset, z: &[f64], i: usize, out: &mut [f64]) {
        let net = data.net();
        let row = net.row(i);
        let deg = row.len() as f64;
        let treated_sum = || row.iter().map(|&(j, a)| z[j] * a).sum::<f64>();
        for (slot, term) in out.iter_mut().zip(&self.terms) {
            *slot = match *term {
                FeatureTerm::Intercept => 1.0,
                FeatureTerm::WeightedTreatedSum => treated_sum(),
                FeatureTerm::ScoredTreatedSum => {
                    let p = data.scores().expect("validated");
                    row.iter().map(|&(j, a)| z[j] * p[j] * a).sum()
                }
                FeatureTerm::NormalizedTreatedSum => treated_sum() / (deg + 1.0),
                FeatureTerm::TreatedFraction => {
                    if row.is_empty() {
                        0.0
                    } else {
                        treated_sum() / deg
                    }
                }
                FeatureTerm::CovariateGap(c) => {
                    let spill = if row.is_empty() {
                        0.0
                    } else {
                        row.iter()
                            .map(|&(j, a)| data.x(j, c) * z[j] * a)
                            .sum::<f64>()
                            / deg
                    };
                    data.x(i, c) - spill
                }
            };
        }
    }

    /// Row-major `n × q` feature matrix under assignment `z`.
    pub(crate) fn matrix(&self, data: &Dataset, z: &[f64]) -> Vec<f64> {
        let q = self.q();
        let mut m = vec![0.0; data.n() * q];
        for (i, row) in m.chunks_mut(q.max(1)).enumerate().take(data.n()) {
            self.fill(data, z, i, row);
        }
        m
    }
}

pub fn eval_features(spec: &FeatureSpec, data: &Dataset, z: &[f64], i: usize) -> Result<Vec<f64>> {
    spec.eval(data, z, i)
}
