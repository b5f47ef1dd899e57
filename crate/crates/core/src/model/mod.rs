//! Datasets and the modelling choices shared by the sampler and benchmarks.

mod assignment;
mod features;
mod priors;

pub use assignment::{assignment_density, sample_assignment, AssignmentMechanism};
pub use features::{eval_features, FeatureSpec, FeatureTerm};
pub use priors::Priors;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentKind {
    #[default]
    Binary,
    /// Levels `0..=levels`, with 0 the control.
    Categorical {
        levels: u32,
    },
    Continuous,
}

/// Treatment vector; `0` always denotes control.
#[derive(Debug, Clone, PartialEq)]
pub struct Treatment {
    kind: TreatmentKind,
    values: Vec<f64>,
}

impl Treatment {
    pub fn new(kind: TreatmentKind, values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            let ok = match kind {
                TreatmentKind::Binary => v == 0.0 || v == 1.0,
                TreatmentKind::Categorical { levels } => {
                    v.fract() == 0.0 && v >= 0.0 && v <= f64::from(levels)
                }
                TreatmentKind::Continuous => v.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidDataset(format!(
                    "treatment {v} of unit {i} is invalid for {kind:?}"
                )));
            }
        }
        Ok(Treatment { kind, values })
    }

    pub fn binary(values: Vec<f64>) -> Result<Self> {
        Self::new(TreatmentKind::Binary, values)
    }

    pub fn kind(&self) -> TreatmentKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Distinct realised levels in increasing order.
    pub fn realized_levels(&self) -> Vec<f64> {
        let mut levels = self.values.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels
    }

    /// Whether `level` is a valid treatment value for this kind.
    pub fn admits(&self, level: f64) -> bool {
        match self.kind {
            TreatmentKind::Binary => level == 0.0 || level == 1.0,
            TreatmentKind::Categorical { levels } => {
                level.fract() == 0.0 && level >= 0.0 && level <= f64::from(levels)
            }
            TreatmentKind::Continuous => level.is_finite(),
        }
    }
}

/// Observed experiment: covariates, treatments, outcomes and the network.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Vec<f64>,
    d: usize,
    treatment: Treatment,
    y: Vec<f64>,
    net: Network,
    scores: Option<Vec<f64>>,
    strata: Option<Vec<usize>>,
    stratum_names: Vec<String>,
}

impl Dataset {
    /// `x` holds one covariate row per unit; every row must have the same length.
    pub fn new(x: Vec<Vec<f64>>, treatment: Treatment, y: Vec<f64>, net: Network) -> Result<Self> {
        let n = net.n();
        let d = x.first().map_or(0, Vec::len);
        if x.len() != n || treatment.len() != n || y.len() != n {
            return Err(Error::InvalidDataset(format!(
                "length mismatch: network has {n} units, x {}, treatment {}, outcome {}",
                x.len(),
                treatment.len(),
                y.len()
            )));
        }
        if let Some(i) = x.iter().position(|row| row.len() != d) {
            return Err(Error::InvalidDataset(format!(
                "covariate row {i} has {} entries, expected {d}",
                x[i].len()
            )));
        }
        if x.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(
                "non-finite covariate or outcome".into(),
            ));
        }
        Ok(Dataset {
            x: x.into_iter().flatten().collect(),
            d,
            treatment,
            y,
            net,
            scores: None,
            strata: None,
            stratum_names: Vec::new(),
        })
    }

    pub fn with_scores(mut self, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != self.n() || scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidDataset(
                "scores must be finite with one entry per unit".into(),
            ));
        }
        self.scores = Some(scores);
        Ok(self)
    }

    /// Stratum ids index into `names`.
    pub fn with_strata(mut self, strata: Vec<usize>, names: Vec<String>) -> Result<Self> {
        if strata.len() != self.n() {
            return Err(Error::InvalidDataset(
                "one stratum label per unit required".into(),
            ));
        }
        if let Some(&s) = strata.iter().find(|&&s| s >= names.len()) {
            return Err(Error::InvalidDataset(format!("stratum id {s} has no name")));
        }
        self.strata = Some(strata);
        self.stratum_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    /// Number of covariate columns.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn x(&self, i: usize, c: usize) -> f64 {
        self.x[i * self.d + c]
    }

    pub fn treatment(&self) -> &Treatment {
        &self.treatment
    }

    pub fn z(&self) -> &[f64] {
        self.treatment.values()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn strata(&self) -> Option<&[usize]> {
        self.strata.as_deref()
    }

    pub fn stratum_names(&self) -> &[String] {
        &self.stratum_names
    }

    /// Fails unless every outcome is 0 or 1.
    pub fn check_binary_outcome(&self) -> Result<()> {
        match self.y.iter().position(|&v| v != 0.0 && v != 1.0) {
            Some(i) => Err(Error::InvalidDataset(format!(
                "outcome {} of unit {i} is not in {{0, 1}}",
                self.y[i]
            ))),
            None => Ok(()),
        }
    }

    /// Fraction of `i`'s neighbours with nonzero treatment under `z`
    /// (0 for isolated units).
    pub fn treated_neighbor_fraction(&self, z: &[f64], i: usize) -> f64 {
        let deg = self.net.degree(i);
        if deg == 0 {
            return 0.0;
        }
        self.net.neighbors(i).filter(|&j| z[j] != 0.0).count() as f64 / deg as f64
    }
}
