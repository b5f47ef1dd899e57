use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ddpm::normal;
use crate::error::{invalid, Result};
use crate::model::{AssignmentMechanism, Dataset, Treatment};
use crate::net::Network;

/// Synthetic household-clustered experiment with a binary outcome.
///
/// Households hold one to three units and belong to one of two strata with
/// their own treatment probabilities. The latent outcome index is
/// `b0 + b_age·age + b_grade·grade + τ·Z + ψ·(treated siblings) + ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HouseholdConfig {
    pub households: usize,
    pub stratum_probs: [f64; 2],
    pub intercept: f64,
    pub age_effect: f64,
    pub grade_effect: f64,
    pub tau: f64,
    pub sibling_effect: f64,
}

impl Default for HouseholdConfig {
    fn default() -> Self {
        HouseholdConfig {
            households: 200,
            stratum_probs: [0.628, 0.449],
            intercept: -0.2,
            age_effect: 0.3,
            grade_effect: -0.2,
            tau: 0.5,
            sibling_effect: 0.4,
        }
    }
}

/// Returns the dataset (covariates `1, age, grade`, strata `a`/`b`) and
/// the household id of every unit.
pub fn household_probit_dataset<R: Rng + ?Sized>(
    cfg: &HouseholdConfig,
    rng: &mut R,
) -> Result<(Dataset, Vec<usize>)> {
    if cfg.households < 1 {
        return Err(invalid("households", "must be at least 1"));
    }
    let mut households = Vec::new();
    let mut strata = Vec::new();
    for h in 0..cfg.households {
        let size = match rng.random::<f64>() {
            u if u < 0.45 => 1,
            u if u < 0.8 => 2,
            _ => 3,
        };
        let s = usize::from(rng.random::<bool>());
        for _ in 0..size {
            households.push(h);
            strata.push(s);
        }
    }
    let n = households.len();
    let net = Network::from_groups(&households);
    let mech = AssignmentMechanism::StratifiedBernoulli {
        probs: cfg.stratum_probs.to_vec(),
    };
    mech.check_units(n, Some(&strata))?;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let age = normal(rng);
            let grade = (0.8 * age + 0.6 * normal(rng)).round();
            vec![1.0, age, grade]
        })
        .collect();
    let mut z = vec![0.0; n];
    mech.sample_into(Some(&strata), &mut z, rng);
    let y = (0..n)
        .map(|i| {
            let siblings: f64 = net.neighbors(i).map(|j| z[j]).sum();
            let index = cfg.intercept
                + cfg.age_effect * x[i][1]
                + cfg.grade_effect * x[i][2]
                + cfg.tau * z[i]
                + cfg.sibling_effect * siblings
                + normal(rng);
            f64::from(u8::from(index > 0.0))
        })
        .collect();
    let data = Dataset::new(x, Treatment::binary(z)?, y, net)?
        .with_strata(strata, vec!["a".into(), "b".into()])?;
    Ok((data, households))
}
