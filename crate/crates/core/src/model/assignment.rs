use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Known law of the treatment vector. Units are treated independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMechanism {
    Bernoulli {
        p: f64,
    },
    /// `probs[s]` is the treatment probability in stratum `s`.
    StratifiedBernoulli {
        probs: Vec<f64>,
    },
}

impl AssignmentMechanism {
    /// Degenerate probabilities 0 and 1 are allowed; they express point-mass
    /// assignments used as reference mechanisms.
    pub fn validate(&self) -> Result<()> {
        let check = |p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(invalid(
                    "mechanism",
                    format!("probability {p} is outside [0, 1]"),
                ))
            }
        };
        match self {
            AssignmentMechanism::Bernoulli { p } => check(*p),
            AssignmentMechanism::StratifiedBernoulli { probs } => {
                if probs.is_empty() {
                    return Err(invalid("mechanism", "no stratum probabilities"));
                }
                probs.iter().try_for_each(|&p| check(p))
            }
        }
    }

    fn prob(&self, i: usize, strata: Option<&[usize]>) -> Result<f64> {
        match self {
            AssignmentMechanism::Bernoulli { p } => Ok(*p),
            AssignmentMechanism::StratifiedBernoulli { probs } => {
                let s = strata.ok_or(Error::MissingStrata)?[i];
                probs
                    .get(s)
                    .copied()
                    .ok_or_else(|| invalid("mechanism", format!("no probability for stratum {s}")))
            }
        }
    }

    /// Checks that the mechanism can be applied to `n` units.
    pub fn check_units(&self, n: usize, strata: Option<&[usize]>) -> Result<()> {
        self.validate()?;
        if let AssignmentMechanism::StratifiedBernoulli { probs } = self {
            let strata = strata.ok_or(Error::MissingStrata)?;
            if strata.len() != n {
                return Err(Error::MissingStrata);
            }
            if let Some(&s) = strata.iter().find(|&&s| s >= probs.len()) {
                return Err(invalid(
                    "mechanism",
                    format!("no probability for stratum {s}"),
                ));
            }
        }
        Ok(())
    }

    /// Fills `out` with a fresh assignment. Callers must have run
    /// [`check_units`](Self::check_units).
    pub(crate) fn sample_into<R: Rng + ?Sized>(
        &self,
        strata: Option<&[usize]>,
        out: &mut [f64],
        rng: &mut R,
    ) {
        for (i, z) in out.iter_mut().enumerate() {
            let p = self
                .prob(i, strata)
                .expect("mechanism checked against units");
            *z = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
        }
    }

    pub fn log_density(&self, z: &[f64], strata: Option<&[usize]>) -> Result<f64> {
        let mut total = 0.0;
        for (i, &zi) in z.iter().enumerate() {
            let p = self.prob(i, strata)?;
            let mass = if zi == 1.0 {
                p
            } else if zi == 0.0 {
                1.0 - p
            } else {
                0.0
            };
            total += mass.ln();
        }
        Ok(total)
    }
}

/// Independent draws, one per unit, deterministic given the generator state.
pub fn sample_assignment<R: Rng + ?Sized>(
    mech: &AssignmentMechanism,
    n: usize,
    strata: Option<&[usize]>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    mech.check_units(n, strata)?;
    let mut z = vec![0.0; n];
    mech.sample_into(strata, &mut z, rng);
    Ok(z)
}

/// Probability of the binary assignment `z`; values outside `{0, 1}` have
/// probability zero.
pub fn assignment_density(
    mech: &AssignmentMechanism,
    z: &[f64],
    strata: Option<&[usize]>,
) -> Result<f64> {
    Ok(mech.log_density(z, strata)?.exp())
}
