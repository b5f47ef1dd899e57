//! Causal effect functionals, posterior summaries and the Horvitz–Thompson
//! baseline.

use serde::{Deserialize, Serialize};

use crate::ddpm::{ExpectedEffectDraws, ImputedOutcomes};
use crate::error::{invalid, Error, Result};
use crate::model::{AssignmentMechanism, Dataset, TreatmentKind};

/// Units selected by their realised neighbourhood. Unset fields match
/// everything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subgroup {
    /// Exact neighbour count `|N_i|`.
    #[serde(default)]
    pub neighbors: Option<usize>,
    /// Fraction of neighbours treated under the realised assignment.
    #[serde(default)]
    pub treated_fraction: Option<f64>,
}

impl Subgroup {
    pub fn matches(&self, data: &Dataset, i: usize) -> bool {
        let deg_ok = self.neighbors.map_or(true, |k| data.net().degree(i) == k);
        let frac_ok = self.treated_fraction.map_or(true, |f| {
            (data.treated_neighbor_fraction(data.z(), i) - f).abs() < 1e-9
        });
        deg_ok && frac_ok
    }

    pub fn mask(&self, data: &Dataset) -> Result<Vec<bool>> {
        let mask: Vec<bool> = (0..data.n()).map(|i| self.matches(data, i)).collect();
        if mask.iter().any(|&m| m) {
            Ok(mask)
        } else {
            Err(Error::EmptySubgroup(format!("{self:?}")))
        }
    }
}

/// A causal estimand evaluated on every retained draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimandQuery {
    /// `(1/N) Σ_i Y_i(z, z'_{-i}) − Y_i(0, z'_{-i})`.
    ACate { z: f64, zprime: Vec<f64> },
    /// `(1/N) Σ_i Y_i(z, z'_{-i}) − Y_i(z, z*_{-i})`.
    ACase {
        z: f64,
        zprime: Vec<f64>,
        zstar: Vec<f64>,
    },
    /// A-CATE averaged over `Z ~ mech`.
    EAte { z: f64, mech: AssignmentMechanism },
    /// A-CASE against the all-control assignment averaged over `Z ~ mech`,
    /// optionally restricted to a subgroup.
    EAse {
        z: f64,
        mech: AssignmentMechanism,
        #[serde(default)]
        subgroup: Option<Subgroup>,
    },
}

impl EstimandQuery {
    pub fn level(&self) -> f64 {
        match *self {
            EstimandQuery::ACate { z, .. }
            | EstimandQuery::ACase { z, .. }
            | EstimandQuery::EAte { z, .. }
            | EstimandQuery::EAse { z, .. } => z,
        }
    }

    /// Default report label, e.g. `e_ate(z=1)`.
    pub fn label(&self) -> String {
        match self {
            EstimandQuery::ACate { z, .. } => format!("a_cate(z={z})"),
            EstimandQuery::ACase { z, .. } => format!("a_case(z={z})"),
            EstimandQuery::EAte { z, .. } => format!("e_ate(z={z})"),
            EstimandQuery::EAse { z, subgroup, .. } => match subgroup {
                None => format!("e_ase(z={z})"),
                Some(s) => {
                    let mut tag = String::new();
                    if let Some(k) = s.neighbors {
                        tag.push_str(&format!(";nb={k}"));
                    }
                    if let Some(f) = s.treated_fraction {
                        tag.push_str(&format!(";rt={f}"));
                    }
                    format!("e_ase(z={z}{tag})")
                }
            },
        }
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let t = data.treatment();
        if !t.admits(self.level()) {
            return Err(Error::UnsupportedLevel(self.level()));
        }
        let check = |v: &[f64]| -> Result<()> {
            if v.len() != data.n() {
                return Err(invalid(
                    "assignment",
                    format!("has {} entries for {} units", v.len(), data.n()),
                ));
            }
            match v.iter().find(|&&x| !t.admits(x)) {
                Some(&x) => Err(Error::UnsupportedLevel(x)),
                None => Ok(()),
            }
        };
        match self {
            EstimandQuery::ACate { zprime, .. } => check(zprime),
            EstimandQuery::ACase { zprime, zstar, .. } => {
                check(zprime)?;
                check(zstar)
            }
            EstimandQuery::EAte { mech, .. } | EstimandQuery::EAse { mech, .. } => {
                if t.kind() == TreatmentKind::Continuous {
                    return Err(invalid(
                        "mech",
                        "Bernoulli mechanisms need a binary or categorical treatment",
                    ));
                }
                mech.check_units(data.n(), data.strata())
            }
        }
    }
}

fn mean_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64
}

pub fn a_cate(imputed: &ImputedOutcomes, z: f64, zprime: &[f64]) -> Result<f64> {
    Ok(mean_diff(
        imputed.get(z, zprime)?,
        imputed.get(0.0, zprime)?,
    ))
}

pub fn a_case(imputed: &ImputedOutcomes, z: f64, zprime: &[f64], zstar: &[f64]) -> Result<f64> {
    Ok(mean_diff(imputed.get(z, zprime)?, imputed.get(z, zstar)?))
}

pub fn e_ate(draws: &ExpectedEffectDraws, z: f64) -> Result<f64> {
    let (l, c) = (draws.level_index(z)?, draws.level_index(0.0)?);
    Ok(mean_diff(&draws.random[l], &draws.random[c]))
}

/// With a mask only the selected units are averaged.
pub fn e_ase(draws: &ExpectedEffectDraws, z: f64, mask: Option<&[bool]>) -> Result<f64> {
    let l = draws.level_index(z)?;
    let (a, b) = (&draws.random[l], &draws.zero[l]);
    match mask {
        None => Ok(mean_diff(a, b)),
        Some(mask) => {
            let (mut s, mut n) = (0.0, 0usize);
            for i in (0..a.len()).filter(|&i| mask[i]) {
                s += a[i] - b[i];
                n += 1;
            }
            if n == 0 {
                return Err(Error::EmptySubgroup("mask selects no unit".into()));
            }
            Ok(s / n as f64)
        }
    }
}

/// Posterior summary in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mean: f64,
    pub sd: f64,
    #[serde(rename = "q2.5")]
    pub q025: f64,
    pub median: f64,
    #[serde(rename = "q97.5")]
    pub q975: f64,
    pub length: f64,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(draws: &[f64]) -> Result<SummaryRow> {
    if draws.len() < 2 {
        return Err(Error::TooFewDraws {
            needed: 2,
            got: draws.len(),
        });
    }
    if draws.iter().any(|d| !d.is_finite()) {
        return Err(Error::Numerical("non-finite draw".into()));
    }
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q025 = quantile_sorted(&sorted, 0.025);
    let q975 = quantile_sorted(&sorted, 0.975);
    Ok(SummaryRow {
        mean,
        sd: var.sqrt(),
        q025,
        median: quantile_sorted(&sorted, 0.5),
        q975,
        length: q975 - q025,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HtEstimate {
    pub estimate: f64,
    pub variance: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Horvitz–Thompson E-ATE under i.i.d. `Bernoulli(p)` assignment.
///
/// The variance estimate bounds the unidentified covariance of the two
/// potential outcomes with Young's inequality, giving
/// `(1/N²) Σ [Z Y²(1−p)/p² + (1−Z) Y² p/(1−p)² + Z Y²/p + (1−Z) Y²/(1−p)]`.
pub fn ht_e_ate(data: &Dataset, p: f64) -> Result<HtEstimate> {
    if data.treatment().kind() != TreatmentKind::Binary {
        return Err(invalid(
            "treatment",
            "the HT baseline needs a binary treatment",
        ));
    }
    ht_from_parts(data.z(), data.y(), p)
}

pub fn ht_from_parts(z: &[f64], y: &[f64], p: f64) -> Result<HtEstimate> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", format!("{p} is outside (0, 1)")));
    }
    if z.len() != y.len() || z.is_empty() {
        return Err(invalid(
            "z",
            "treatment and outcome lengths differ or are zero",
        ));
    }
    let n = z.len() as f64;
    let q = 1.0 - p;
    let (mut est, mut var) = (0.0, 0.0);
    for (&zi, &yi) in z.iter().zip(y) {
        let y2 = yi * yi;
        if zi == 1.0 {
            est += yi / p;
            var += y2 * q / (p * p) + y2 / p;
        } else {
            est -= yi / q;
            var += y2 * p / (q * q) + y2 / q;
        }
    }
    let estimate = est / n;
    let variance = var / (n * n);
    let half = 1.96 * variance.sqrt();
    Ok(HtEstimate {
        estimate,
        variance,
        lo: estimate - half,
        hi: estimate + half,
    })
}
