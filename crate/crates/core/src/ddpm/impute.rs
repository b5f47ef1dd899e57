//! Counterfactual imputation.
//!
//! Draws for different assignments share the per-unit label and noise
//! variates (common random numbers). Under DoI consistency a unit whose
//! neighbourhood is treated identically under two assignments has the same
//! potential outcome under both, and the coupling makes that hold exactly
//! draw by draw.

use rand::Rng;

use super::steps::categorical_index;
use super::{normal, DdpmState, Design, OutcomeFamily, OutcomeModel};
use crate::error::{Error, Result};
use crate::model::AssignmentMechanism;

/// Imputed potential outcomes `Y_i(z, z'_{-i})` keyed by `(z, z')`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImputedOutcomes {
    entries: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl ImputedOutcomes {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores unit-level outcomes for own treatment `level` under `assignment`.
    pub fn insert(&mut self, level: f64, assignment: Vec<f64>, values: Vec<f64>) {
        match self.position(level, &assignment) {
            Some(k) => self.entries[k].2 = values,
            None => self.entries.push((level, assignment, values)),
        }
    }

    fn position(&self, level: f64, assignment: &[f64]) -> Option<usize> {
        self.entries
            .iter()
            .position(|(l, a, _)| *l == level && a.as_slice() == assignment)
    }

    pub fn get(&self, level: f64, assignment: &[f64]) -> Result<&[f64]> {
        self.position(level, assignment)
            .map(|k| self.entries[k].2.as_slice())
            .ok_or_else(|| Error::MissingImputation {
                level,
                assignment: describe(assignment),
            })
    }
}

fn describe(z: &[f64]) -> String {
    if z.len() <= 12 {
        format!("{z:?}")
    } else {
        let treated = z.iter().filter(|&&v| v != 0.0).count();
        format!("<{} units, {treated} nonzero>", z.len())
    }
}

fn check_assignment(design: &Design<'_>, z: &[f64]) -> Result<()> {
    if z.len() != design.n() {
        return Err(Error::InvalidDataset(format!(
            "assignment has {} entries for {} units",
            z.len(),
            design.n()
        )));
    }
    let t = design.data().treatment();
    match z.iter().find(|&&v| !t.admits(v)) {
        Some(&v) => Err(Error::UnsupportedLevel(v)),
        None => Ok(()),
    }
}

/// Shared per-unit variates for one imputation round.
struct Variates {
    cluster_u: Vec<f64>,
    xi: Vec<f64>,
    /// `eps[l][i]`: outcome noise of unit `i` at the `l`-th level.
    eps: Vec<Vec<f64>>,
}

impl Variates {
    fn draw<R: Rng + ?Sized>(n: usize, levels: usize, rng: &mut R) -> Self {
        Variates {
            cluster_u: (0..n).map(|_| rng.random()).collect(),
            xi: (0..n).map(|_| normal(rng)).collect(),
            eps: (0..levels)
                .map(|_| (0..n).map(|_| normal(rng)).collect())
                .collect(),
        }
    }
}

fn outcome_draw(outcome: &OutcomeModel, arm: usize, eta: f64, g: f64, eps: f64) -> f64 {
    match outcome.family {
        OutcomeFamily::Gaussian => eta + g + outcome.lambda[arm].sqrt() * eps,
        OutcomeFamily::Probit => {
            if eta + g + eps > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Imputes `Y_i(z, z'_{-i})` for every listed level `z` and assignment `z'`.
///
/// Units whose neighbours are treated as in the realised assignment keep
/// their realised DoI `G_i^o`; all others get `G_i^u ~ N(γ_C · f_i(z'), σ_C²)`
/// with `C ~ Multinomial(w)`.
pub fn impute_counterfactuals<R: Rng + ?Sized>(
    state: &DdpmState,
    outcome: &OutcomeModel,
    design: &Design<'_>,
    levels: &[f64],
    assignments: &[Vec<f64>],
    rng: &mut R,
) -> Result<ImputedOutcomes> {
    let n = design.n();
    let arms = levels
        .iter()
        .map(|&l| design.arm_for_level(l))
        .collect::<Result<Vec<_>>>()?;
    for z in assignments {
        check_assignment(design, z)?;
    }
    let data = design.data();
    let net = data.net();
    let realized = data.z();
    let spec = design.spec();
    let var = Variates::draw(n, levels.len(), rng);
    let mut f = vec![0.0; design.q()];
    let mut out = ImputedOutcomes::new();
    for z in assignments {
        let g: Vec<f64> = (0..n)
            .map(|i| {
                if net.row(i).iter().all(|&(j, _)| z[j] == realized[j]) {
                    return state.g_obs[i];
                }
                spec.fill(data, z, i, &mut f);
                let c = categorical_index(&state.weights, var.cluster_u[i]);
                state.location(c, &f) + state.sigma2[c].sqrt() * var.xi[i]
            })
            .collect();
        for (l, (&level, &arm)) in levels.iter().zip(&arms).enumerate() {
            let y = (0..n)
                .map(|i| {
                    let eta = design.linear_predictor(outcome, i, level, arm);
                    outcome_draw(outcome, arm, eta, g[i], var.eps[l][i])
                })
                .collect();
            out.insert(level, z.clone(), y);
        }
    }
    Ok(out)
}

/// Per-unit Monte Carlo means over assignments `Z* ~ π` drawn in one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedEffectDraws {
    pub levels: Vec<f64>,
    /// `random[l][i]`: mean of `Y_i(levels[l], Z*_{-i})`.
    pub random: Vec<Vec<f64>>,
    /// `zero[l][i]`: mean of `Y_i(levels[l], 0_{N-1})`.
    pub zero: Vec<Vec<f64>>,
    /// Mean of `G_i*` and of `G_i^0`.
    pub g_random: Vec<f64>,
    pub g_zero: Vec<f64>,
    pub m: usize,
}

impl ExpectedEffectDraws {
    pub(crate) fn level_index(&self, level: f64) -> Result<usize> {
        self.levels
            .iter()
            .position(|&l| l == level)
            .ok_or_else(|| Error::MissingImputation {
                level,
                assignment: "<expected-effect draws>".into(),
            })
    }
}

/// Monte Carlo over `m` assignments from `mech`. For each draw and unit a
/// single label and DoI noise variate is shared by `G*` and `G^0`, and a
/// single outcome noise variate per level is shared by `Y(z, Z*)` and
/// `Y(z, 0)`.
pub fn draw_expected_effect_samples<R: Rng + ?Sized>(
    state: &DdpmState,
    outcome: &OutcomeModel,
    design: &Design<'_>,
    mech: &AssignmentMechanism,
    levels: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<ExpectedEffectDraws> {
    if m < 1 {
        return Err(crate::error::invalid("mc_draws", "must be at least 1"));
    }
    let n = design.n();
    let data = design.data();
    mech.check_units(n, data.strata())?;
    let arms = levels
        .iter()
        .map(|&l| design.arm_for_level(l))
        .collect::<Result<Vec<_>>>()?;
    let eta: Vec<Vec<f64>> = levels
        .iter()
        .zip(&arms)
        .map(|(&l, &a)| {
            (0..n)
                .map(|i| design.linear_predictor(outcome, i, l, a))
                .collect()
        })
        .collect();
    let spec = design.spec();
    let mut zs = vec![0.0; n];
    let mut f = vec![0.0; design.q()];
    let mut acc = ExpectedEffectDraws {
        levels: levels.to_vec(),
        random: vec![vec![0.0; n]; levels.len()],
        zero: vec![vec![0.0; n]; levels.len()],
        g_random: vec![0.0; n],
        g_zero: vec![0.0; n],
        m,
    };
    for _ in 0..m {
        mech.sample_into(data.strata(), &mut zs, rng);
        let var = Variates::draw(n, levels.len(), rng);
        for i in 0..n {
            let c = categorical_index(&state.weights, var.cluster_u[i]);
            let noise = state.sigma2[c].sqrt() * var.xi[i];
            spec.fill(data, &zs, i, &mut f);
            let g_star = state.location(c, &f) + noise;
            let g_zero = state.location(c, design.zero_features(i)) + noise;
            acc.g_random[i] += g_star;
            acc.g_zero[i] += g_zero;
            for l in 0..levels.len() {
                let e = var.eps[l][i];
                acc.random[l][i] += outcome_draw(outcome, arms[l], eta[l][i], g_star, e);
                acc.zero[l][i] += outcome_draw(outcome, arms[l], eta[l][i], g_zero, e);
            }
        }
    }
    let scale = 1.0 / m as f64;
    for v in acc
        .random
        .iter_mut()
        .chain(acc.zero.iter_mut())
        .chain([&mut acc.g_random, &mut acc.g_zero])
    {
        v.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(acc)
}
