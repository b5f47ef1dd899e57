//! Chain orchestration: initialisation, sweeps, truncation growth and
//! estimand recording.

use std::io::Write;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::impute::{draw_expected_effect_samples, impute_counterfactuals};
use super::outcome::{draw_latent, step_probit_augmentation, step_update_outcome_gaussian};
use super::steps::{
    step_draw_clusters, step_draw_doi, step_mh_alpha, step_update_atoms, step_update_sticks,
    stick_weights,
};
use super::{
    clamp_stick, draw_atom_prior, ChainConfig, DdpmState, Design, OutcomeFamily, OutcomeModel,
};
use crate::error::{Error, Result};
use crate::estimands::{a_case, a_cate, e_ase, e_ate, EstimandQuery};
use crate::model::{AssignmentMechanism, Dataset, FeatureSpec, Priors};
use crate::rng::{component, stream};

/// What happened during one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepInfo {
    pub alpha_accepted: bool,
    pub sign_violations: usize,
}

/// One pass over the full conditionals: DoIs, labels, sticks, `α`, atoms,
/// then the Y-model (latent variables before `β` for the probit family).
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut DdpmState,
    outcome: &mut OutcomeModel,
    design: &Design<'_>,
    priors: &Priors,
    cfg: &ChainConfig,
    rng: &mut R,
) -> Result<SweepInfo> {
    step_draw_doi(state, outcome, design, rng)?;
    step_draw_clusters(state, design, rng)?;
    step_update_sticks(state, rng)?;
    let alpha_accepted = step_mh_alpha(state, priors, cfg.alpha_kernel, rng)?;
    step_update_atoms(state, design, priors, rng)?;
    let sign_violations = match outcome.family {
        OutcomeFamily::Gaussian => {
            step_update_outcome_gaussian(outcome, state, design, priors, rng)?;
            0
        }
        OutcomeFamily::Probit => {
            step_probit_augmentation(outcome, state, design, priors, cfg.probit_offset, rng)?
        }
    };
    Ok(SweepInfo {
        alpha_accepted,
        sign_violations,
    })
}

/// Raises the truncation level to `new_k`. The former implicit last stick
/// and all new sticks are drawn from `Beta(1, α)`, new atoms from the prior.
pub fn grow_truncation<R: Rng + ?Sized>(
    state: &mut DdpmState,
    new_k: usize,
    priors: &Priors,
    rng: &mut R,
) -> Result<()> {
    let k = state.k();
    if new_k <= k {
        return Ok(());
    }
    let q = state.q();
    let stick = Beta::new(1.0, state.alpha).map_err(|e| Error::Numerical(e.to_string()))?;
    for _ in k..new_k {
        state.sticks.push(clamp_stick(stick.sample(rng)));
    }
    state.gamma.resize(new_k * q, 0.0);
    state.sigma2.resize(new_k, 0.0);
    for c in k..new_k {
        let (gamma, sigma2) = (&mut state.gamma[c * q..(c + 1) * q], &mut state.sigma2[c]);
        draw_atom_prior(gamma, sigma2, priors, rng);
    }
    state.weights = stick_weights(&state.sticks);
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainDiagnostics {
    pub sweeps: usize,
    pub alpha_acceptance: f64,
    /// Probit latent draws whose sign disagreed with the outcome.
    pub sign_violations: usize,
    pub final_k: usize,
    /// Truncation level after each growth event.
    pub growth: Vec<usize>,
}

/// Retained draws of the chain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PosteriorDraws {
    pub labels: Vec<String>,
    /// `estimands[q][t]`: draw `t` of query `q`.
    pub estimands: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub k: Vec<usize>,
    pub occupied: Vec<usize>,
    /// Flattened `β` (arm-major) per retained draw.
    pub beta: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub diagnostics: ChainDiagnostics,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Trace CSV with columns `draw,alpha,k,occupied` followed by one column
    /// per estimand in query order.
    pub fn write_trace<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![
            "draw".to_string(),
            "alpha".into(),
            "k".into(),
            "occupied".into(),
        ];
        header.extend(self.labels.iter().cloned());
        out.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![
                t.to_string(),
                self.alpha[t].to_string(),
                self.k[t].to_string(),
                self.occupied[t].to_string(),
            ];
            row.extend(self.estimands.iter().map(|e| e[t].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Which imputations each retained sweep needs.
struct Plan {
    a_levels: Vec<f64>,
    assignments: Vec<Vec<f64>>,
    /// Distinct mechanisms with the levels needed under each.
    mechs: Vec<(AssignmentMechanism, Vec<f64>)>,
    masks: Vec<Option<Vec<bool>>>,
    mech_of: Vec<Option<usize>>,
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) -> usize {
    match v.iter().position(|y| *y == x) {
        Some(k) => k,
        None => {
            v.push(x);
            v.len() - 1
        }
    }
}

impl Plan {
    fn new(queries: &[EstimandQuery], design: &Design<'_>) -> Result<Self> {
        let mut plan = Plan {
            a_levels: Vec::new(),
            assignments: Vec::new(),
            mechs: Vec::new(),
            masks: Vec::new(),
            mech_of: Vec::new(),
        };
        for q in queries {
            q.validate(design.data())?;
            design.arm_for_level(q.level())?;
            let mut mask = None;
            let mut mech_of = None;
            match q {
                EstimandQuery::ACate { z, zprime } => {
                    design.arm_for_level(0.0)?;
                    push_unique(&mut plan.a_levels, *z);
                    push_unique(&mut plan.a_levels, 0.0);
                    push_unique(&mut plan.assignments, zprime.clone());
                }
                EstimandQuery::ACase { z, zprime, zstar } => {
                    push_unique(&mut plan.a_levels, *z);
                    push_unique(&mut plan.assignments, zprime.clone());
                    push_unique(&mut plan.assignments, zstar.clone());
                }
                EstimandQuery::EAte { z, mech } => {
                    design.arm_for_level(0.0)?;
                    let k = plan.mech_index(mech);
                    push_unique(&mut plan.mechs[k].1, *z);
                    push_unique(&mut plan.mechs[k].1, 0.0);
                    mech_of = Some(k);
                }
                EstimandQuery::EAse { z, mech, subgroup } => {
                    let k = plan.mech_index(mech);
                    push_unique(&mut plan.mechs[k].1, *z);
                    mech_of = Some(k);
                    if let Some(s) = subgroup {
                        mask = Some(s.mask(design.data())?);
                    }
                }
            }
            plan.masks.push(mask);
            plan.mech_of.push(mech_of);
        }
        Ok(plan)
    }

    fn mech_index(&mut self, mech: &AssignmentMechanism) -> usize {
        match self.mechs.iter().position(|(m, _)| m == mech) {
            Some(k) => k,
            None => {
                self.mechs.push((mech.clone(), Vec::new()));
                self.mechs.len() - 1
            }
        }
    }

    fn evaluate<R: Rng + ?Sized>(
        &self,
        queries: &[EstimandQuery],
        state: &DdpmState,
        outcome: &OutcomeModel,
        design: &Design<'_>,
        mc_draws: usize,
        rng: &mut R,
        out: &mut [Vec<f64>],
    ) -> Result<()> {
        let imputed = if self.assignments.is_empty() {
            None
        } else {
            Some(impute_counterfactuals(
                state,
                outcome,
                design,
                &self.a_levels,
                &self.assignments,
                rng,
            )?)
        };
        let expected = self
            .mechs
            .iter()
            .map(|(mech, levels)| {
                draw_expected_effect_samples(state, outcome, design, mech, levels, mc_draws, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        for (qi, q) in queries.iter().enumerate() {
            let value = match q {
                EstimandQuery::ACate { z, zprime } => {
                    a_cate(imputed.as_ref().expect("planned"), *z, zprime)?
                }
                EstimandQuery::ACase { z, zprime, zstar } => {
                    a_case(imputed.as_ref().expect("planned"), *z, zprime, zstar)?
                }
                EstimandQuery::EAte { z, .. } => {
                    e_ate(&expected[self.mech_of[qi].expect("planned")], *z)?
                }
                EstimandQuery::EAse { z, .. } => e_ase(
                    &expected[self.mech_of[qi].expect("planned")],
                    *z,
                    self.masks[qi].as_deref(),
                )?,
            };
            out[qi].push(value);
        }
        Ok(())
    }
}

/// Runs a chain from prior initialisation and records `cfg.keep` draws of
/// the parameters and of every query.
pub fn run_chain(
    data: &Dataset,
    spec: &FeatureSpec,
    priors: &Priors,
    cfg: &ChainConfig,
    queries: &[EstimandQuery],
) -> Result<PosteriorDraws> {
    priors.validate()?;
    cfg.validate()?;
    if priors.k_init > cfg.k_max {
        return Err(Error::TruncationCap {
            k: priors.k_init,
            cap: cfg.k_max,
        });
    }
    let design = Design::new(data, spec, cfg.family)?;
    let plan = Plan::new(queries, &design)?;
    let mut rng = stream(cfg.seed, &[component::CHAIN]);

    let mut state = DdpmState::from_prior(design.n(), design.q(), priors, &mut rng);
    let mut outcome = OutcomeModel::from_prior(&design, priors, &mut rng);
    if cfg.family == OutcomeFamily::Probit {
        draw_latent(&mut outcome, &state, &design, &mut rng)?;
    }

    let mut draws = PosteriorDraws {
        labels: queries.iter().map(EstimandQuery::label).collect(),
        estimands: vec![Vec::with_capacity(cfg.keep); queries.len()],
        ..PosteriorDraws::default()
    };
    let mut accepted = 0usize;
    let total = cfg.burn_in + cfg.keep * cfg.thin;
    for t in 0..total {
        let info = gibbs_sweep(&mut state, &mut outcome, &design, priors, cfg, &mut rng)?;
        accepted += usize::from(info.alpha_accepted);
        draws.diagnostics.sign_violations += info.sign_violations;

        if t < cfg.burn_in {
            if state.occupied() == state.k() {
                let k = state.k();
                let new_k = ((k as f64 * cfg.k_growth).ceil() as usize).max(k + 1);
                if new_k > cfg.k_max {
                    return Err(Error::TruncationCap {
                        k: new_k,
                        cap: cfg.k_max,
                    });
                }
                grow_truncation(&mut state, new_k, priors, &mut rng)?;
                draws.diagnostics.growth.push(new_k);
            }
            continue;
        }
        if (t - cfg.burn_in + 1) % cfg.thin != 0 {
            continue;
        }
        plan.evaluate(
            queries,
            &state,
            &outcome,
            &design,
            cfg.mc_draws,
            &mut rng,
            &mut draws.estimands,
        )?;
        draws.alpha.push(state.alpha);
        draws.k.push(state.k());
        draws.occupied.push(state.occupied());
        draws.beta.push(outcome.beta.clone());
        draws.lambda.push(outcome.lambda.clone());
    }
    draws.diagnostics.sweeps = total;
    draws.diagnostics.alpha_acceptance = accepted as f64 / total as f64;
    draws.diagnostics.final_k = state.k();
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeatureTerm, Treatment};
    use crate::net::{gen_erdos_renyi, Network};

    fn small_data(seed: u64) -> Dataset {
        let mut rng = stream(seed, &[]);
        let net = gen_erdos_renyi(40, 0.08, &mut rng).unwrap();
        let z: Vec<f64> = (0..40).map(|i| (i % 2) as f64).collect();
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![1.0, super::super::normal(&mut rng)])
            .collect();
        let y = (0..40)
            .map(|i| {
                let s: f64 = net.neighbors(i).map(|j| z[j]).sum();
                -1.0 + 1.5 * x[i][1] + 5.0 * z[i] + 0.5 * s + super::super::normal(&mut rng)
            })
            .collect();
        Dataset::new(x, Treatment::binary(z).unwrap(), y, net).unwrap()
    }

    fn spec() -> FeatureSpec {
        FeatureSpec::new(vec![FeatureTerm::WeightedTreatedSum])
    }

    fn queries() -> Vec<EstimandQuery> {
        vec![
            EstimandQuery::EAte {
                z: 1.0,
                mech: AssignmentMechanism::Bernoulli { p: 0.5 },
            },
            EstimandQuery::ACase {
                z: 0.0,
                zprime: vec![1.0; 40],
                zstar: vec![1.0; 40],
            },
        ]
    }

    #[test]
    fn keep_one() {
        let data = small_data(1);
        let cfg = ChainConfig {
            burn_in: 5,
            keep: 1,
            ..ChainConfig::default()
        };
        let d = run_chain(&data, &spec(), &Priors::default(), &cfg, &queries()).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.estimands.iter().all(|e| e.len() == 1));
        // A-CASE(z, z', z') vanishes draw by draw.
        assert_eq!(d.estimands[1][0], 0.0);
    }

    #[test]
    fn same_seed_same_draws() {
        let data = small_data(2);
        let cfg = ChainConfig {
            burn_in: 20,
            keep: 10,
            thin: 2,
            seed: 99,
            ..ChainConfig::default()
        };
        let a = run_chain(&data, &spec(), &Priors::default(), &cfg, &queries()).unwrap();
        let b = run_chain(&data, &spec(), &Priors::default(), &cfg, &queries()).unwrap();
        assert_eq!(a, b);
        let c = run_chain(
            &data,
            &spec(),
            &Priors::default(),
            &ChainConfig { seed: 100, ..cfg },
            &queries(),
        )
        .unwrap();
        assert_ne!(a.estimands, c.estimands);
    }

    #[test]
    fn truncation_grows_only_during_burn_in() {
        let data = small_data(3);
        let priors = Priors {
            k_init: 2,
            ..Priors::default()
        };
        let cfg = ChainConfig {
            burn_in: 30,
            keep: 30,
            ..ChainConfig::default()
        };
        let d = run_chain(&data, &spec(), &priors, &cfg, &[]).unwrap();
        assert!(!d.diagnostics.growth.is_empty());
        assert!(d.k.iter().all(|&k| k == d.diagnostics.final_k));
    }

    #[test]
    fn truncation_cap_aborts() {
        let data = small_data(4);
        let priors = Priors {
            k_init: 2,
            ..Priors::default()
        };
        let cfg = ChainConfig {
            burn_in: 30,
            keep: 1,
            k_max: 3,
            ..ChainConfig::default()
        };
        assert!(matches!(
            run_chain(&data, &spec(), &priors, &cfg, &[]),
            Err(Error::TruncationCap { cap: 3, .. })
        ));
    }

    #[test]
    fn growth_keeps_weights_normalised() {
        let mut rng = stream(5, &[]);
        let priors = Priors::default();
        let mut state = DdpmState::from_prior(10, 2, &priors, &mut rng);
        grow_truncation(&mut state, 25, &priors, &mut rng).unwrap();
        assert_eq!(state.k(), 25);
        assert_eq!(state.sticks.len(), 24);
        assert_eq!(state.gamma.len(), 50);
        assert!((state.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        state.validate().unwrap();
    }

    #[test]
    fn probit_chain_has_no_sign_violations() {
        let mut rng = stream(6, &[]);
        let net = Network::from_groups(&(0..30).map(|i| i / 3).collect::<Vec<_>>());
        let z: Vec<f64> = (0..30).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
        let x: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![1.0, super::super::normal(&mut rng)])
            .collect();
        let y = (0..30)
            .map(|i| (x[i][1] + z[i] > 0.3) as u8 as f64)
            .collect();
        let data = Dataset::new(x, Treatment::binary(z).unwrap(), y, net).unwrap();
        let cfg = ChainConfig {
            burn_in: 20,
            keep: 20,
            family: OutcomeFamily::Probit,
            ..ChainConfig::default()
        };
        let d = run_chain(&data, &spec(), &Priors::default(), &cfg, &queries()[..1]).unwrap();
        assert_eq!(d.diagnostics.sign_violations, 0);
        assert!(d.estimands[0].iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn trace_layout() {
        let data = small_data(7);
        let cfg = ChainConfig {
            burn_in: 3,
            keep: 2,
            ..ChainConfig::default()
        };
        let d = run_chain(&data, &spec(), &Priors::default(), &cfg, &queries()).unwrap();
        let mut buf = Vec::new();
        d.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            format!("draw,alpha,k,occupied,{},{}", d.labels[0], d.labels[1])
        );
        assert_eq!(lines.count(), 2);
    }
}
