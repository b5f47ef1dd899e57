//! Y-model updates: conjugate Gaussian arms and probit augmentation.

use rand::Rng;

use super::linalg::{ridge_normal_equations, GaussianSystem};
use super::truncnorm::sample_truncated_normal;
use super::{inv_gamma, DdpmState, Design, OutcomeFamily, OutcomeModel};
use crate::error::{invalid, Result};
use crate::model::Priors;

fn arm_system(
    design: &Design<'_>,
    arm: usize,
    target: impl Fn(usize) -> f64,
    lambda: f64,
    beta_var: f64,
) -> Result<GaussianSystem> {
    let (a, r) = ridge_normal_equations(
        design.members(arm),
        design.regressor_matrix(),
        design.p(),
        target,
        lambda / beta_var,
    );
    GaussianSystem::new(a, r)
}

fn moments(sys: &GaussianSystem, scale: f64) -> (Vec<f64>, Vec<f64>) {
    let cov = sys.inverse() * scale;
    (
        sys.mean().iter().copied().collect(),
        cov.iter().copied().collect(),
    )
}

/// Mean and row-major covariance of `β_z` given `λ_z` and the DoIs.
pub fn beta_posterior(
    design: &Design<'_>,
    arm: usize,
    g_obs: &[f64],
    lambda: f64,
    beta_var: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let y = design.data().y();
    let sys = arm_system(design, arm, |i| y[i] - g_obs[i], lambda, beta_var)?;
    Ok(moments(&sys, lambda))
}

/// Mean `M` and covariance `V` of the probit `β_z` update with prior
/// `N(0, beta_var · I)`. With `offset` the DoI is subtracted from the latent
/// variables before regressing.
pub fn probit_beta_posterior(
    design: &Design<'_>,
    arm: usize,
    latent: &[f64],
    g_obs: &[f64],
    beta_var: f64,
    offset: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sys = probit_system(design, arm, latent, g_obs, beta_var, offset)?;
    Ok(moments(&sys, 1.0))
}

fn probit_system(
    design: &Design<'_>,
    arm: usize,
    latent: &[f64],
    g_obs: &[f64],
    beta_var: f64,
    offset: bool,
) -> Result<GaussianSystem> {
    let shift = if offset { 1.0 } else { 0.0 };
    arm_system(design, arm, |i| latent[i] - shift * g_obs[i], 1.0, beta_var)
}

/// Gaussian family: `λ_z` given the current `β_z`, then `β_z` given the new
/// `λ_z`, for every arm. Arms without units are redrawn from the prior.
pub fn step_update_outcome_gaussian<R: Rng + ?Sized>(
    outcome: &mut OutcomeModel,
    state: &DdpmState,
    design: &Design<'_>,
    priors: &Priors,
    rng: &mut R,
) -> Result<()> {
    let y = design.data().y();
    let z = design.data().z();
    let p = outcome.p();
    for arm in 0..outcome.arms() {
        let members = design.members(arm);
        if members.is_empty() {
            outcome.lambda[arm] = inv_gamma(priors.lambda_shape, priors.lambda_scale, rng);
            let sd = priors.beta_var.sqrt();
            for b in &mut outcome.beta[arm * p..(arm + 1) * p] {
                *b = sd * super::normal(rng);
            }
            continue;
        }
        let ss: f64 = members
            .iter()
            .map(|&i| {
                let r = y[i] - design.linear_predictor(outcome, i, z[i], arm) - state.g_obs[i];
                r * r
            })
            .sum();
        let shape = priors.lambda_shape + 0.5 * members.len() as f64;
        let lambda = inv_gamma(shape, priors.lambda_scale + 0.5 * ss, rng);
        outcome.lambda[arm] = lambda;
        let sys = arm_system(
            design,
            arm,
            |i| y[i] - state.g_obs[i],
            lambda,
            priors.beta_var,
        )?;
        let draw = sys.draw(lambda, rng);
        outcome.beta[arm * p..(arm + 1) * p].copy_from_slice(&draw);
    }
    Ok(())
}

/// Redraws the probit latent variables `v_i`, then `β_z` per arm. Returns the
/// number of latent draws whose sign disagrees with the observed outcome
/// (always 0 for a correct sampler).
pub fn step_probit_augmentation<R: Rng + ?Sized>(
    outcome: &mut OutcomeModel,
    state: &DdpmState,
    design: &Design<'_>,
    priors: &Priors,
    offset: bool,
    rng: &mut R,
) -> Result<usize> {
    if outcome.family != OutcomeFamily::Probit {
        return Err(invalid(
            "family",
            "probit augmentation needs the probit family",
        ));
    }
    draw_latent(outcome, state, design, rng)?;
    let y = design.data().y();
    let violations = outcome
        .latent
        .iter()
        .zip(y)
        .filter(|(v, y)| (**y == 1.0) != (**v > 0.0))
        .count();
    let p = outcome.p();
    for arm in 0..outcome.arms() {
        let sys = probit_system(
            design,
            arm,
            &outcome.latent,
            &state.g_obs,
            priors.beta_var,
            offset,
        )?;
        let draw = sys.draw(1.0, rng);
        outcome.beta[arm * p..(arm + 1) * p].copy_from_slice(&draw);
    }
    Ok(violations)
}

pub(crate) fn draw_latent<R: Rng + ?Sized>(
    outcome: &mut OutcomeModel,
    state: &DdpmState,
    design: &Design<'_>,
    rng: &mut R,
) -> Result<()> {
    let data = design.data();
    outcome.latent.resize(design.n(), 0.0);
    for i in 0..design.n() {
        let arm = design.arm_of(i);
        let mean = design.linear_predictor(outcome, i, data.z()[i], arm) + state.g_obs[i];
        let (lo, hi) = if data.y()[i] == 1.0 {
            (0.0, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, 0.0)
        };
        outcome.latent[i] = sample_truncated_normal(mean, 1.0, lo, hi, rng)?;
    }
    Ok(())
}
