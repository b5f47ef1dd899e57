//! Mixture updates: DoIs, labels, sticks, concentration and atoms.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use super::linalg::{ridge_normal_equations, GaussianSystem};
use super::{
    clamp_stick, draw_atom_prior, inv_gamma, normal, AlphaKernel, DdpmState, Design, OutcomeFamily,
    OutcomeModel,
};
use crate::error::{invalid, Error, Result};
use crate::model::Priors;

/// Mean and variance of `G_i` given a Gaussian likelihood with variance
/// `lambda` around `residual` and the atom prior `N(m, sigma2)`.
pub fn doi_conditional(lambda: f64, sigma2: f64, m: f64, residual: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda", format!("{lambda} must be positive")));
    }
    if !(sigma2 > 0.0) {
        return Err(invalid("sigma2", format!("{sigma2} must be positive")));
    }
    let s = lambda + sigma2;
    Ok(((lambda * m + residual * sigma2) / s, lambda * sigma2 / s))
}

/// Redraws every realised DoI `G_i^o`.
pub fn step_draw_doi<R: Rng + ?Sized>(
    state: &mut DdpmState,
    outcome: &OutcomeModel,
    design: &Design<'_>,
    rng: &mut R,
) -> Result<()> {
    let data = design.data();
    for i in 0..design.n() {
        let arm = design.arm_of(i);
        let k = state.labels[i];
        let m = state.location(k, design.features(i));
        let eta = design.linear_predictor(outcome, i, data.z()[i], arm);
        let (target, lambda) = match outcome.family {
            OutcomeFamily::Gaussian => (data.y()[i], outcome.lambda[arm]),
            OutcomeFamily::Probit => (outcome.latent[i], 1.0),
        };
        let (mean, var) = doi_conditional(lambda, state.sigma2[k], m, target - eta)?;
        state.g_obs[i] = mean + var.sqrt() * normal(rng);
    }
    Ok(())
}

/// Normalised label probabilities of unit `i`.
pub fn cluster_probabilities(state: &DdpmState, design: &Design<'_>, i: usize) -> Vec<f64> {
    let mut logp = vec![0.0; state.k()];
    log_cluster_weights(state, design.features(i), state.g_obs[i], &mut logp);
    normalise_log(&mut logp);
    logp
}

fn log_cluster_weights(state: &DdpmState, f: &[f64], g: f64, out: &mut [f64]) {
    for (k, lp) in out.iter_mut().enumerate() {
        let r = g - state.location(k, f);
        let s2 = state.sigma2[k];
        *lp = state.weights[k].ln() - 0.5 * s2.ln() - 0.5 * r * r / s2;
    }
}

/// Turns log weights into probabilities in place with log-sum-exp.
fn normalise_log(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    categorical_index(probs, rng.random::<f64>())
}

/// Inverse-CDF lookup of `u ∈ [0, 1)`; rounding slack goes to the last index.
pub(crate) fn categorical_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Redraws every label `C_i`.
pub fn step_draw_clusters<R: Rng + ?Sized>(
    state: &mut DdpmState,
    design: &Design<'_>,
    rng: &mut R,
) -> Result<()> {
    let mut p = vec![0.0; state.k()];
    for i in 0..design.n() {
        log_cluster_weights(state, design.features(i), state.g_obs[i], &mut p);
        if p.iter().all(|x| *x == f64::NEG_INFINITY) || p.iter().any(|x| x.is_nan()) {
            return Err(Error::Numerical(format!(
                "all cluster densities vanish for unit {i}"
            )));
        }
        normalise_log(&mut p);
        state.labels[i] = sample_index(&p, rng);
    }
    Ok(())
}

/// Stick-breaking weights with the implicit final stick `v'_K = 1`.
pub fn stick_weights(sticks: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(sticks.len() + 1);
    let mut rest = 1.0;
    for &v in sticks {
        w.push(v * rest);
        rest *= 1.0 - v;
    }
    w.push(rest);
    w
}

/// Per-cluster counts `n_k = #{C_i = k}` and `m_k = #{C_i > k}`.
pub fn occupancy(labels: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut n = vec![0; k];
    for &c in labels {
        n[c] += 1;
    }
    let mut m = vec![0; k];
    let mut above = 0;
    for c in (0..k).rev() {
        m[c] = above;
        above += n[c];
    }
    (n, m)
}

/// Redraws the free sticks and recomputes the weights.
pub fn step_update_sticks<R: Rng + ?Sized>(state: &mut DdpmState, rng: &mut R) -> Result<()> {
    let (n, m) = occupancy(&state.labels, state.k());
    for (c, v) in state.sticks.iter_mut().enumerate() {
        let beta = Beta::new(1.0 + n[c] as f64, state.alpha + m[c] as f64)
            .map_err(|e| Error::Numerical(format!("stick {c}: {e}")))?;
        *v = clamp_stick(beta.sample(rng));
    }
    state.weights = stick_weights(&state.sticks);
    Ok(())
}

fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p()
}

fn ln_gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    -ln_gamma(shape) - shape * scale.ln() + (shape - 1.0) * x.ln() - x / scale
}

/// Log acceptance ratio for moving `α` to `alpha_star`; the acceptance
/// probability is `min(1, exp(ratio))`.
pub fn alpha_log_ratio(
    kernel: AlphaKernel,
    alpha: f64,
    alpha_star: f64,
    sticks: &[f64],
    labels: &[usize],
    priors: &Priors,
) -> f64 {
    let (n, m) = occupancy(labels, sticks.len() + 1);
    let log_target = |a: f64| {
        let prior = ln_gamma_pdf(a, priors.alpha_shape, priors.alpha_scale);
        let sticks: f64 = match kernel {
            AlphaKernel::Literal | AlphaKernel::CorrectedHastings => sticks
                .iter()
                .enumerate()
                .map(|(c, &v)| ln_beta_pdf(v, 1.0 + n[c] as f64, a + m[c] as f64))
                .sum(),
            AlphaKernel::Exact => sticks
                .iter()
                .map(|&v| a.ln() + (a - 1.0) * (-v).ln_1p())
                .sum(),
        };
        prior + sticks
    };
    let mut ratio = log_target(alpha_star) - log_target(alpha);
    if kernel != AlphaKernel::Literal {
        // Gamma(1, 1) proposal: log q(α) − log q(α*) = α* − α.
        ratio += alpha_star - alpha;
    }
    ratio
}

/// Independence Metropolis–Hastings update of `α`; returns whether the
/// proposal was accepted.
pub fn step_mh_alpha<R: Rng + ?Sized>(
    state: &mut DdpmState,
    priors: &Priors,
    kernel: AlphaKernel,
    rng: &mut R,
) -> Result<bool> {
    let proposal: f64 = Gamma::new(1.0, 1.0).expect("unit gamma").sample(rng);
    let proposal = proposal.max(f64::MIN_POSITIVE);
    let ratio = alpha_log_ratio(
        kernel,
        state.alpha,
        proposal,
        &state.sticks,
        &state.labels,
        priors,
    );
    if ratio.is_nan() {
        return Err(Error::Numerical("alpha acceptance ratio is NaN".into()));
    }
    let u: f64 = rng.random();
    if ratio >= 0.0 || u.ln() < ratio {
        state.alpha = proposal;
        return Ok(true);
    }
    Ok(false)
}

/// Mean and covariance of `γ_k` given `σ_k²` and the members of cluster `k`.
pub fn atom_gamma_posterior(
    design: &Design<'_>,
    members: &[usize],
    g_obs: &[f64],
    sigma2: f64,
    gamma_var: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sys = atom_system(design, members, g_obs, sigma2, gamma_var)?;
    let cov = sys.inverse() * sigma2;
    Ok((
        sys.mean().iter().copied().collect(),
        cov.iter().copied().collect(),
    ))
}

fn atom_system(
    design: &Design<'_>,
    members: &[usize],
    g_obs: &[f64],
    sigma2: f64,
    gamma_var: f64,
) -> Result<GaussianSystem> {
    let (a, r) = ridge_normal_equations(
        members,
        design.feature_matrix(),
        design.q(),
        |i| g_obs[i],
        sigma2 / gamma_var,
    );
    GaussianSystem::new(a, r)
}

/// Redraws every atom: `σ_k²` given the current `γ_k`, then `γ_k` given the
/// new `σ_k²`. Empty clusters are redrawn from the prior.
pub fn step_update_atoms<R: Rng + ?Sized>(
    state: &mut DdpmState,
    design: &Design<'_>,
    priors: &Priors,
    rng: &mut R,
) -> Result<()> {
    let k = state.k();
    let q = state.q();
    let mut members = vec![Vec::new(); k];
    for (i, &c) in state.labels.iter().enumerate() {
        members[c].push(i);
    }
    for c in 0..k {
        if members[c].is_empty() {
            let (gamma, sigma2) = (&mut state.gamma[c * q..(c + 1) * q], &mut state.sigma2[c]);
            draw_atom_prior(gamma, sigma2, priors, rng);
            continue;
        }
        let s: f64 = members[c]
            .iter()
            .map(|&i| {
                let r = state.g_obs[i] - state.location(c, design.features(i));
                r * r
            })
            .sum();
        let shape = priors.sigma_shape + 0.5 * members[c].len() as f64;
        let sigma2 = inv_gamma(shape, priors.sigma_scale + 0.5 * s, rng);
        state.sigma2[c] = sigma2;
        let sys = atom_system(design, &members[c], &state.g_obs, sigma2, priors.gamma_var)?;
        let draw = sys.draw(sigma2, rng);
        state.gamma[c * q..(c + 1) * q].copy_from_slice(&draw);
    }
    Ok(())
}
