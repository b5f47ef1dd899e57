//! Blocked Gibbs sampler for the DoI model.
//!
//! The observed outcome of unit `i` under treatment `z` is
//! `Y_i = X_i β_z + G_i + ε_i` with `ε_i ~ N(0, λ_z)` (or the probit link
//! `Y_i = 1{X_i β_z + G_i + ε_i > 0}` with unit variance). The DoI `G_i` has
//! the truncated stick-breaking mixture prior
//! `G_i | C_i = k ~ N(γ_k · f_i, σ_k²)`, `P(C_i = k) = w_k`.
//!
//! Steps of one sweep, in order: DoIs, labels, sticks, `α`, atoms, outcome
//! parameters. Counterfactual imputation follows each retained sweep.

mod chain;
mod impute;
mod linalg;
mod outcome;
mod steps;
mod truncnorm;

pub use chain::{
    gibbs_sweep, grow_truncation, run_chain, ChainDiagnostics, PosteriorDraws, SweepInfo,
};
pub use impute::{
    draw_expected_effect_samples, impute_counterfactuals, ExpectedEffectDraws, ImputedOutcomes,
};
pub use outcome::{
    beta_posterior, probit_beta_posterior, step_probit_augmentation, step_update_outcome_gaussian,
};
pub use steps::{
    alpha_log_ratio, atom_gamma_posterior, cluster_probabilities, doi_conditional, occupancy,
    step_draw_clusters, step_draw_doi, step_mh_alpha, step_update_atoms, step_update_sticks,
    stick_weights,
};
pub use truncnorm::sample_truncated_normal;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Dataset, FeatureSpec, Priors, TreatmentKind};

/// Acceptance rule of the Metropolis–Hastings update for `α`.
///
/// All variants propose `α* ~ Gamma(1, 1)` independently of the current value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaKernel {
    /// Ratio of `p(α) Π_k Beta(v'_k | 1 + n_k, α + m_k)` at `α*` and `α`.
    #[default]
    Literal,
    /// [`Literal`](Self::Literal) times the proposal ratio `q(α) / q(α*)`.
    CorrectedHastings,
    /// Targets the full conditional `p(α) Π_k Beta(v'_k | 1, α)` with the
    /// proposal correction; this is the kernel that leaves the joint
    /// posterior invariant.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeFamily {
    #[default]
    Gaussian,
    Probit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub keep: usize,
    /// Retain every `thin`-th post-burn-in sweep.
    pub thin: usize,
    pub seed: u64,
    /// Multiplicative growth of the truncation level during burn-in.
    pub k_growth: f64,
    /// Hard cap on the truncation level.
    pub k_max: usize,
    /// Monte Carlo assignments per sweep for expected-effect estimands.
    pub mc_draws: usize,
    pub alpha_kernel: AlphaKernel,
    /// Subtract the DoI from the probit latent variable in the `β` update.
    pub probit_offset: bool,
    pub family: OutcomeFamily,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burn_in: 500,
            keep: 500,
            thin: 1,
            seed: 0,
            k_growth: 2.0,
            k_max: 512,
            mc_draws: 20,
            alpha_kernel: AlphaKernel::Literal,
            probit_offset: true,
            family: OutcomeFamily::Gaussian,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in < 1 {
            return Err(invalid("burn_in", "must be at least 1"));
        }
        if self.keep < 1 {
            return Err(invalid("keep", "must be at least 1"));
        }
        if self.thin < 1 {
            return Err(invalid("thin", "must be at least 1"));
        }
        if !(self.k_growth > 1.0 && self.k_growth.is_finite()) {
            return Err(invalid(
                "k_growth",
                format!("{} must exceed 1", self.k_growth),
            ));
        }
        if self.k_max < 2 {
            return Err(invalid("k_max", "must be at least 2"));
        }
        if self.mc_draws < 1 {
            return Err(invalid("mc_draws", "must be at least 1"));
        }
        Ok(())
    }
}

/// Sticks are kept strictly inside (0, 1) so that log weights stay finite.
pub(crate) fn clamp_stick(v: f64) -> f64 {
    v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub(crate) fn inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
    (scale / g).max(f64::MIN_POSITIVE)
}

pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Mixture part of the sampler state.
#[derive(Debug, Clone, PartialEq)]
pub struct DdpmState {
    /// Free sticks `v'_1..v'_{K-1}`; `v'_K = 1` is implicit.
    pub sticks: Vec<f64>,
    pub weights: Vec<f64>,
    /// Row-major `K × q` atom coefficients.
    pub gamma: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub alpha: f64,
    /// Zero-based cluster labels.
    pub labels: Vec<usize>,
    pub g_obs: Vec<f64>,
    q: usize,
}

impl DdpmState {
    /// Builds a state from explicit parts; weights are derived from the sticks.
    pub fn new(
        sticks: Vec<f64>,
        gamma: Vec<f64>,
        sigma2: Vec<f64>,
        alpha: f64,
        labels: Vec<usize>,
        g_obs: Vec<f64>,
    ) -> Result<Self> {
        let k = sticks.len() + 1;
        if sigma2.len() != k || gamma.len() % k != 0 {
            return Err(invalid(
                "atoms",
                "atom count disagrees with the stick count",
            ));
        }
        if labels.len() != g_obs.len() {
            return Err(invalid("labels", "one label and one DoI per unit required"));
        }
        let q = gamma.len() / k;
        let state = DdpmState {
            weights: stick_weights(&sticks),
            sticks,
            gamma,
            sigma2,
            alpha,
            labels,
            g_obs,
            q,
        };
        state.validate()?;
        Ok(state)
    }

    /// Draws every component from the prior; labels are uniform and `G^o = 0`.
    pub fn from_prior<R: Rng + ?Sized>(n: usize, q: usize, priors: &Priors, rng: &mut R) -> Self {
        let k = priors.k_init;
        let alpha = Gamma::new(priors.alpha_shape, priors.alpha_scale)
            .expect("validated priors")
            .sample(rng)
            .max(f64::MIN_POSITIVE);
        let stick = Beta::new(1.0, alpha).expect("positive alpha");
        let sticks: Vec<f64> = (0..k - 1).map(|_| clamp_stick(stick.sample(rng))).collect();
        let mut gamma = vec![0.0; k * q];
        let mut sigma2 = vec![0.0; k];
        for c in 0..k {
            draw_atom_prior(&mut gamma[c * q..(c + 1) * q], &mut sigma2[c], priors, rng);
        }
        let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
        DdpmState {
            weights: stick_weights(&sticks),
            sticks,
            gamma,
            sigma2,
            alpha,
            labels,
            g_obs: vec![0.0; n],
            q,
        }
    }

    pub fn k(&self) -> usize {
        self.sigma2.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn gamma_k(&self, k: usize) -> &[f64] {
        &self.gamma[k * self.q..(k + 1) * self.q]
    }

    /// Atom location `γ_k · f`.
    pub fn location(&self, k: usize, f: &[f64]) -> f64 {
        self.gamma_k(k).iter().zip(f).map(|(g, x)| g * x).sum()
    }

    /// Number of clusters with at least one unit.
    pub fn occupied(&self) -> usize {
        let mut seen = vec![false; self.k()];
        for &c in &self.labels {
            seen[c] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if self.sticks.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(invalid("sticks", "every free stick must lie in (0, 1)"));
        }
        if self.sigma2.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("sigma2", "atom variances must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", "must be positive"));
        }
        if self.labels.iter().any(|&c| c >= k) {
            return Err(invalid("labels", "label outside 0..K"));
        }
        Ok(())
    }
}

pub(crate) fn draw_atom_prior<R: Rng + ?Sized>(
    gamma: &mut [f64],
    sigma2: &mut f64,
    priors: &Priors,
    rng: &mut R,
) {
    let sd = priors.gamma_var.sqrt();
    for g in gamma.iter_mut() {
        *g = sd * normal(rng);
    }
    *sigma2 = inv_gamma(priors.sigma_shape, priors.sigma_scale, rng);
}

/// Y-model parameters, one block per treatment arm.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    pub family: OutcomeFamily,
    /// Row-major `arms × p` regression coefficients.
    pub beta: Vec<f64>,
    /// Per-arm noise variance; fixed at 1 for the probit family.
    pub lambda: Vec<f64>,
    /// Probit latent variables, empty for the Gaussian family.
    pub latent: Vec<f64>,
    p: usize,
}

impl OutcomeModel {
    pub fn new(family: OutcomeFamily, beta: Vec<f64>, lambda: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 || beta.len() != lambda.len() * p {
            return Err(invalid("beta", "expected one coefficient block per arm"));
        }
        if lambda.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(invalid("lambda", "noise variances must be positive"));
        }
        Ok(OutcomeModel {
            family,
            beta,
            lambda,
            latent: Vec::new(),
            p,
        })
    }

    pub fn from_prior<R: Rng + ?Sized>(design: &Design<'_>, priors: &Priors, rng: &mut R) -> Self {
        let (arms, p) = (design.arms(), design.p());
        let sd = priors.beta_var.sqrt();
        let beta = (0..arms * p).map(|_| sd * normal(rng)).collect();
        let lambda = match design.family {
            OutcomeFamily::Gaussian => (0..arms)
                .map(|_| inv_gamma(priors.lambda_shape, priors.lambda_scale, rng))
                .collect(),
            OutcomeFamily::Probit => vec![1.0; arms],
        };
        OutcomeModel {
            family: design.family,
            beta,
            lambda,
            latent: Vec::new(),
            p,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn arms(&self) -> usize {
        self.lambda.len()
    }

    pub fn beta_arm(&self, arm: usize) -> &[f64] {
        &self.beta[arm * self.p..(arm + 1) * self.p]
    }
}

/// Fixed design quantities derived once from a dataset: realised features,
/// treatment arms and Y-model regressors.
#[derive(Debug, Clone)]
pub struct Design<'a> {
    data: &'a Dataset,
    spec: &'a FeatureSpec,
    family: OutcomeFamily,
    /// Realised features, row-major `N × q`.
    features: Vec<f64>,
    /// Features under the all-control assignment.
    zero_features: Vec<f64>,
    /// Treatment value of each arm; empty when the treatment is a regressor.
    arm_levels: Vec<f64>,
    arm_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    /// Realised regressors, row-major `N × p`.
    regressors: Vec<f64>,
    p: usize,
}

impl<'a> Design<'a> {
    pub fn new(data: &'a Dataset, spec: &'a FeatureSpec, family: OutcomeFamily) -> Result<Self> {
        spec.validate(data)?;
        if data.d() == 0 {
            return Err(Error::InvalidDataset(
                "at least one covariate column is required".into(),
            ));
        }
        if family == OutcomeFamily::Probit {
            data.check_binary_outcome()?;
        }
        let n = data.n();
        let z = data.z();
        let continuous = data.treatment().kind() == TreatmentKind::Continuous;
        let (arm_levels, arm_of, p) = if continuous {
            (Vec::new(), vec![0; n], data.d() + 1)
        } else {
            let levels = data.treatment().realized_levels();
            let arm_of = z
                .iter()
                .map(|v| levels.iter().position(|l| l == v).expect("realized level"))
                .collect();
            (levels, arm_of, data.d())
        };
        let arms = arm_levels.len().max(1);
        let mut members = vec![Vec::new(); arms];
        for (i, &a) in arm_of.iter().enumerate() {
            members[a].push(i);
        }
        let mut design = Design {
            data,
            spec,
            family,
            features: spec.matrix(data, z),
            zero_features: spec.matrix(data, &vec![0.0; n]),
            arm_levels,
            arm_of,
            members,
            regressors: Vec::with_capacity(n * p),
            p,
        };
        let mut row = vec![0.0; p];
        for i in 0..n {
            design.fill_regressors(i, z[i], &mut row);
            design.regressors.extend_from_slice(&row);
        }
        Ok(design)
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn spec(&self) -> &'a FeatureSpec {
        self.spec
    }

    pub fn family(&self) -> OutcomeFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn q(&self) -> usize {
        self.spec.q()
    }

    /// Number of Y-model regressors per arm.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn arms(&self) -> usize {
        self.members.len()
    }

    pub fn arm_levels(&self) -> &[f64] {
        &self.arm_levels
    }

    pub fn arm_of(&self, i: usize) -> usize {
        self.arm_of[i]
    }

    pub fn members(&self, arm: usize) -> &[usize] {
        &self.members[arm]
    }

    /// Realised features of unit `i`.
    pub fn features(&self, i: usize) -> &[f64] {
        let q = self.q();
        &self.features[i * q..(i + 1) * q]
    }

    pub(crate) fn feature_matrix(&self) -> &[f64] {
        &self.features
    }

    pub(crate) fn zero_features(&self, i: usize) -> &[f64] {
        let q = self.q();
        &self.zero_features[i * q..(i + 1) * q]
    }

    pub(crate) fn regressor_matrix(&self) -> &[f64] {
        &self.regressors
    }

    pub fn regressors(&self, i: usize) -> &[f64] {
        &self.regressors[i * self.p..(i + 1) * self.p]
    }

    /// Arm whose coefficients describe treatment `level`.
    pub fn arm_for_level(&self, level: f64) -> Result<usize> {
        if !self.data.treatment().admits(level) {
            return Err(Error::UnsupportedLevel(level));
        }
        if self.arm_levels.is_empty() {
            return Ok(0);
        }
        self.arm_levels
            .iter()
            .position(|&l| l == level)
            .ok_or(Error::UnsupportedLevel(level))
    }

    pub(crate) fn fill_regressors(&self, i: usize, level: f64, out: &mut [f64]) {
        let d = self.data.d();
        out[..d].copy_from_slice(self.data.x_row(i));
        if self.arm_levels.is_empty() {
            out[d] = level;
        }
    }

    /// `X_i β_z` for unit `i` at treatment `level`; `arm` must match `level`.
    pub(crate) fn linear_predictor(
        &self,
        outcome: &OutcomeModel,
        i: usize,
        level: f64,
        arm: usize,
    ) -> f64 {
        let x = self.data.x_row(i);
        let beta = outcome.beta_arm(arm);
        let mut eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
        if self.arm_levels.is_empty() {
            eta += level * beta[self.data.d()];
        }
        eta
    }
}
