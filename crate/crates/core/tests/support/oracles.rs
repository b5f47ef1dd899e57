//! Statistical oracles for the Gibbs updates, shared by the core integration
//! tests and the acceptance suite.
//!
//! Every closed form here is recomputed by hand (2×2 algebra, textbook
//! Beta / inverse-Gamma / truncated-normal moments) rather than through the
//! sampler's own helpers.

#![allow(dead_code)]

use doi_core::ddpm::{
    gibbs_sweep, step_draw_doi, step_probit_augmentation, step_update_atoms,
    step_update_outcome_gaussian, step_update_sticks, AlphaKernel, ChainConfig, DdpmState, Design,
    OutcomeFamily, OutcomeModel,
};
use doi_core::model::{Dataset, FeatureSpec, FeatureTerm, Priors, Treatment};
use doi_core::net::Network;
use doi_core::rng::stream;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

/// A named z-score.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub z: f64,
}

impl Check {
    pub fn ok(&self, bound: f64) -> bool {
        self.z.is_finite() && self.z.abs() <= bound
    }
}

pub fn worst(checks: &[Check]) -> &Check {
    checks
        .iter()
        .max_by(|a, b| {
            let fa = if a.z.is_finite() {
                a.z.abs()
            } else {
                f64::INFINITY
            };
            let fb = if b.z.is_finite() {
                b.z.abs()
            } else {
                f64::INFINITY
            };
            fa.total_cmp(&fb)
        })
        .expect("at least one check")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// z-scores of the sample mean against `mu` (known variance `var`) and of
/// the mean squared deviation from `mu` against `var` (empirical SE).
pub fn moment_checks(name: &str, xs: &[f64], mu: f64, var: f64) -> Vec<Check> {
    let n = xs.len() as f64;
    let z_mean = (mean(xs) - mu) / (var / n).sqrt();
    let sq: Vec<f64> = xs.iter().map(|x| (x - mu).powi(2)).collect();
    let z_var = (mean(&sq) - var) / (sample_var(&sq) / n).sqrt();
    vec![
        Check {
            name: format!("{name} mean"),
            z: z_mean,
        },
        Check {
            name: format!("{name} var"),
            z: z_var,
        },
    ]
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

type M2 = [[f64; 2]; 2];

fn inv2(a: M2) -> M2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ]
}

/// `(R'R + ridge·I)⁻¹` and `R't` for rows `R` and targets `t`.
fn ridge2(rows: &[[f64; 2]], target: &[f64], ridge: f64) -> (M2, [f64; 2]) {
    let mut a = [[ridge, 0.0], [0.0, ridge]];
    let mut r = [0.0; 2];
    for (row, t) in rows.iter().zip(target) {
        for u in 0..2 {
            r[u] += row[u] * t;
            for v in 0..2 {
                a[u][v] += row[u] * row[v];
            }
        }
    }
    (inv2(a), r)
}

fn mat_vec(a: M2, r: [f64; 2]) -> [f64; 2] {
    [
        a[0][0] * r[0] + a[0][1] * r[1],
        a[1][0] * r[0] + a[1][1] * r[1],
    ]
}

/// Collects standardised residuals `(b − mean) / sd` per component and the
/// Mahalanobis form, which is χ²₂ (mean 2, variance 4) under the correct law.
#[derive(Default)]
struct Whitened {
    comps: [Vec<f64>; 2],
    maha: Vec<f64>,
}

impl Whitened {
    fn push(&mut self, b: &[f64], mean: [f64; 2], cov: M2) {
        let d = [b[0] - mean[0], b[1] - mean[1]];
        for u in 0..2 {
            self.comps[u].push(d[u] / cov[u][u].sqrt());
        }
        let p = inv2(cov);
        self.maha.push(
            d[0] * (p[0][0] * d[0] + p[0][1] * d[1]) + d[1] * (p[1][0] * d[0] + p[1][1] * d[1]),
        );
    }

    fn checks(&self, name: &str) -> Vec<Check> {
        let mut out = Vec::new();
        for u in 0..2 {
            out.extend(moment_checks(
                &format!("{name}[{u}] standardised"),
                &self.comps[u],
                0.0,
                1.0,
            ));
        }
        out.extend(
            moment_checks(&format!("{name} mahalanobis"), &self.maha, 2.0, 4.0)
                .into_iter()
                .take(1),
        );
        out
    }
}

/// The N = 5, K = 2, d = q = 2 toy problem.
pub struct Toy {
    pub data: Dataset,
    pub spec: FeatureSpec,
    pub priors: Priors,
    pub state: DdpmState,
    pub outcome: OutcomeModel,
    /// Covariate rows and hand-evaluated features `(1, Σ_j z_j A_ij)`.
    pub x: [[f64; 2]; 5],
    pub f: [[f64; 2]; 5],
}

const TOY_X: [[f64; 2]; 5] = [[1.0, -0.8], [1.0, 0.3], [1.0, 1.1], [1.0, -0.4], [1.0, 0.6]];
const TOY_Z: [f64; 5] = [1.0, 0.0, 1.0, 0.0, 1.0];
// Path 0-1-2-3-4 with units 0, 2, 4 treated.
const TOY_F: [[f64; 2]; 5] = [[1.0, 0.0], [1.0, 2.0], [1.0, 0.0], [1.0, 2.0], [1.0, 0.0]];

impl Toy {
    pub fn new(y: Vec<f64>, family: OutcomeFamily) -> Self {
        let net = Network::from_edges(5, (0..4).map(|i| (i, i + 1, 1.0))).unwrap();
        let data = Dataset::new(
            TOY_X.iter().map(|r| r.to_vec()).collect(),
            Treatment::binary(TOY_Z.to_vec()).unwrap(),
            y,
            net,
        )
        .unwrap();
        let priors = Priors {
            beta_var: 4.0,
            lambda_shape: 3.0,
            lambda_scale: 2.0,
            gamma_var: 9.0,
            sigma_shape: 3.0,
            sigma_scale: 1.5,
            alpha_shape: 1.0,
            alpha_scale: 1.0,
            k_init: 2,
        };
        let state = DdpmState::new(
            vec![0.6],
            vec![0.5, -0.3, -1.0, 0.8],
            vec![0.7, 1.3],
            1.4,
            vec![0, 1, 1, 0, 1],
            vec![0.2, -0.5, 1.0, 0.4, -0.9],
        )
        .unwrap();
        let lambda = match family {
            OutcomeFamily::Gaussian => vec![0.8, 1.5],
            OutcomeFamily::Probit => vec![1.0, 1.0],
        };
        // Arm 0 is control, arm 1 treated.
        let outcome = OutcomeModel::new(family, vec![0.3, 1.2, 2.0, -0.7], lambda, 2).unwrap();
        Toy {
            data,
            spec: FeatureSpec::new(vec![
                FeatureTerm::Intercept,
                FeatureTerm::WeightedTreatedSum,
            ]),
            priors,
            state,
            outcome,
            x: TOY_X,
            f: TOY_F,
        }
    }

    fn arm(&self, i: usize) -> usize {
        TOY_Z[i] as usize
    }

    fn xb(&self, i: usize) -> f64 {
        let b = &self.outcome.beta[self.arm(i) * 2..self.arm(i) * 2 + 2];
        self.x[i][0] * b[0] + self.x[i][1] * b[1]
    }

    fn loc(&self, c: usize, i: usize) -> f64 {
        let g = &self.state.gamma[c * 2..c * 2 + 2];
        g[0] * self.f[i][0] + g[1] * self.f[i][1]
    }
}

fn inv_gamma_moments(shape: f64, scale: f64) -> (f64, f64) {
    let m = scale / (shape - 1.0);
    (m, m * m / (shape - 2.0))
}

/// DoI update: every `G_i^o` against its precision-weighted normal law.
pub fn doi_checks(draws: usize, seed: u64) -> Vec<Check> {
    let toy = Toy::new(vec![2.1, -0.3, 3.4, 0.9, 1.7], OutcomeFamily::Gaussian);
    let design = Design::new(&toy.data, &toy.spec, OutcomeFamily::Gaussian).unwrap();
    let mut rng = stream(seed, &[1]);
    let mut g: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(draws)).collect();
    for _ in 0..draws {
        let mut s = toy.state.clone();
        step_draw_doi(&mut s, &toy.outcome, &design, &mut rng).unwrap();
        for i in 0..5 {
            g[i].push(s.g_obs[i]);
        }
    }
    let mut out = Vec::new();
    for i in 0..5 {
        let c = toy.state.labels[i];
        let (lambda, s2) = (toy.outcome.lambda[toy.arm(i)], toy.state.sigma2[c]);
        let r = toy.data.y()[i] - toy.xb(i);
        let m = (lambda * toy.loc(c, i) + r * s2) / (lambda + s2);
        let v = lambda * s2 / (lambda + s2);
        out.extend(moment_checks(&format!("doi G[{i}]"), &g[i], m, v));
    }
    out
}

/// Stick update: `v'_1 ~ Beta(1 + n_1, α + m_1)`.
pub fn stick_checks(draws: usize, seed: u64) -> Vec<Check> {
    let toy = Toy::new(vec![0.0; 5], OutcomeFamily::Gaussian);
    let mut rng = stream(seed, &[3]);
    let mut v = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut s = toy.state.clone();
        step_update_sticks(&mut s, &mut rng).unwrap();
        v.push(s.sticks[0]);
    }
    // Labels (0, 1, 1, 0, 1): two units in cluster 0, three above it.
    let (a, b) = (1.0 + 2.0, toy.state.alpha + 3.0);
    let m = a / (a + b);
    let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
    moment_checks("stick v'1", &v, m, var)
}

/// Atom update: `σ_k²` against its inverse-Gamma law, then `γ_k` whitened
/// with the ridge posterior evaluated at the drawn `σ_k²`.
pub fn atom_checks(draws: usize, seed: u64) -> Vec<Check> {
    let toy = Toy::new(vec![0.0; 5], OutcomeFamily::Gaussian);
    let design = Design::new(&toy.data, &toy.spec, OutcomeFamily::Gaussian).unwrap();
    let mut rng = stream(seed, &[5]);
    let mut sig = [Vec::with_capacity(draws), Vec::with_capacity(draws)];
    let mut white = [Whitened::default(), Whitened::default()];
    let members: Vec<Vec<usize>> = (0..2)
        .map(|c| (0..5).filter(|&i| toy.state.labels[i] == c).collect())
        .collect();
    for _ in 0..draws {
        let mut s = toy.state.clone();
        step_update_atoms(&mut s, &design, &toy.priors, &mut rng).unwrap();
        for c in 0..2 {
            let s2 = s.sigma2[c];
            sig[c].push(s2);
            let rows: Vec<[f64; 2]> = members[c].iter().map(|&i| toy.f[i]).collect();
            let g: Vec<f64> = members[c].iter().map(|&i| toy.state.g_obs[i]).collect();
            let (ainv, r) = ridge2(&rows, &g, s2 / toy.priors.gamma_var);
            let cov = [
                [s2 * ainv[0][0], s2 * ainv[0][1]],
                [s2 * ainv[1][0], s2 * ainv[1][1]],
            ];
            white[c].push(&s.gamma[c * 2..c * 2 + 2], mat_vec(ainv, r), cov);
        }
    }
    let mut out = Vec::new();
    for c in 0..2 {
        let ss: f64 = members[c]
            .iter()
            .map(|&i| (toy.state.g_obs[i] - toy.loc(c, i)).powi(2))
            .sum();
        let shape = toy.priors.sigma_shape + 0.5 * members[c].len() as f64;
        let scale = toy.priors.sigma_scale + 0.5 * ss;
        let (m, v) = inv_gamma_moments(shape, scale);
        out.extend(moment_checks(&format!("atom sigma2[{c}]"), &sig[c], m, v));
        out.extend(white[c].checks(&format!("atom gamma[{c}]")));
    }
    out
}

/// Gaussian Y-model update: `λ_z` against its inverse-Gamma law, then `β_z`
/// whitened at the drawn `λ_z`.
pub fn outcome_checks(draws: usize, seed: u64) -> Vec<Check> {
    let toy = Toy::new(vec![2.1, -0.3, 3.4, 0.9, 1.7], OutcomeFamily::Gaussian);
    let design = Design::new(&toy.data, &toy.spec, OutcomeFamily::Gaussian).unwrap();
    let mut rng = stream(seed, &[6]);
    let members: Vec<Vec<usize>> = (0..2)
        .map(|a| (0..5).filter(|&i| toy.arm(i) == a).collect())
        .collect();
    let mut lam = [Vec::with_capacity(draws), Vec::with_capacity(draws)];
    let mut white = [Whitened::default(), Whitened::default()];
    for _ in 0..draws {
        let mut o = toy.outcome.clone();
        step_update_outcome_gaussian(&mut o, &toy.state, &design, &toy.priors, &mut rng).unwrap();
        for a in 0..2 {
            let l = o.lambda[a];
            lam[a].push(l);
            let rows: Vec<[f64; 2]> = members[a].iter().map(|&i| toy.x[i]).collect();
            let t: Vec<f64> = members[a]
                .iter()
                .map(|&i| toy.data.y()[i] - toy.state.g_obs[i])
                .collect();
            let (ainv, r) = ridge2(&rows, &t, l / toy.priors.beta_var);
            let cov = [
                [l * ainv[0][0], l * ainv[0][1]],
                [l * ainv[1][0], l * ainv[1][1]],
            ];
            white[a].push(&o.beta[a * 2..a * 2 + 2], mat_vec(ainv, r), cov);
        }
    }
    let mut out = Vec::new();
    for a in 0..2 {
        let ss: f64 = members[a]
            .iter()
            .map(|&i| (toy.data.y()[i] - toy.xb(i) - toy.state.g_obs[i]).powi(2))
            .sum();
        let shape = toy.priors.lambda_shape + 0.5 * members[a].len() as f64;
        let scale = toy.priors.lambda_scale + 0.5 * ss;
        let (m, v) = inv_gamma_moments(shape, scale);
        out.extend(moment_checks(
            &format!("outcome lambda[{a}]"),
            &lam[a],
            m,
            v,
        ));
        out.extend(white[a].checks(&format!("outcome beta[{a}]")));
    }
    out
}

/// Probit update: latent variables against truncated-normal moments, then
/// `β_z` whitened given the drawn latents (offset form). Also returns the
/// number of sign violations seen.
pub fn probit_checks(draws: usize, seed: u64) -> (Vec<Check>, usize) {
    let toy = Toy::new(vec![1.0, 0.0, 1.0, 1.0, 0.0], OutcomeFamily::Probit);
    let design = Design::new(&toy.data, &toy.spec, OutcomeFamily::Probit).unwrap();
    let mut rng = stream(seed, &[7]);
    let members: Vec<Vec<usize>> = (0..2)
        .map(|a| (0..5).filter(|&i| toy.arm(i) == a).collect())
        .collect();
    let mut latent: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(draws)).collect();
    let mut white = [Whitened::default(), Whitened::default()];
    let mut violations = 0;
    for _ in 0..draws {
        let mut o = toy.outcome.clone();
        violations +=
            step_probit_augmentation(&mut o, &toy.state, &design, &toy.priors, true, &mut rng)
                .unwrap();
        for i in 0..5 {
            latent[i].push(o.latent[i]);
        }
        for a in 0..2 {
            let rows: Vec<[f64; 2]> = members[a].iter().map(|&i| toy.x[i]).collect();
            let t: Vec<f64> = members[a]
                .iter()
                .map(|&i| o.latent[i] - toy.state.g_obs[i])
                .collect();
            let (ainv, r) = ridge2(&rows, &t, 1.0 / toy.priors.beta_var);
            white[a].push(&o.beta[a * 2..a * 2 + 2], mat_vec(ainv, r), ainv);
        }
    }
    let mut out = Vec::new();
    for i in 0..5 {
        let mu = toy.xb(i) + toy.state.g_obs[i];
        // Standardised truncation point is −μ in both cases.
        let c = -mu;
        let (m, v) = if toy.data.y()[i] == 1.0 {
            let h = std_normal_pdf(c) / (1.0 - std_normal_cdf(c));
            (mu + h, 1.0 + c * h - h * h)
        } else {
            let h = std_normal_pdf(c) / std_normal_cdf(c);
            (mu - h, 1.0 - c * h - h * h)
        };
        out.extend(moment_checks(
            &format!("probit latent[{i}]"),
            &latent[i],
            m,
            v,
        ));
    }
    for a in 0..2 {
        out.extend(white[a].checks(&format!("probit beta[{a}]")));
    }
    (out, violations)
}

/// The N = 8, K = 3 model used for the joint-distribution test.
pub struct GewekeModel {
    pub x: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub net: Network,
    pub spec: FeatureSpec,
    pub priors: Priors,
    pub cfg: ChainConfig,
    f: Vec<[f64; 2]>,
}

/// Recorded statistics: `α`, `σ²_1..σ²_3`, then the four `β` entries.
pub const GEWEKE_STATS: [&str; 8] = [
    "alpha",
    "sigma2[0]",
    "sigma2[1]",
    "sigma2[2]",
    "beta[0,0]",
    "beta[0,1]",
    "beta[1,0]",
    "beta[1,1]",
];

impl GewekeModel {
    pub fn new() -> Self {
        let n = 8;
        let mut edges: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        edges.push((0, 4, 1.0));
        let net = Network::from_edges(n, edges).unwrap();
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0, -1.0 + 0.3 * i as f64]).collect();
        let z: Vec<f64> = (0..n).map(|i| [1.0, 0.0, 0.0, 1.0][i % 4]).collect();
        let f = (0..n)
            .map(|i| [1.0, net.neighbors(i).map(|j| z[j]).sum()])
            .collect();
        GewekeModel {
            x,
            z,
            net,
            spec: FeatureSpec::new(vec![
                FeatureTerm::Intercept,
                FeatureTerm::WeightedTreatedSum,
            ]),
            priors: Priors {
                beta_var: 1.0,
                lambda_shape: 10.0,
                lambda_scale: 9.0,
                gamma_var: 1.0,
                sigma_shape: 10.0,
                sigma_scale: 9.0,
                alpha_shape: 2.0,
                alpha_scale: 1.0,
                k_init: 3,
            },
            cfg: ChainConfig {
                alpha_kernel: AlphaKernel::Exact,
                ..ChainConfig::default()
            },
            f,
        }
    }

    fn dataset(&self, y: Vec<f64>) -> Dataset {
        Dataset::new(
            self.x.clone(),
            Treatment::binary(self.z.clone()).unwrap(),
            y,
            self.net.clone(),
        )
        .unwrap()
    }

    /// `Y` given every parameter and the DoIs.
    fn forward_y<R: Rng + ?Sized>(
        &self,
        outcome: &OutcomeModel,
        g: &[f64],
        rng: &mut R,
    ) -> Vec<f64> {
        (0..self.z.len())
            .map(|i| {
                let arm = self.z[i] as usize;
                let b = outcome.beta_arm(arm);
                let mean = self.x[i][0] * b[0] + self.x[i][1] * b[1] + g[i];
                mean + outcome.lambda[arm].sqrt() * normal(rng)
            })
            .collect()
    }

    /// A draw of every unknown and the data from the joint prior.
    fn prior_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (DdpmState, OutcomeModel, Vec<f64>) {
        let n = self.z.len();
        let mut state = DdpmState::from_prior(n, 2, &self.priors, rng);
        for i in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut label = state.k() - 1;
            for (k, w) in state.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    label = k;
                    break;
                }
            }
            state.labels[i] = label;
            let gk = state.gamma_k(label);
            let loc = gk[0] * self.f[i][0] + gk[1] * self.f[i][1];
            state.g_obs[i] = loc + state.sigma2[label].sqrt() * normal(rng);
        }
        let placeholder = self.dataset(vec![0.0; n]);
        let design = Design::new(&placeholder, &self.spec, OutcomeFamily::Gaussian).unwrap();
        let outcome = OutcomeModel::from_prior(&design, &self.priors, rng);
        let y = self.forward_y(&outcome, &state.g_obs, rng);
        (state, outcome, y)
    }

    fn record(state: &DdpmState, outcome: &OutcomeModel) -> [f64; 8] {
        let mut r = [0.0; 8];
        r[0] = state.alpha;
        r[1..4].copy_from_slice(&state.sigma2);
        r[4..8].copy_from_slice(&outcome.beta);
        r
    }

    /// Independent draws from the joint prior.
    pub fn marginal_conditional(&self, draws: usize, seed: u64) -> Vec<[f64; 8]> {
        let mut rng = stream(seed, &[10]);
        (0..draws)
            .map(|_| {
                let (s, o, _) = self.prior_draw(&mut rng);
                Self::record(&s, &o)
            })
            .collect()
    }

    /// Alternates one Gibbs sweep with a fresh draw of `Y`.
    pub fn successive_conditional(&self, sweeps: usize, seed: u64) -> Vec<[f64; 8]> {
        let mut rng = stream(seed, &[11]);
        let (mut state, mut outcome, mut y) = self.prior_draw(&mut rng);
        let mut out = Vec::with_capacity(sweeps);
        for _ in 0..sweeps {
            let data = self.dataset(y);
            let design = Design::new(&data, &self.spec, OutcomeFamily::Gaussian).unwrap();
            gibbs_sweep(
                &mut state,
                &mut outcome,
                &design,
                &self.priors,
                &self.cfg,
                &mut rng,
            )
            .unwrap();
            y = self.forward_y(&outcome, &state.g_obs, &mut rng);
            out.push(Self::record(&state, &outcome));
        }
        out
    }
}

impl Default for GewekeModel {
    fn default() -> Self {
        Self::new()
    }
}

/// Mean and batch-means standard error of an autocorrelated series.
fn batch_mean_se(xs: &[f64], batches: usize) -> (f64, f64) {
    let b = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|k| mean(&xs[k * b..(k + 1) * b]))
        .collect();
    (
        mean(&xs[..b * batches]),
        (sample_var(&means) / batches as f64).sqrt(),
    )
}

/// z-scores of first and second moments between the two simulators.
pub fn geweke_checks(draws: usize, seed: u64) -> Vec<Check> {
    let model = GewekeModel::new();
    let mc = model.marginal_conditional(draws, seed);
    let sc = model.successive_conditional(draws, seed);
    let mut out = Vec::new();
    for (s, name) in GEWEKE_STATS.iter().enumerate() {
        for power in [1, 2] {
            let a: Vec<f64> = mc.iter().map(|r| r[s].powi(power)).collect();
            let b: Vec<f64> = sc.iter().map(|r| r[s].powi(power)).collect();
            let se_a = (sample_var(&a) / a.len() as f64).sqrt();
            let (mb, se_b) = batch_mean_se(&b, 50);
            out.push(Check {
                name: format!("{name}^{power}"),
                z: (mean(&a) - mb) / (se_a * se_a + se_b * se_b).sqrt(),
            });
        }
    }
    out
}
