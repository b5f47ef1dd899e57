//! Bayesian causal inference under unknown network interference.
//!
//! Each unit's potential outcome depends on its own treatment and on a latent
//! *degree of interference* (DoI), a scalar summarising how the treatments of
//! other units reach it through the network. The DoI is given a dependent
//! Dirichlet-process mixture prior whose atom locations are linear in
//! network features, and is fitted with a truncated stick-breaking blocked
//! Gibbs sampler. Causal estimands (assignment-conditional and expected
//! treatment/spillover effects) are computed from imputed potential
//! outcomes.
//!
//! Module map:
//!
//! * [`net`]: interference networks, random-graph generators, PageRank.
//! * [`model`]: datasets, treatments, assignment mechanisms, feature terms, priors.
//! * [`ddpm`]: the Gibbs sampler and chain runner.
//! * [`estimands`]: effect functionals, posterior summaries, Horvitz–Thompson baseline.
//! * [`simbench`]: simulation scenarios, ground truth, bias/MSE/coverage harness.

pub mod ddpm;
pub mod error;
pub mod estimands;
pub mod model;
pub mod net;
pub mod rng;
pub mod simbench;

pub use ddpm::{
    run_chain, AlphaKernel, ChainConfig, DdpmState, OutcomeFamily, OutcomeModel, PosteriorDraws,
};
pub use error::{Error, Result};
pub use estimands::{summarize, EstimandQuery, Subgroup, SummaryRow};
pub use model::{
    AssignmentMechanism, Dataset, FeatureSpec, FeatureTerm, Priors, Treatment, TreatmentKind,
};
pub use net::{Network, PageRankScores};
