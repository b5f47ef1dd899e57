use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Hyperparameters of the outcome model and the DDPM.
///
/// Inverse-Gamma and Gamma laws are parameterised by shape and scale.
/// The defaults are the weakly informative choices used in the simulation
/// study: `β_z ~ N(0, 10² I)`, `λ_z ~ IG(0.1, 0.1)`, `γ_k ~ N(0, 10² I)`,
/// `σ_k² ~ IG(0.1, 0.1)`, `α ~ Gamma(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Priors {
    pub beta_var: f64,
    pub lambda_shape: f64,
    pub lambda_scale: f64,
    pub gamma_var: f64,
    pub sigma_shape: f64,
    pub sigma_scale: f64,
    pub alpha_shape: f64,
    pub alpha_scale: f64,
    pub k_init: usize,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            beta_var: 100.0,
            lambda_shape: 0.1,
            lambda_scale: 0.1,
            gamma_var: 100.0,
            sigma_shape: 0.1,
            sigma_scale: 0.1,
            alpha_shape: 1.0,
            alpha_scale: 1.0,
            k_init: 10,
        }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta_var", self.beta_var),
            ("lambda_shape", self.lambda_shape),
            ("lambda_scale", self.lambda_scale),
            ("gamma_var", self.gamma_var),
            ("sigma_shape", self.sigma_shape),
            ("sigma_scale", self.sigma_scale),
            ("alpha_shape", self.alpha_shape),
            ("alpha_scale", self.alpha_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be positive and finite")));
            }
        }
        if self.k_init < 2 {
            return Err(invalid("k_init", "must be at least 2"));
        }
        Ok(())
    }
}
