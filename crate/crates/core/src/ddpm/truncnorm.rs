//! Exact truncated normal sampling.
//!
//! Standardised bounds are handled with the mixture of rejection samplers of
//! Robert (1995): normal rejection when the interval is wide and contains 0,
//! uniform rejection on short intervals and translated-exponential rejection
//! in the tails. Every branch has acceptance probability bounded away from
//! zero, so far-tail truncations do not stall.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{invalid, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Draws from `N(mu, var)` restricted to `(lo, hi)`; bounds may be infinite.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mu: f64,
    var: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(var > 0.0 && var.is_finite()) {
        return Err(invalid("var", format!("{var} must be positive and finite")));
    }
    if !mu.is_finite() || lo.is_nan() || hi.is_nan() {
        return Err(invalid("mu", "mean and bounds must not be NaN"));
    }
    if lo >= hi {
        return Err(invalid(
            "lo",
            format!("lower bound {lo} is not below upper bound {hi}"),
        ));
    }
    let sd = var.sqrt();
    let a = (lo - mu) / sd;
    let b = (hi - mu) / sd;
    Ok(mu + sd * standard(a, b, rng))
}

fn standard<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a >= 0.0 {
        one_sided(a, b, rng)
    } else if b <= 0.0 {
        -one_sided(-b, -a, rng)
    } else if b - a >= SQRT_2PI {
        loop {
            let x: f64 = StandardNormal.sample(rng);
            if x > a && x < b {
                return x;
            }
        }
    } else {
        loop {
            let x = rng.random_range(a..b);
            if rng.random::<f64>() < (-0.5 * x * x).exp() {
                return x;
            }
        }
    }
}

/// Interval `[a, b)` with `0 <= a`.
fn one_sided<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b.is_finite() && b * b - a * a < 2.0 {
        // Density ratio against the uniform is exp((a² - x²)/2) >= e⁻¹.
        loop {
            let x = rng.random_range(a..b);
            if rng.random::<f64>() < (0.5 * (a * a - x * x)).exp() {
                return x;
            }
        }
    }
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = a + e / lambda;
        if x >= b {
            continue;
        }
        let d = x - lambda;
        if rng.random::<f64>() < (-0.5 * d * d).exp() {
            return x;
        }
    }
}
