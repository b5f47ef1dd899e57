//! Small dense Gaussian linear-model solves.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Posterior of `b ~ N(A⁻¹ r, s A⁻¹)` for a symmetric positive definite `A`.
pub(crate) struct GaussianSystem {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    mean: DVector<f64>,
}

impl GaussianSystem {
    pub(crate) fn new(a: DMatrix<f64>, r: DVector<f64>) -> Result<Self> {
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Numerical("system matrix is not positive definite".into()))?;
        let mean = chol.solve(&r);
        Ok(GaussianSystem { chol, mean })
    }

    pub(crate) fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// `A⁻¹`.
    pub(crate) fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Draws from `N(A⁻¹ r, scale · A⁻¹)`.
    pub(crate) fn draw<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> Vec<f64> {
        let p = self.mean.len();
        let e = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        // A = L Lᵀ, so Cov(L⁻ᵀ e) = A⁻¹.
        let lt = self.chol.l().transpose();
        let u = lt
            .solve_upper_triangular(&e)
            .expect("cholesky factor has a positive diagonal");
        (&self.mean + u * scale.sqrt()).iter().copied().collect()
    }
}

/// Builds `M'M + ridge·I` and `M'y` from the listed rows of a row-major
/// `n × p` matrix.
pub(crate) fn ridge_normal_equations(
    rows: &[usize],
    m: &[f64],
    p: usize,
    y: impl Fn(usize) -> f64,
    ridge: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = DMatrix::<f64>::identity(p, p) * ridge;
    let mut r = DVector::<f64>::zeros(p);
    for &i in rows {
        let row = &m[i * p..(i + 1) * p];
        let yi = y(i);
        for c in 0..p {
            r[c] += row[c] * yi;
            for d in 0..=c {
                a[(c, d)] += row[c] * row[d];
            }
        }
    }
    for c in 0..p {
        for d in 0..c {
            a[(d, c)] = a[(c, d)];
        }
    }
    (a, r)
}
