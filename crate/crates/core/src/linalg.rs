//! Small dense helpers shared by the block routines.
//!
//! Every matrix that goes through a Cholesky factorization gets a relative
//! diagonal jitter of `JITTER_REL` times its mean diagonal. On failure the
//! jitter is multiplied by ten, at most `JITTER_RETRIES` times.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const JITTER_REL: f64 = 1e-9;
pub const JITTER_RETRIES: usize = 3;

pub type Chol = Cholesky<f64, Dyn>;

/// Mean of the diagonal, used as the scale for the jitter.
pub fn diag_scale(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let s = a.diagonal().iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// Cholesky factor of `a + jitter * I` with jitter escalation.
pub fn cholesky_jittered(a: &DMatrix<f64>, scale: f64, what: &str) -> Result<Chol> {
    cholesky_jittered_info(a, scale, what).map(|(c, _)| c)
}

/// Like [`cholesky_jittered`], also returning the jitter that was added.
pub fn cholesky_jittered_info(a: &DMatrix<f64>, scale: f64, what: &str) -> Result<(Chol, f64)> {
    let n = a.nrows();
    let mut jitter = JITTER_REL * scale;
    for _ in 0..=JITTER_RETRIES {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            if c.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                return Ok((c, jitter));
            }
        }
        jitter *= 10.0;
    }
    Err(Error::Factorization {
        what: what.to_string(),
        size: n,
    })
}

/// Factor with the jitter scale taken from the matrix itself.
pub fn cholesky_auto(a: &DMatrix<f64>, what: &str) -> Result<Chol> {
    cholesky_jittered(a, diag_scale(a), what)
}

/// log|A| from its Cholesky factor.
pub fn chol_logdet(c: &Chol) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Solves L x = b in place (L lower triangular from the factor).
pub fn solve_lower(c: &Chol, b: &mut DVector<f64>) {
    c.l_dirty().solve_lower_triangular_mut(b);
}

/// Draws from N(Q^{-1} rhs, Q^{-1}) given the Cholesky factor of the precision Q.
pub fn sample_from_precision<R: Rng + ?Sized>(prec: &Chol, rhs: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    let mut mean = rhs.clone();
    prec.solve_mut(&mut mean);
    let n = rhs.len();
    let mut z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    // L^T x = z gives x ~ N(0, Q^{-1})
    prec.l_dirty().tr_solve_lower_triangular_mut(&mut z);
    mean + z
}

/// Draws from N(mean, L L^T) given the covariance factor L.
pub fn sample_from_cov_factor<R: Rng + ?Sized>(cov: &Chol, mean: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    let n = mean.len();
    let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let l = cov.l_dirty().lower_triangle();
    mean + l * z
}

/// Gaussian log density from the covariance factor.
pub fn mvn_logpdf_chol(x: &DVector<f64>, mean: &DVector<f64>, cov: &Chol) -> f64 {
    let mut r = x - mean;
    solve_lower(cov, &mut r);
    let n = x.len() as f64;
    -0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * chol_logdet(cov) - 0.5 * r.norm_squared()
}

/// Inverse of an SPD matrix through its factor.
pub fn inverse_from_chol(c: &Chol) -> DMatrix<f64> {
    let mut inv = c.inverse();
    symmetrize(&mut inv);
    inv
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Deterministic pairwise summation; the result does not depend on how the
/// terms were produced, only on their order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
