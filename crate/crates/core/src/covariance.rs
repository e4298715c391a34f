//! Base cross-covariance families and dense covariance assembly.
//!
//! Four families are supported:
//!
//! * [`CovParams::Exponential`]: `σ² exp(-c ‖ℓ - ℓ'‖)` on all coordinates.
//! * [`CovParams::Gneiting`]: univariate non-separable space-time covariance,
//!   the last coordinate is time.
//! * [`CovParams::Multivariate`]: the `q`-variate extension where variables
//!   are separated by a latent dissimilarity `δ_ij` entering through `ψ2`.
//! * [`CovParams::LatentDistance`]: a sum of a shared latent-distance term and
//!   per-variable exponential terms (no time split).
//!
//! With `φ1(x) = exp(-c x)` and `ψ(x) = (a x^{1/2} + 1)^β` the space-time
//! families evaluate
//!
//! ```text
//! C_ij(h, u) = σ² / (ψ1(u²/ψ2_ij)^{d/2} ψ2_ij^{1/2}) · φ1(‖h‖² / ψ1(u²/ψ2_ij))
//! ```
//!
//! where `d` is the number of spatial coordinates. Taken literally this is a
//! squared-exponential in space when `u = 0`. [`LagMode::Unsquared`] applies
//! `φ1` to the square root of its argument, `exp(-c ‖h‖ / ψ1^{1/2})`: still a
//! valid Gneiting construction (`φ(t) = exp(-c t^{1/2})` is completely
//! monotone) and the exponential family at `u = 0`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Exponent applied inside `ψ`. Fixed for all families.
pub const PSI_ALPHA: f64 = 0.5;

/// `ψ(x) = (a x^{1/2} + 1)^β`.
pub fn psi(x: f64, a: f64, beta: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("psi argument must be >= 0, got {x}")));
    }
    Ok(psi_unchecked(x, a, beta))
}

#[inline]
fn psi_unchecked(x: f64, a: f64, beta: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    (a * x.sqrt() + 1.0).powf(beta)
}

/// How spatial and temporal lags enter the space-time families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LagMode {
    /// `‖h‖²` and `u²`, as written in the family definition.
    #[default]
    Squared,
    /// `exp(-c ‖h‖ / ψ1(u²)^{1/2})`: exponential in space.
    Unsquared,
}

/// Which argument `ψ2` receives for a latent dissimilarity `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Psi2Arg {
    /// `ψ2(δ²) = (a2 δ + 1)^β2`
    #[default]
    DeltaSquared,
    /// `ψ2(δ) = (a2 δ^{1/2} + 1)^β2`
    Delta,
}

/// Between-variable dissimilarity of the multivariate family.
#[derive(Debug, Clone, PartialEq)]
pub enum Dissimilarity {
    /// `ψ2_ij` stored directly as a `q × q` row-major matrix with unit diagonal.
    /// This is the parameterization sampled when `q = 2`.
    Psi2(Vec<f64>),
    /// `δ` matrix pushed through `ψ2` with parameters `a2`, `β2`.
    Latent {
        a2: f64,
        beta2: f64,
        delta: Vec<f64>,
        arg: Psi2Arg,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GneitingParams {
    pub sigma2: f64,
    pub c: f64,
    pub a1: f64,
    pub beta1: f64,
    pub lag: LagMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateParams {
    pub q: usize,
    pub sigma2: f64,
    pub c: f64,
    pub a1: f64,
    pub beta1: f64,
    pub lag: LagMode,
    pub dissimilarity: Dissimilarity,
}

/// Parameters of the latent-distance multivariate family.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDistParams {
    /// Loadings on the shared latent-distance term, one per variable.
    pub sigma1: Vec<f64>,
    /// Loadings on the variable-specific exponential term.
    pub sigma2: Vec<f64>,
    /// Decay of the variable-specific term.
    pub phi_r: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    /// Latent inter-variable distances `‖v_ij‖`, `q × q` row-major.
    pub v: Vec<f64>,
}

impl LatentDistParams {
    pub fn q(&self) -> usize {
        self.sigma1.len()
    }

    /// Shared term `C(h, v)`.
    pub fn shared(&self, hnorm: f64, v: f64) -> f64 {
        let g = (self.beta * (1.0 + self.alpha * v).ln()).exp();
        (-self.phi * hnorm / g.sqrt()).exp() / g
    }
}

/// Support of a free covariance parameter, used to pick the proposal scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Positive,
    Unit,
    AboveOne,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovParams {
    Exponential { sigma2: f64, c: f64 },
    Gneiting(GneitingParams),
    Multivariate(MultivariateParams),
    LatentDistance(LatentDistParams),
}

fn check_pos(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")))
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be in [0, 1], got {v}")))
    }
}

fn check_dissim_matrix(name: &str, m: &[f64], q: usize, diag: f64, lower: f64) -> Result<()> {
    if m.len() != q * q {
        return Err(Error::InvalidParams(format!("{name} must be {q}x{q}")));
    }
    for i in 0..q {
        if m[i * q + i] != diag {
            return Err(Error::InvalidParams(format!("{name} diagonal must be {diag}")));
        }
        for j in 0..q {
            if (m[i * q + j] - m[j * q + i]).abs() > 1e-12 {
                return Err(Error::InvalidParams(format!("{name} must be symmetric")));
            }
            if i != j && !(m[i * q + j] > lower && m[i * q + j].is_finite()) {
                return Err(Error::InvalidParams(format!("{name}[{i},{j}] must be > {lower}")));
            }
        }
    }
    Ok(())
}

impl CovParams {
    pub fn exponential(sigma2: f64, c: f64) -> Self {
        CovParams::Exponential { sigma2, c }
    }

    pub fn gneiting(sigma2: f64, c: f64, a1: f64, beta1: f64) -> Self {
        CovParams::Gneiting(GneitingParams {
            sigma2,
            c,
            a1,
            beta1,
            lag: LagMode::Squared,
        })
    }

    /// Number of latent variables.
    pub fn q(&self) -> usize {
        match self {
            CovParams::Exponential { .. } | CovParams::Gneiting(_) => 1,
            CovParams::Multivariate(m) => m.q,
            CovParams::LatentDistance(l) => l.q(),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            CovParams::Exponential { .. } => "exponential",
            CovParams::Gneiting(_) => "gneiting",
            CovParams::Multivariate(_) => "multivariate",
            CovParams::LatentDistance(_) => "latent-distance",
        }
    }

    /// Whether the last coordinate is treated as time.
    pub fn is_spacetime(&self) -> bool {
        matches!(self, CovParams::Gneiting(_) | CovParams::Multivariate(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CovParams::Exponential { sigma2, c } => {
                check_pos("sigma2", *sigma2)?;
                check_pos("c", *c)
            }
            CovParams::Gneiting(g) => {
                check_pos("sigma2", g.sigma2)?;
                check_pos("c", g.c)?;
                check_pos("a1", g.a1)?;
                check_unit("beta1", g.beta1)
            }
            CovParams::Multivariate(m) => {
                if m.q == 0 {
                    return Err(Error::InvalidParams("q must be >= 1".into()));
                }
                check_pos("sigma2", m.sigma2)?;
                check_pos("c", m.c)?;
                check_pos("a1", m.a1)?;
                check_unit("beta1", m.beta1)?;
                match &m.dissimilarity {
                    Dissimilarity::Psi2(v) => check_dissim_matrix("psi2", v, m.q, 1.0, 1.0 - 1e-15),
                    Dissimilarity::Latent { a2, beta2, delta, .. } => {
                        check_pos("a2", *a2)?;
                        check_unit("beta2", *beta2)?;
                        check_dissim_matrix("delta", delta, m.q, 0.0, 0.0)
                    }
                }
            }
            CovParams::LatentDistance(l) => {
                let q = l.q();
                if q == 0 || l.sigma2.len() != q || l.phi_r.len() != q {
                    return Err(Error::InvalidParams(
                        "latent-distance vectors must all have length q >= 1".into(),
                    ));
                }
                for r in 0..q {
                    check_pos("sigma1", l.sigma1[r])?;
                    check_pos("sigma2", l.sigma2[r])?;
                    check_pos("phi_r", l.phi_r[r])?;
                }
                check_pos("alpha", l.alpha)?;
                check_pos("beta", l.beta)?;
                check_pos("phi", l.phi)?;
                check_dissim_matrix("v", &l.v, q, 0.0, 0.0)
            }
        }
    }

    /// Average marginal variance, used as the jitter scale.
    pub fn scale(&self) -> f64 {
        match self {
            CovParams::Exponential { sigma2, .. } => *sigma2,
            CovParams::Gneiting(g) => g.sigma2,
            CovParams::Multivariate(m) => m.sigma2,
            CovParams::LatentDistance(l) => {
                let q = l.q() as f64;
                l.sigma1.iter().zip(&l.sigma2).map(|(a, b)| a * a + b * b).sum::<f64>() / q
            }
        }
    }

    fn psi2(m: &MultivariateParams, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        match &m.dissimilarity {
            Dissimilarity::Psi2(v) => v[i * m.q + j],
            Dissimilarity::Latent { a2, beta2, delta, arg } => {
                let d = delta[i * m.q + j];
                match arg {
                    Psi2Arg::DeltaSquared => psi_unchecked(d * d, *a2, *beta2),
                    Psi2Arg::Delta => psi_unchecked(d, *a2, *beta2),
                }
            }
        }
    }

    /// Space-time kernel given `‖h‖²`, `u²` and the number of spatial dims.
    #[inline]
    fn spacetime(sigma2: f64, c: f64, a1: f64, beta1: f64, lag: LagMode, psi2: f64, h2: f64, u2: f64, d: usize) -> f64 {
        let p1 = psi_unchecked(u2 / psi2, a1, beta1);
        let denom = if d == 2 { p1 } else { p1.powf(0.5 * d as f64) };
        let arg = match lag {
            LagMode::Squared => h2 / p1,
            LagMode::Unsquared => (h2 / p1).sqrt(),
        };
        sigma2 / (denom * psi2.sqrt()) * (-c * arg).exp()
    }

    /// `C_ij(h, u)` from a spatial lag vector and a temporal lag. Families
    /// without a time split use the concatenated lag `(h, u)`.
    pub fn cross_cov(&self, h: &[f64], u: f64, i: usize, j: usize) -> Result<f64> {
        let q = self.q();
        for idx in [i, j] {
            if idx >= q {
                return Err(Error::IndexOutOfRange { index: idx, q });
            }
        }
        if !u.is_finite() || h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("lags must be finite".into()));
        }
        self.validate()?;
        let h2: f64 = h.iter().map(|v| v * v).sum();
        Ok(self.eval_lag(h2, u * u, h.len(), i, j))
    }

    #[inline]
    fn eval_lag(&self, h2: f64, u2: f64, d: usize, i: usize, j: usize) -> f64 {
        match self {
            CovParams::Exponential { sigma2, c } => sigma2 * (-c * (h2 + u2).sqrt()).exp(),
            CovParams::Gneiting(g) => Self::spacetime(g.sigma2, g.c, g.a1, g.beta1, g.lag, 1.0, h2, u2, d),
            CovParams::Multivariate(m) => {
                let p2 = Self::psi2(m, i, j);
                Self::spacetime(m.sigma2, m.c, m.a1, m.beta1, m.lag, p2, h2, u2, d)
            }
            CovParams::LatentDistance(l) => {
                let q = l.q();
                let hn = (h2 + u2).sqrt();
                if i == j {
                    l.sigma1[i] * l.sigma1[i] * l.shared(hn, 0.0) + l.sigma2[i] * l.sigma2[i] * (-l.phi_r[i] * hn).exp()
                } else {
                    l.sigma1[i] * l.sigma1[j] * l.shared(hn, l.v[i * q + j])
                }
            }
        }
    }

    /// Covariance between variable `i` at `a` and variable `j` at `b`.
    /// No validation; callers check parameters once per matrix.
    #[inline]
    pub fn cov(&self, a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
        let dim = a.len();
        if self.is_spacetime() && dim >= 1 {
            let mut h2 = 0.0;
            for k in 0..dim - 1 {
                let t = a[k] - b[k];
                h2 += t * t;
            }
            let u = a[dim - 1] - b[dim - 1];
            self.eval_lag(h2, u * u, dim - 1, i, j)
        } else {
            let mut h2 = 0.0;
            for k in 0..dim {
                let t = a[k] - b[k];
                h2 += t * t;
            }
            self.eval_lag(h2, 0.0, dim, i, j)
        }
    }

    /// Names of the free parameters, in the order used by
    /// [`CovParams::param_vector`].
    pub fn param_names(&self) -> Vec<String> {
        self.param_table().into_iter().map(|(n, _, _)| n).collect()
    }

    pub fn param_supports(&self) -> Vec<Support> {
        self.param_table().into_iter().map(|(_, _, s)| s).collect()
    }

    pub fn param_vector(&self) -> Vec<f64> {
        self.param_table().into_iter().map(|(_, v, _)| v).collect()
    }

    fn param_table(&self) -> Vec<(String, f64, Support)> {
        use Support::*;
        let mut t = Vec::new();
        match self {
            CovParams::Exponential { sigma2, c } => {
                t.push(("sigma2".into(), *sigma2, Positive));
                t.push(("c".into(), *c, Positive));
            }
            CovParams::Gneiting(g) => {
                t.push(("sigma2".into(), g.sigma2, Positive));
                t.push(("c".into(), g.c, Positive));
                t.push(("a1".into(), g.a1, Positive));
                t.push(("beta1".into(), g.beta1, Unit));
            }
            CovParams::Multivariate(m) => {
                t.push(("sigma2".into(), m.sigma2, Positive));
                t.push(("c".into(), m.c, Positive));
                t.push(("a1".into(), m.a1, Positive));
                t.push(("beta1".into(), m.beta1, Unit));
                match &m.dissimilarity {
                    Dissimilarity::Psi2(v) => {
                        for i in 0..m.q {
                            for j in (i + 1)..m.q {
                                t.push((format!("psi2_{i}_{j}"), v[i * m.q + j], AboveOne));
                            }
                        }
                    }
                    Dissimilarity::Latent { a2, beta2, delta, .. } => {
                        t.push(("a2".into(), *a2, Positive));
                        t.push(("beta2".into(), *beta2, Unit));
                        for i in 0..m.q {
                            for j in (i + 1)..m.q {
                                t.push((format!("delta_{i}_{j}"), delta[i * m.q + j], Positive));
                            }
                        }
                    }
                }
            }
            CovParams::LatentDistance(l) => {
                let q = l.q();
                for r in 0..q {
                    t.push((format!("sigma1_{r}"), l.sigma1[r], Positive));
                }
                for r in 0..q {
                    t.push((format!("sigma2_{r}"), l.sigma2[r], Positive));
                }
                for r in 0..q {
                    t.push((format!("phi_{r}"), l.phi_r[r], Positive));
                }
                t.push(("alpha".into(), l.alpha, Positive));
                t.push(("beta".into(), l.beta, Unit));
                t.push(("phi".into(), l.phi, Positive));
                for i in 0..q {
                    for j in (i + 1)..q {
                        t.push((format!("v_{i}_{j}"), l.v[i * q + j], Positive));
                    }
                }
            }
        }
        t
    }

    /// Returns a copy with the free parameters replaced, in
    /// [`CovParams::param_names`] order.
    pub fn with_param_vector(&self, v: &[f64]) -> Result<Self> {
        let n = self.param_table().len();
        if v.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} covariance parameters, got {}",
                v.len()
            )));
        }
        let mut out = self.clone();
        let mut it = v.iter().copied();
        let mut next = || it.next().unwrap();
        match &mut out {
            CovParams::Exponential { sigma2, c } => {
                *sigma2 = next();
                *c = next();
            }
            CovParams::Gneiting(g) => {
                g.sigma2 = next();
                g.c = next();
                g.a1 = next();
                g.beta1 = next();
            }
            CovParams::Multivariate(m) => {
                m.sigma2 = next();
                m.c = next();
                m.a1 = next();
                m.beta1 = next();
                let q = m.q;
                match &mut m.dissimilarity {
                    Dissimilarity::Psi2(vals) => {
                        for i in 0..q {
                            for j in (i + 1)..q {
                                let x = next();
                                vals[i * q + j] = x;
                                vals[j * q + i] = x;
                            }
                        }
                    }
                    Dissimilarity::Latent { a2, beta2, delta, .. } => {
                        *a2 = next();
                        *beta2 = next();
                        for i in 0..q {
                            for j in (i + 1)..q {
                                let x = next();
                                delta[i * q + j] = x;
                                delta[j * q + i] = x;
                            }
                        }
                    }
                }
            }
            CovParams::LatentDistance(l) => {
                let q = l.q();
                for r in 0..q {
                    l.sigma1[r] = next();
                }
                for r in 0..q {
                    l.sigma2[r] = next();
                }
                for r in 0..q {
                    l.phi_r[r] = next();
                }
                l.alpha = next();
                l.beta = next();
                l.phi = next();
                for i in 0..q {
                    for j in (i + 1)..q {
                        let x = next();
                        l.v[i * q + j] = x;
                        l.v[j * q + i] = x;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A location paired with a variable index, one row or column of a
/// covariance matrix.
#[derive(Debug, Clone, Copy)]
pub struct Site<'a> {
    pub coords: &'a [f64],
    pub var: usize,
}

/// Dense covariance between two lists of (location, variable) sites.
pub fn cov_matrix(rows: &[Site<'_>], cols: &[Site<'_>], p: &CovParams) -> Result<DMatrix<f64>> {
    p.validate()?;
    let q = p.q();
    let dim = rows.first().or(cols.first()).map(|s| s.coords.len()).unwrap_or(0);
    for s in rows.iter().chain(cols) {
        if s.coords.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "location of dimension {} among locations of dimension {dim}",
                s.coords.len()
            )));
        }
        if s.var >= q {
            return Err(Error::IndexOutOfRange { index: s.var, q });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        p.cov(rows[a].coords, cols[b].coords, rows[a].var, cols[b].var)
    }))
}

/// Covariance between all `q` variables at the listed rows of a flat
/// coordinate array, location-major (`row = loc * q + var`).
pub fn block_cov(coords: &[f64], dim: usize, rows: &[usize], cols: &[usize], p: &CovParams) -> DMatrix<f64> {
    let q = p.q();
    let nr = rows.len() * q;
    let nc = cols.len() * q;
    let mut out = DMatrix::zeros(nr, nc);
    let fill_col = |b: usize, col: &mut [f64]| {
        let lb = cols[b / q];
        let jb = b % q;
        let cb = &coords[lb * dim..(lb + 1) * dim];
        for (a, v) in col.iter_mut().enumerate() {
            let la = rows[a / q];
            *v = p.cov(&coords[la * dim..(la + 1) * dim], cb, a % q, jb);
        }
    };
    if nr == 0 || nc == 0 {
        return out;
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if nr * nc >= 1 << 16 {
            out.as_mut_slice()
                .par_chunks_mut(nr)
                .enumerate()
                .for_each(|(b, col)| fill_col(b, col));
            return out;
        }
    }
    for (b, col) in out.as_mut_slice().chunks_mut(nr).enumerate() {
        fill_col(b, col);
    }
    out
}

/// Symmetric covariance of a single location set.
pub fn block_cov_sym(coords: &[f64], dim: usize, locs: &[usize], p: &CovParams) -> DMatrix<f64> {
    let mut m = block_cov(coords, dim, locs, locs, p);
    crate::linalg::symmetrize(&mut m);
    m
}
