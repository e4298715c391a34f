//! Observations on a set of locations.
//!
//! For location `ℓ` and outcome `r` the model is
//! `y_r(ℓ) = x_r(ℓ)ᵀβ + z_r(ℓ)ᵀw(ℓ) + ε_r`, with `ε_r ~ N(0, τ²_r)`.
//! `x_r(ℓ)` has length `p` and `z_r(ℓ)` has length `q`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Number of coordinates per location (spatial plus optional time).
    pub dim: usize,
    /// Row-major `n × dim`.
    pub coords: Vec<f64>,
    /// Number of outcomes `l`.
    pub l: usize,
    /// Number of latent variables `q`.
    pub q: usize,
    /// Number of regression coefficients `p`.
    pub p: usize,
    /// `n × l`; missing entries hold NaN.
    pub y: Vec<f64>,
    /// `n × l`.
    pub observed: Vec<bool>,
    /// `n × l × p`.
    pub x: Vec<f64>,
    /// `n × l × q`.
    pub z: Vec<f64>,
}

impl Dataset {
    /// Single outcome, single latent variable, `Z = 1`, no covariates.
    pub fn univariate(dim: usize, coords: Vec<f64>, y: Vec<Option<f64>>) -> Result<Self> {
        let n = y.len();
        let observed: Vec<bool> = y.iter().map(Option::is_some).collect();
        let y = y.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        Dataset::new(dim, coords, 1, 1, 0, y, observed, vec![], vec![1.0; n])
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        l: usize,
        q: usize,
        p: usize,
        y: Vec<f64>,
        observed: Vec<bool>,
        x: Vec<f64>,
        z: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch(
                "locations need at least one coordinate".into(),
            ));
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        if l == 0 || q == 0 {
            return Err(Error::DimensionMismatch("need l >= 1 and q >= 1".into()));
        }
        let n = coords.len() / dim;
        let checks = [
            ("y", y.len(), n * l),
            ("observed", observed.len(), n * l),
            ("x", x.len(), n * l * p),
            ("z", z.len(), n * l * q),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has {got} entries, expected {want}"
                )));
            }
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate at location {}", i / dim)));
        }
        for (k, (&v, &o)) in y.iter().zip(&observed).enumerate() {
            if o && !v.is_finite() {
                return Err(Error::Domain(format!(
                    "observed outcome at location {} is not finite",
                    k / l
                )));
            }
        }
        if x.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::Domain("covariates must be finite".into()));
        }
        Ok(Dataset {
            dim,
            coords,
            l,
            q,
            p,
            y,
            observed,
            x,
            z,
        })
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn loc(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn x_row(&self, i: usize, r: usize) -> &[f64] {
        let k = (i * self.l + r) * self.p;
        &self.x[k..k + self.p]
    }

    pub fn z_row(&self, i: usize, r: usize) -> &[f64] {
        let k = (i * self.l + r) * self.q;
        &self.z[k..k + self.q]
    }

    pub fn is_observed(&self, i: usize, r: usize) -> bool {
        self.observed[i * self.l + r]
    }

    /// True when at least one outcome is observed at location `i`.
    pub fn any_observed(&self, i: usize) -> bool {
        self.observed[i * self.l..(i + 1) * self.l].iter().any(|&o| o)
    }

    pub fn n_observed(&self, r: usize) -> usize {
        (0..self.n()).filter(|&i| self.is_observed(i, r)).count()
    }

    /// Per-axis `(min, max)` of the coordinates.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        bounds(&self.coords, self.dim)
    }

    /// Appends locations with all outcomes missing, zero `X` and the given `Z`
    /// row (`l × q`).
    pub fn push_missing(&mut self, coords: &[f64], z_row: &[f64]) {
        debug_assert_eq!(coords.len(), self.dim);
        debug_assert_eq!(z_row.len(), self.l * self.q);
        self.coords.extend_from_slice(coords);
        self.y.extend(std::iter::repeat_n(f64::NAN, self.l));
        self.observed.extend(std::iter::repeat_n(false, self.l));
        self.x.extend(std::iter::repeat_n(0.0, self.l * self.p));
        self.z.extend_from_slice(z_row);
    }

    /// Marks outcome `r` at location `i` as missing. The stored value is kept.
    pub fn mask(&mut self, i: usize, r: usize) {
        self.observed[i * self.l + r] = false;
    }
}

pub(crate) fn bounds(coords: &[f64], dim: usize) -> Vec<(f64, f64)> {
    let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
    for row in coords.chunks_exact(dim) {
        for (k, &v) in row.iter().enumerate() {
            b[k].0 = b[k].0.min(v);
            b[k].1 = b[k].1.max(v);
        }
    }
    b
}
