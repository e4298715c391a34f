//! Blocked Gibbs sampler for the hierarchical model
//! `y = Xβ + Zw + ε`, `w ~ MGP(θ)`, `ε_r ~ N(0, τ²_r)`.

mod checkpoint;
mod summary;
mod updates;

pub mod chain;


pub use chain::{run_chain, run_chain_from, ChainOutput, Draw, Timings};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub(crate) use summary::quantile_of as chain_quantile;
pub use summary::Summaries;
pub(crate) use updates::par_map;
pub use updates::{
    beta_conditional, other_conditional, reference_conditional, update_beta, update_tau2, update_theta, update_w_other,
    update_w_reference,
};

use nalgebra::DMatrix;

use crate::covariance::{CovParams, Support};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub mu_beta: Vec<f64>,
    pub sigma_beta: DMatrix<f64>,
    /// Inverse-gamma shape and rate per outcome.
    pub a_tau: Vec<f64>,
    pub b_tau: Vec<f64>,
    /// Uniform prior box for each free covariance parameter.
    pub theta_bounds: Vec<(f64, f64)>,
    pub theta_fixed: Vec<bool>,
    pub beta_fixed: bool,
    pub tau2_fixed: bool,
}

fn default_bounds(s: Support) -> (f64, f64) {
    match s {
        Support::Positive => (1e-4, 1e4),
        Support::Unit => (0.0, 1.0),
        Support::AboveOne => (1.0, 1e4),
    }
}

impl PriorSpec {
    /// Vague defaults: `β ~ N(0, 100 I)`, `τ² ~ IG(2, 1)`, wide uniform boxes.
    pub fn default_for(p: usize, l: usize, theta: &CovParams) -> Self {
        let sup = theta.param_supports();
        PriorSpec {
            mu_beta: vec![0.0; p],
            sigma_beta: DMatrix::identity(p, p) * 100.0,
            a_tau: vec![2.0; l],
            b_tau: vec![1.0; l],
            theta_bounds: sup.iter().map(|&s| default_bounds(s)).collect(),
            theta_fixed: vec![false; sup.len()],
            beta_fixed: false,
            tau2_fixed: false,
        }
    }

    pub fn validate(&self, data: &Dataset, theta: &CovParams) -> Result<()> {
        let p = data.p;
        let nt = theta.param_vector().len();
        if self.mu_beta.len() != p || self.sigma_beta.shape() != (p, p) {
            return Err(Error::Config(format!("beta prior must have dimension {p}")));
        }
        if p > 0 && self.sigma_beta.clone().cholesky().is_none() {
            return Err(Error::Config("Sigma_beta must be positive definite".into()));
        }
        if self.a_tau.len() != data.l || self.b_tau.len() != data.l {
            return Err(Error::Config(format!("tau2 prior must have {} entries", data.l)));
        }
        if self.a_tau.iter().chain(&self.b_tau).any(|v| !(*v > 0.0)) {
            return Err(Error::Config("inverse-gamma hyperparameters must be > 0".into()));
        }
        if self.theta_bounds.len() != nt || self.theta_fixed.len() != nt {
            return Err(Error::Config(format!("theta prior must have {nt} entries")));
        }
        if self.theta_bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Config("theta bounds need lo < hi".into()));
        }
        Ok(())
    }

    /// Centre of each uniform box: arithmetic for unit-interval parameters,
    /// geometric for the others (the boxes span several decades).
    pub fn theta_midpoint(&self, template: &CovParams) -> Result<CovParams> {
        let sup = template.param_supports();
        let v: Vec<f64> = self
            .theta_bounds
            .iter()
            .zip(&sup)
            .map(|(&(lo, hi), s)| match s {
                Support::Unit => 0.5 * (lo + hi),
                Support::AboveOne => 1.0 + ((lo - 1.0).max(1e-12) * (hi - 1.0)).sqrt(),
                Support::Positive => (lo * hi).sqrt(),
            })
            .collect();
        template.with_param_vector(&v)
    }

    pub fn tau2_prior_mean(&self) -> Vec<f64> {
        self.a_tau
            .iter()
            .zip(&self.b_tau)
            .map(|(&a, &b)| if a > 1.0 { b / (a - 1.0) } else { b })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WStorage {
    /// Running moments plus a fixed-size reservoir of draws.
    Summary,
    /// Every retained draw, subject to [`McmcConfig::w_budget_bytes`].
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub seed: u64,
    /// Random-walk step per covariance parameter on the transformed scale;
    /// empty means 0.1 for all.
    pub steps: Vec<f64>,
    /// Adapt the step scale during burn-in towards 23% acceptance.
    pub adapt: bool,
    pub threads: Option<usize>,
    /// Overrides the caching setting of the model geometry when set.
    pub caching: Option<bool>,
    /// Update θ at the start of an iteration rather than at its end.
    pub theta_first: bool,
    pub storage: WStorage,
    pub w_budget_bytes: usize,
    pub reservoir: usize,
    /// Progress line to standard error every this many iterations (0 = off).
    pub log_every: usize,
    pub checkpoint: Option<(std::path::PathBuf, usize)>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_iter: 1000,
            n_burn: 500,
            thin: 1,
            seed: 1,
            steps: Vec::new(),
            adapt: true,
            threads: None,
            caching: None,
            theta_first: true,
            storage: WStorage::Summary,
            w_budget_bytes: 1 << 30,
            reservoir: 256,
            log_every: 0,
            checkpoint: None,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::Config("n_iter must be >= 1".into()));
        }
        if self.n_burn >= self.n_iter {
            return Err(Error::Config("n_burn must be < n_iter".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        if self.reservoir == 0 {
            return Err(Error::Config("reservoir must be >= 1".into()));
        }
        if self.steps.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Config("proposal steps must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn n_retained(&self) -> usize {
        (self.n_iter - self.n_burn).div_ceil(self.thin)
    }

    pub fn steps_for(&self, n_theta: usize) -> Result<Vec<f64>> {
        match self.steps.len() {
            0 => Ok(vec![0.1; n_theta]),
            n if n == n_theta => Ok(self.steps.clone()),
            n => Err(Error::Config(format!("{n} proposal steps given, {n_theta} parameters"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: Vec<f64>,
    pub tau2: Vec<f64>,
    pub theta: CovParams,
    /// Latent field, location-major (`n · q`).
    pub w: Vec<f64>,
    /// Completed iterations.
    pub iteration: u64,
    pub steps: Vec<f64>,
    pub accepted: u64,
    pub proposed: u64,
    /// Acceptances in the current adaptation window.
    pub window_accepted: u64,
}

impl ChainState {
    /// `w = 0`, `β = 0`, `τ²` at its prior mean.
    pub fn initial(data: &Dataset, priors: &PriorSpec, theta: CovParams, steps: Vec<f64>) -> Self {
        ChainState {
            beta: vec![0.0; data.p],
            tau2: priors.tau2_prior_mean(),
            theta,
            w: vec![0.0; data.n() * data.q],
            iteration: 0,
            steps,
            accepted: 0,
            proposed: 0,
            window_accepted: 0,
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}
