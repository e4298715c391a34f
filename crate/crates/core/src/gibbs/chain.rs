//! The sampler loop: schedule, retention, adaptation, progress and
//! checkpoints.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::CovParams;
use crate::error::{Error, Result};
use crate::gibbs::checkpoint::write_checkpoint;
use crate::gibbs::summary::Summaries;
use crate::gibbs::updates::{log_target, update_beta, update_tau2, update_theta, update_w_other, update_w_reference};
use crate::gibbs::{ChainState, McmcConfig, PriorSpec, WStorage};
use crate::mgp::{Layout, MeshedModel, Moments};
use crate::rng::{substream, Purpose};

/// Seconds on a monotonic clock. The browser target has no `Instant`, so
/// timings read zero there.
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
fn clock() -> f64 {
    static EPOCH: std::sync::OnceLock<std::time::Instant> = std::sync::OnceLock::new();
    EPOCH.get_or_init(std::time::Instant::now).elapsed().as_secs_f64()
}

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
fn clock() -> f64 {
    0.0
}

/// Iterations per step-size adaptation window during burn-in.
pub const ADAPT_WINDOW: u64 = 50;
pub const TARGET_ACCEPTANCE: f64 = 0.23;

#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub iteration: u64,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub tau2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timings {
    pub total_secs: f64,
    pub per_iter_secs: f64,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub theta_names: Vec<String>,
    pub draws: Vec<Draw>,
    /// Posterior summaries of `w`, `n · q` coordinates.
    pub w_summary: Summaries,
    /// Posterior predictive summaries of `y` at every data location, `n · l`.
    pub y_summary: Summaries,
    /// Every retained draw of `w` when full storage was requested.
    pub w_draws: Option<Vec<Vec<f64>>>,
    pub final_state: ChainState,
    pub acceptance_rate: f64,
    pub cache_hit_rate: f64,
    pub timings: Timings,
}

pub fn run_chain(
    model: &MeshedModel,
    priors: &PriorSpec,
    config: &McmcConfig,
    theta0: CovParams,
) -> Result<ChainOutput> {
    let steps = config.steps_for(theta0.param_vector().len())?;
    let state = ChainState::initial(&model.data, priors, theta0, steps);
    run_chain_from(model, priors, config, state)
}

/// Continues a chain from `state` (fresh or read from a checkpoint) up to
/// `config.n_iter` iterations.
pub fn run_chain_from(
    model: &MeshedModel,
    priors: &PriorSpec,
    config: &McmcConfig,
    state: ChainState,
) -> Result<ChainOutput> {
    #[cfg(feature = "parallel")]
    if let Some(t) = config.threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        return pool.install(|| chain_loop(model, priors, config, state));
    }
    chain_loop(model, priors, config, state)
}

fn check_state(model: &MeshedModel, priors: &PriorSpec, config: &McmcConfig, state: &ChainState) -> Result<()> {
    config.validate()?;
    priors.validate(&model.data, &state.theta)?;
    state.theta.validate()?;
    let d = &model.data;
    if state.theta.q() != d.q {
        return Err(Error::Config(format!(
            "covariance has {} variables, data has {}",
            state.theta.q(),
            d.q
        )));
    }
    if state.w.len() != d.n() * d.q || state.beta.len() != d.p || state.tau2.len() != d.l {
        return Err(Error::DimensionMismatch("chain state does not match the data".into()));
    }
    if state.steps.len() != state.theta.param_vector().len() {
        return Err(Error::Config(
            "one proposal step per covariance parameter required".into(),
        ));
    }
    if state.tau2.iter().any(|t| !(*t > 0.0)) || state.w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("invalid chain state".into()));
    }
    if !model.mesh.coloring_is_valid() {
        return Err(Error::Config("mesh coloring violates a Markov blanket".into()));
    }
    let per_draw = (d.n() * d.q + d.n() * d.l) * 8;
    let mut bytes = per_draw * config.reservoir.min(config.n_retained());
    if config.storage == WStorage::Full {
        bytes += d.n() * d.q * 8 * config.n_retained();
    }
    if bytes > config.w_budget_bytes {
        return Err(Error::Config(format!(
            "storing draws needs {bytes} bytes, above the budget of {}",
            config.w_budget_bytes
        )));
    }
    Ok(())
}

fn chain_loop(
    model: &MeshedModel,
    priors: &PriorSpec,
    config: &McmcConfig,
    mut state: ChainState,
) -> Result<ChainOutput> {
    check_state(model, priors, config, &state)?;
    let rebuilt;
    let layout: &Layout = match config.caching {
        Some(c) if c != model.layout.caching => {
            rebuilt = Layout::new(&model.data, &model.asg, &model.mesh, c);
            &rebuilt
        }
        _ => &model.layout,
    };
    let data = &model.data;
    let seed = config.seed;
    let mut moments = Moments::compute(layout, data, &state.theta)?;
    let mut w_summary = Summaries::new(data.n() * data.q, config.reservoir);
    let mut y_summary = Summaries::new(data.n() * data.l, config.reservoir);
    let mut w_draws = (config.storage == WStorage::Full).then(Vec::new);
    let mut draws = Vec::new();
    let start = clock();
    let first = state.iteration;

    while (state.iteration as usize) < config.n_iter {
        let it = state.iteration;
        if config.theta_first {
            theta_step(layout, model, priors, config, &mut moments, &mut state)?;
        }
        update_w_reference(layout, &model.mesh, data, &moments, &mut state, seed)?;
        update_w_other(layout, data, &moments, &mut state, seed)?;
        if !priors.beta_fixed {
            update_beta(data, priors, &mut state, seed)?;
        }
        if !priors.tau2_fixed {
            update_tau2(data, priors, &mut state, seed)?;
        }
        if !config.theta_first {
            theta_step(layout, model, priors, config, &mut moments, &mut state)?;
        }
        state.iteration += 1;

        let n_burn = config.n_burn as u64;
        if it >= n_burn && (it - n_burn) % config.thin as u64 == 0 {
            draws.push(Draw {
                iteration: it,
                theta: state.theta.param_vector(),
                beta: state.beta.clone(),
                tau2: state.tau2.clone(),
            });
            w_summary.push(&state.w, &mut substream(seed, it, Purpose::Reservoir, 0));
            let y = predictive_draw(model, &state, &mut substream(seed, it, Purpose::Predictive, 0));
            y_summary.push(&y, &mut substream(seed, it, Purpose::Reservoir, 1));
            if let Some(v) = w_draws.as_mut() {
                v.push(state.w.clone());
            }
        }
        if config.log_every > 0 && state.iteration % config.log_every as u64 == 0 {
            let ld = log_target(layout, &moments, &state.w)?;
            eprintln!(
                "iter {:>7}  logdens {:>14.4}  theta {:?}  tau2 {:?}  accept {:.3}  cache-hit {:.3}",
                state.iteration,
                ld,
                state.theta.param_vector(),
                state.tau2,
                state.acceptance_rate(),
                layout.cache_hit_rate()
            );
        }
        if let Some((path, every)) = &config.checkpoint {
            if *every > 0 && state.iteration % *every as u64 == 0 {
                write_checkpoint(path, &state)?;
            }
        }
    }
    let total = clock() - start;
    let done = (state.iteration - first).max(1) as f64;
    Ok(ChainOutput {
        theta_names: state.theta.param_names(),
        draws,
        w_summary,
        y_summary,
        w_draws,
        acceptance_rate: state.acceptance_rate(),
        cache_hit_rate: layout.cache_hit_rate(),
        final_state: state,
        timings: Timings {
            total_secs: total,
            per_iter_secs: total / done,
        },
    })
}

fn theta_step(
    layout: &Layout,
    model: &MeshedModel,
    priors: &PriorSpec,
    config: &McmcConfig,
    moments: &mut Moments,
    state: &mut ChainState,
) -> Result<()> {
    if priors.theta_fixed.iter().all(|&f| f) {
        return Ok(());
    }
    if update_theta(layout, &model.data, priors, moments, state, config.seed)? {
        state.window_accepted += 1;
    }
    let done = state.iteration + 1;
    if done % ADAPT_WINDOW == 0 {
        if config.adapt && done <= config.n_burn as u64 {
            let rate = state.window_accepted as f64 / ADAPT_WINDOW as f64;
            let f = (2.0 * (rate - TARGET_ACCEPTANCE)).exp();
            for s in state.steps.iter_mut() {
                *s *= f;
            }
        }
        state.window_accepted = 0;
    }
    Ok(())
}

/// `y* = Xβ + Zw + ε` at every data location and outcome.
fn predictive_draw(model: &MeshedModel, state: &ChainState, rng: &mut impl Rng) -> Vec<f64> {
    let d = &model.data;
    let q = d.q;
    let mut y = Vec::with_capacity(d.n() * d.l);
    for i in 0..d.n() {
        for r in 0..d.l {
            let xb: f64 = d.x_row(i, r).iter().zip(&state.beta).map(|(a, b)| a * b).sum();
            let zw: f64 = d
                .z_row(i, r)
                .iter()
                .zip(&state.w[i * q..(i + 1) * q])
                .map(|(a, b)| a * b)
                .sum();
            let e: f64 = rng.sample(StandardNormal);
            y.push(xb + zw + state.tau2[r].sqrt() * e);
        }
    }
    y
}
