//! Full-conditional updates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::covariance::Support;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gibbs::{ChainState, PriorSpec};
use crate::linalg::{cholesky_auto, sample_from_precision};
use crate::mesh::MeshGraph;
use crate::mgp::{gather, log_density_other, log_density_reference, scatter, BlockKind, BlockSpec, Layout, Moments};
use crate::rng::{substream, Purpose};

pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

fn fixed_effect(data: &Dataset, beta: &[f64], i: usize, r: usize) -> f64 {
    data.x_row(i, r).iter().zip(beta).map(|(a, b)| a * b).sum()
}

/// Adds `Zᵀ D⁻¹ Z` and `Zᵀ D⁻¹ (y - Xβ)` over the observed entries of a block.
fn add_data_term(data: &Dataset, state: &ChainState, locs: &[usize], prec: &mut DMatrix<f64>, rhs: &mut DVector<f64>) {
    let q = data.q;
    for (k, &i) in locs.iter().enumerate() {
        for r in 0..data.l {
            if !data.is_observed(i, r) {
                continue;
            }
            let z = data.z_row(i, r);
            let inv = 1.0 / state.tau2[r];
            let resid = data.y[i * data.l + r] - fixed_effect(data, &state.beta, i, r);
            for a in 0..q {
                rhs[k * q + a] += z[a] * resid * inv;
                for b in 0..q {
                    prec[(k * q + a, k * q + b)] += z[a] * z[b] * inv;
                }
            }
        }
    }
}

fn block<'a>(layout: &'a Layout, kind: BlockKind, b: usize) -> &'a BlockSpec {
    match kind {
        BlockKind::Reference => &layout.ref_blocks[b],
        BlockKind::Other => &layout.other_blocks[b],
    }
}

/// Precision and linear term of the full conditional of reference block `b`:
/// prior term, one term per child (reference or not) and the data term.
pub fn reference_conditional(
    layout: &Layout,
    data: &Dataset,
    moments: &Moments,
    state: &ChainState,
    b: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let q = layout.q;
    let spec = &layout.ref_blocks[b];
    let m = moments.reference_block(layout, b);
    let mut prec = m.r_inv.clone();
    let mut rhs = if spec.parents.is_empty() {
        DVector::zeros(prec.nrows())
    } else {
        &m.k * gather(&state.w, &layout.parent_locs(spec), q)
    };
    let wj = gather(&state.w, &spec.locs, q);
    for link in &layout.ref_children[b] {
        let cs = block(layout, link.kind, link.block);
        let mc = match link.kind {
            BlockKind::Reference => moments.reference_block(layout, link.block),
            BlockKind::Other => moments.other_block(layout, link.block),
        };
        let s = cs.parent_offsets[link.slot] * q;
        let len = cs.parent_offsets[link.slot + 1] * q - s;
        let wc = gather(&state.w, &cs.locs, q);
        let wpa = gather(&state.w, &layout.parent_locs(cs), q);
        let gkk = mc.g.view((s, s), (len, len));
        prec += gkk;
        // Hₖᵀ R⁻¹ (w_c − Σ_{l≠k} H_l w_l)
        rhs += mc.k.columns(s, len).transpose() * wc - mc.g.rows(s, len) * wpa + gkk * &wj;
    }
    add_data_term(data, state, &spec.locs, &mut prec, &mut rhs);
    (prec, rhs)
}

/// Full conditional of non-reference block `b`; these blocks have no children.
pub fn other_conditional(
    layout: &Layout,
    data: &Dataset,
    moments: &Moments,
    state: &ChainState,
    b: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let spec = &layout.other_blocks[b];
    let m = moments.other_block(layout, b);
    let mut prec = m.r_inv.clone();
    let mut rhs = &m.k * gather(&state.w, &layout.parent_locs(spec), layout.q);
    add_data_term(data, state, &spec.locs, &mut prec, &mut rhs);
    (prec, rhs)
}

fn draw(prec: DMatrix<f64>, rhs: DVector<f64>, rng: &mut impl Rng) -> Result<DVector<f64>> {
    let chol = cholesky_auto(&prec, "block full conditional")?;
    Ok(sample_from_precision(&chol, &rhs, rng))
}

/// Updates the reference blocks one color class at a time; blocks within a
/// class are drawn concurrently from the same snapshot of `w`.
pub fn update_w_reference(
    layout: &Layout,
    mesh: &MeshGraph,
    data: &Dataset,
    moments: &Moments,
    state: &mut ChainState,
    seed: u64,
) -> Result<()> {
    let it = state.iteration;
    for class in mesh.color_classes() {
        let blocks: Vec<usize> = class.iter().map(|&j| layout.ref_index[j]).collect();
        let st = &*state;
        let new: Vec<Result<DVector<f64>>> = par_map(blocks.len(), |k| {
            let b = blocks[k];
            let (prec, rhs) = reference_conditional(layout, data, moments, st, b);
            draw(prec, rhs, &mut substream(seed, it, Purpose::WReference, b as u64))
        });
        for (k, v) in new.into_iter().enumerate() {
            scatter(
                &mut state.w,
                &layout.ref_blocks[blocks[k]].locs,
                layout.q,
                v?.as_slice(),
            );
        }
    }
    Ok(())
}

pub fn update_w_other(
    layout: &Layout,
    data: &Dataset,
    moments: &Moments,
    state: &mut ChainState,
    seed: u64,
) -> Result<()> {
    let it = state.iteration;
    let st = &*state;
    let new: Vec<Result<DVector<f64>>> = par_map(layout.other_blocks.len(), |b| {
        let (prec, rhs) = other_conditional(layout, data, moments, st, b);
        draw(prec, rhs, &mut substream(seed, it, Purpose::WOther, b as u64))
    });
    for (b, v) in new.into_iter().enumerate() {
        scatter(&mut state.w, &layout.other_blocks[b].locs, layout.q, v?.as_slice());
    }
    Ok(())
}

/// Precision and linear term of the Gaussian full conditional of β, or
/// `None` without regressors.
pub fn beta_conditional(
    data: &Dataset,
    priors: &PriorSpec,
    state: &ChainState,
) -> Result<Option<(DMatrix<f64>, DVector<f64>)>> {
    let p = data.p;
    if p == 0 {
        return Ok(None);
    }
    let prior_prec = priors
        .sigma_beta
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Config("Sigma_beta is singular".into()))?;
    let mut prec = prior_prec.clone();
    let mut rhs = &prior_prec * DVector::from_column_slice(&priors.mu_beta);
    let q = data.q;
    for i in 0..data.n() {
        for r in 0..data.l {
            if !data.is_observed(i, r) {
                continue;
            }
            let x = data.x_row(i, r);
            let z = data.z_row(i, r);
            let zw: f64 = (0..q).map(|a| z[a] * state.w[i * q + a]).sum();
            let inv = 1.0 / state.tau2[r];
            let resid = data.y[i * data.l + r] - zw;
            for a in 0..p {
                rhs[a] += x[a] * resid * inv;
                for b in 0..p {
                    prec[(a, b)] += x[a] * x[b] * inv;
                }
            }
        }
    }
    Ok(Some((prec, rhs)))
}

pub fn update_beta(data: &Dataset, priors: &PriorSpec, state: &mut ChainState, seed: u64) -> Result<()> {
    if let Some((prec, rhs)) = beta_conditional(data, priors, state)? {
        let chol = prec.cholesky().ok_or(Error::Factorization {
            what: "beta full conditional".into(),
            size: data.p,
        })?;
        let mut rng = substream(seed, state.iteration, Purpose::Beta, 0);
        state.beta = sample_from_precision(&chol, &rhs, &mut rng).as_slice().to_vec();
    }
    Ok(())
}

/// Inverse-gamma draws per outcome from the residuals on observed entries.
pub fn update_tau2(data: &Dataset, priors: &PriorSpec, state: &mut ChainState, seed: u64) -> Result<()> {
    let q = data.q;
    for r in 0..data.l {
        let mut n_r = 0usize;
        let mut sse = 0.0;
        for i in 0..data.n() {
            if !data.is_observed(i, r) {
                continue;
            }
            let z = data.z_row(i, r);
            let zw: f64 = (0..q).map(|a| z[a] * state.w[i * q + a]).sum();
            let e = data.y[i * data.l + r] - fixed_effect(data, &state.beta, i, r) - zw;
            sse += e * e;
            n_r += 1;
        }
        let shape = priors.a_tau[r] + 0.5 * n_r as f64;
        let rate = priors.b_tau[r] + 0.5 * sse;
        let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Domain(e.to_string()))?;
        let mut rng = substream(seed, state.iteration, Purpose::Tau2, r as u64);
        state.tau2[r] = 1.0 / g.sample(&mut rng);
    }
    Ok(())
}

/// Maps a parameter to the unconstrained proposal scale; returns the
/// transformed value and `log |dθ/dt|`.
fn to_unconstrained(v: f64, s: Support) -> (f64, f64) {
    match s {
        Support::Positive => (v.ln(), v.ln()),
        Support::Unit => ((v / (1.0 - v)).ln(), (v * (1.0 - v)).ln()),
        Support::AboveOne => ((v - 1.0).ln(), (v - 1.0).ln()),
    }
}

fn from_unconstrained(t: f64, s: Support) -> f64 {
    match s {
        Support::Positive => t.exp(),
        Support::Unit => 1.0 / (1.0 + (-t).exp()),
        Support::AboveOne => 1.0 + t.exp(),
    }
}

pub(crate) fn log_target(layout: &Layout, moments: &Moments, w: &[f64]) -> Result<f64> {
    Ok(log_density_reference(layout, moments, w)? + log_density_other(layout, moments, w)?)
}

/// Joint random-walk Metropolis step on the free covariance parameters,
/// each on its log / logit scale. Returns whether the proposal was accepted;
/// on acceptance `moments` holds the moments of the new θ.
pub fn update_theta(
    layout: &Layout,
    data: &Dataset,
    priors: &PriorSpec,
    moments: &mut Moments,
    state: &mut ChainState,
    seed: u64,
) -> Result<bool> {
    let sup = state.theta.param_supports();
    let cur = state.theta.param_vector();
    let free: Vec<usize> = (0..cur.len()).filter(|&k| !priors.theta_fixed[k]).collect();
    if free.is_empty() {
        return Ok(false);
    }
    let mut rng = substream(seed, state.iteration, Purpose::Theta, 0);
    let mut prop = cur.clone();
    let mut log_jac = 0.0;
    for &k in &free {
        let (t, lj) = to_unconstrained(cur[k], sup[k]);
        let z: f64 = rng.sample(StandardNormal);
        prop[k] = from_unconstrained(t + state.steps[k] * z, sup[k]);
        log_jac += to_unconstrained(prop[k], sup[k]).1 - lj;
    }
    let log_u = rng.random::<f64>().ln();
    state.proposed += 1;
    let inside = free.iter().all(|&k| {
        let (lo, hi) = priors.theta_bounds[k];
        prop[k].is_finite() && prop[k] >= lo && prop[k] <= hi
    });
    if !inside {
        return Ok(false);
    }
    let Ok(theta_new) = state.theta.with_param_vector(&prop) else {
        return Ok(false);
    };
    let Ok(m_new) = Moments::compute(layout, data, &theta_new) else {
        return Ok(false);
    };
    let new = log_target(layout, &m_new, &state.w)?;
    let old = log_target(layout, moments, &state.w)?;
    if new.is_finite() && log_u < new - old + log_jac {
        state.theta = theta_new;
        *moments = m_new;
        state.accepted += 1;
        Ok(true)
    } else {
        Ok(false)
    }
}
