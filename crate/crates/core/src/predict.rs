//! Posterior prediction at arbitrary locations, accuracy metrics and
//! effective sample size.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::{block_cov, block_cov_sym, CovParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gibbs::ChainOutput;
use crate::linalg::{cholesky_jittered, sample_from_cov_factor};
use crate::mgp::moments::base_jitter;
use crate::mgp::MeshedModel;
use crate::rng::{substream, Purpose};

pub const DEFAULT_LEVEL: f64 = 0.95;

/// Summary of the predictive draws for one location and outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredRow {
    pub loc: usize,
    pub var: usize,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub level: f64,
    pub rows: Vec<PredRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// `X(ℓ)ᵀβ + Z(ℓ)ᵀw(ℓ)`.
    Mean,
    /// The mean plus measurement noise: a draw of `y(ℓ)`.
    Response,
}

fn summarize(loc: usize, var: usize, draws: &mut [f64], level: f64) -> PredRow {
    let n = draws.len();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var_ = if n > 1 {
        draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let a = 0.5 * (1.0 - level);
    let lower = crate::gibbs::chain_quantile(draws, a).min(mean);
    let upper = crate::gibbs::chain_quantile(draws, 1.0 - a).max(mean);
    PredRow {
        loc,
        var,
        mean,
        sd: var_.sqrt(),
        lower,
        upper,
        n_draws: n,
    }
}

fn key(loc: &[f64]) -> Vec<u64> {
    loc.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Latent draws at the query locations for one posterior draw of
/// `(θ, w)`: reused where the location is a modeled one, otherwise drawn
/// from the conditional given the parents of its region.
fn latent_at(
    model: &MeshedModel,
    query: &Dataset,
    theta: &CovParams,
    w: &[f64],
    known: &[Option<usize>],
    by_region: &BTreeMap<usize, Vec<usize>>,
    seed: u64,
    draw: u64,
) -> Result<Vec<f64>> {
    let q = model.data.q;
    let mut out = vec![0.0; query.n() * q];
    for (k, i) in known.iter().enumerate() {
        if let Some(i) = i {
            out[k * q..(k + 1) * q].copy_from_slice(&w[i * q..(i + 1) * q]);
        }
    }
    let regions: Vec<(&usize, &Vec<usize>)> = by_region.iter().collect();
    let per_region: Vec<Result<Vec<(usize, DVector<f64>)>>> = crate::gibbs::par_map(regions.len(), |r| {
        let (&region, locs) = regions[r];
        let mut rng = substream(seed, draw, Purpose::Prediction, region as u64);
        let parents = if model.mesh.other_mask[region] {
            model.mesh.other_parents[region].clone()
        } else {
            model.mesh.other_parent_rule(region)
        };
        let plocs: Vec<usize> = parents
            .iter()
            .flat_map(|&p| model.asg.reference[p].iter().copied())
            .collect();
        let d = &model.data;
        let eps = base_jitter(theta);
        let (chol_p, c_p_rows) = if plocs.is_empty() {
            (None, 0)
        } else {
            let c_p = block_cov_sym(&d.coords, d.dim, &plocs, theta);
            (
                Some(cholesky_jittered(&c_p, theta.scale(), "parent covariance")?),
                plocs.len(),
            )
        };
        let mut res = Vec::new();
        for &k in locs {
            let mut coords = query.loc(k).to_vec();
            for &i in &plocs {
                coords.extend_from_slice(d.loc(i));
            }
            let par: Vec<usize> = (1..=c_p_rows).collect();
            let mut r = block_cov_sym(&coords, d.dim, &[0], theta);
            let mut mean = DVector::zeros(q);
            if let Some(chol) = &chol_p {
                let c_lp = block_cov(&coords, d.dim, &[0], &par, theta);
                let ht = chol.solve(&c_lp.transpose());
                let wpa = DVector::from_iterator(
                    plocs.len() * q,
                    plocs.iter().flat_map(|&i| w[i * q..(i + 1) * q].iter().copied()),
                );
                mean = ht.transpose() * wpa;
                r -= &c_lp * ht;
            }
            for a in 0..q {
                r[(a, a)] += eps;
            }
            let chol_r = cholesky_jittered(&r, theta.scale(), "prediction residual")?;
            res.push((k, sample_from_cov_factor(&chol_r, &mean, &mut rng)));
        }
        Ok(res)
    });
    for r in per_region {
        for (k, v) in r? {
            out[k * q..(k + 1) * q].copy_from_slice(v.as_slice());
        }
    }
    Ok(out)
}

/// Posterior predictive summaries at the locations of `query` (its `y` is
/// ignored; `X` and `Z` rows must be supplied). Uses every retained draw of
/// `w` when the chain stored them, otherwise the reservoir subsample.
pub fn predict_at(
    model: &MeshedModel,
    chain: &ChainOutput,
    template: &CovParams,
    query: &Dataset,
    target: Target,
    level: f64,
    seed: u64,
) -> Result<PredictionResult> {
    let d = &model.data;
    if query.dim != d.dim || query.q != d.q || query.l != d.l || query.p != d.p {
        return Err(Error::DimensionMismatch(
            "query layout differs from the fitted data".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config("level must be in (0, 1)".into()));
    }
    let pairs: Vec<(&[f64], usize)> = match &chain.w_draws {
        Some(ws) => ws.iter().map(|w| w.as_slice()).zip(0..).collect(),
        None => chain
            .w_summary
            .retained()
            .iter()
            .map(|w| w.as_slice())
            .zip(chain.w_summary.retained_ids().iter().copied())
            .collect(),
    };
    if pairs.is_empty() {
        return Err(Error::Empty("no retained posterior draws".into()));
    }
    let index: HashMap<Vec<u64>, usize> = (0..d.n()).map(|i| (key(d.loc(i)), i)).collect();
    let known: Vec<Option<usize>> = (0..query.n()).map(|k| index.get(&key(query.loc(k))).copied()).collect();
    let mut by_region: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in (0..query.n()).filter(|&k| known[k].is_none()) {
        by_region
            .entry(model.part.assign_flat(query.loc(k)))
            .or_default()
            .push(k);
    }
    let (q, l) = (d.q, d.l);
    let mut samples = vec![Vec::with_capacity(pairs.len()); query.n() * l];
    for (s, &(w, id)) in pairs.iter().enumerate() {
        let dr = &chain.draws[id];
        let theta = template.with_param_vector(&dr.theta)?;
        let wl = latent_at(model, query, &theta, w, &known, &by_region, seed, s as u64)?;
        let mut rng = substream(seed, s as u64, Purpose::Predictive, u64::MAX);
        for k in 0..query.n() {
            for r in 0..l {
                let xb: f64 = query.x_row(k, r).iter().zip(&dr.beta).map(|(a, b)| a * b).sum();
                let zw: f64 = query
                    .z_row(k, r)
                    .iter()
                    .zip(&wl[k * q..(k + 1) * q])
                    .map(|(a, b)| a * b)
                    .sum();
                let mut v = xb + zw;
                if target == Target::Response {
                    v += dr.tau2[r].sqrt() * rng.sample::<f64, _>(StandardNormal);
                }
                samples[k * l + r].push(v);
            }
        }
    }
    let rows = samples
        .iter_mut()
        .enumerate()
        .map(|(j, v)| summarize(j / l, j % l, v, level))
        .collect();
    Ok(PredictionResult { level, rows })
}

/// Posterior predictive summaries of `y` at every fitted location, taken
/// from the chain's running summaries (the gap-filling output).
pub fn fill_missing(model: &MeshedModel, chain: &ChainOutput, level: f64) -> PredictionResult {
    let l = model.data.l;
    let ys = &chain.y_summary;
    let rows = (0..ys.n)
        .map(|j| {
            let (lo, hi) = ys.interval(j, level);
            PredRow {
                loc: j / l,
                var: j % l,
                mean: ys.mean[j],
                sd: ys.sd(j),
                lower: lo.min(ys.mean[j]),
                upper: hi.max(ys.mean[j]),
                n_draws: ys.count,
            }
        })
        .collect();
    PredictionResult { level, rows }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    pub coverage: f64,
}

/// MAE, RMSE and interval coverage over the entries selected by `mask`, in
/// one pass.
pub fn metrics(pred: &[PredRow], truth: &[f64], mask: &[bool]) -> Result<Metrics> {
    if pred.len() != truth.len() || pred.len() != mask.len() {
        return Err(Error::DimensionMismatch(
            "predictions, truth and mask lengths differ".into(),
        ));
    }
    let (mut n, mut abs, mut sq, mut hit) = (0usize, 0.0, 0.0, 0usize);
    for ((p, &t), &m) in pred.iter().zip(truth).zip(mask) {
        if !m {
            continue;
        }
        let e = p.mean - t;
        n += 1;
        abs += e.abs();
        sq += e * e;
        hit += (p.lower <= t && t <= p.upper) as usize;
    }
    if n == 0 {
        return Err(Error::Empty("evaluation mask selects nothing".into()));
    }
    let nf = n as f64;
    Ok(Metrics {
        n,
        mae: abs / nf,
        rmse: (sq / nf).sqrt(),
        coverage: hit as f64 / nf,
    })
}

pub const ESS_MIN_DRAWS: usize = 100;

/// Effective sample size by the initial positive sequence estimator,
/// clipped to `[1, N]`.
pub fn effective_sample_size(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < ESS_MIN_DRAWS {
        return Err(Error::Empty(format!(
            "ESS needs at least {ESS_MIN_DRAWS} draws, got {n}"
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let acov = |t: usize| dev[..n - t].iter().zip(&dev[t..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let g0 = acov(0);
    if !(g0 > 0.0) {
        return Ok(1.0);
    }
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (acov(2 * k) + acov(2 * k + 1)) / g0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 1;
    }
    Ok((n as f64 / tau.max(1e-12)).clamp(1.0, n as f64))
}

/// Dense simple-kriging mean `C_xs C_s^{-1} w_s`, a small-problem oracle.
pub fn kriging_mean(
    coords: &[f64],
    dim: usize,
    obs: &[usize],
    targets: &[usize],
    w: &DVector<f64>,
    p: &CovParams,
) -> Result<DVector<f64>> {
    let c = block_cov_sym(coords, dim, obs, p);
    let chol = cholesky_jittered(&c, p.scale(), "kriging covariance")?;
    let cx: DMatrix<f64> = block_cov(coords, dim, targets, obs, p);
    Ok(cx * chol.solve(w))
}
