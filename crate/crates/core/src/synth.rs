//! Synthetic space-time data: Gaussian process draws on regular grids,
//! measurement noise and cloud-shaped gaps.

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::{block_cov_sym, CovParams, GneitingParams, LagMode};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, sample_from_cov_factor};
use crate::mgp::{gather, scatter, GeometryConfig, MeshedModel, Moments};
use crate::rng::{substream, Purpose};

/// Largest `n · q` sampled from the dense covariance unless forced.
pub const DENSE_LIMIT: usize = 4000;

/// Cell-centred coordinates `(i + 0.5) / n_h` of a regular grid, last axis
/// varying fastest.
pub fn grid_coords(shape: &[usize]) -> Vec<f64> {
    let n: usize = shape.iter().product();
    let mut out = Vec::with_capacity(n * shape.len());
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..n {
        out.extend(idx.iter().zip(shape).map(|(&i, &s)| (i as f64 + 0.5) / s as f64));
        for h in (0..shape.len()).rev() {
            idx[h] += 1;
            if idx[h] < shape[h] {
                break;
            }
            idx[h] = 0;
        }
    }
    out
}

/// One point of the simulation sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub tau2: f64,
    /// Temporal range (`a1`).
    pub a1: f64,
    /// Space-time separability (`β1`).
    pub beta1: f64,
    /// Spatial decay.
    pub c: f64,
}

impl SweepPoint {
    /// Unit-variance Gneiting covariance with unsquared lags. On the unit
    /// cube the squared-lag form is nearly squared-exponential in space for
    /// every `c` of the sweep, which leaves block Gibbs updates of `w` almost
    /// frozen when started from zero.
    pub fn covariance(&self) -> CovParams {
        CovParams::Gneiting(GneitingParams {
            sigma2: 1.0,
            c: self.c,
            a1: self.a1,
            beta1: self.beta1,
            lag: LagMode::Unsquared,
        })
    }
}

/// The 3 × 3 × 3 × 3 parameter grid of the gap-filling study.
pub fn sweep_grid() -> Vec<SweepPoint> {
    let mut v = Vec::with_capacity(81);
    for tau2 in [1.0 / 1000.0, 1.0 / 20.0, 1.0 / 10.0] {
        for a1 in [5.0, 50.0, 500.0] {
            for beta1 in [1.0 / 20.0, 0.5, 1.0 - 1.0 / 20.0] {
                for c in [1.0, 5.0, 25.0] {
                    v.push(SweepPoint { tau2, a1, beta1, c });
                }
            }
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudSpec {
    pub radius: f64,
    /// Frames that receive one disc-shaped cloud.
    pub cloud_frames: usize,
    /// Further frames masked everywhere except `keep_in_blank` locations.
    pub blank_frames: usize,
    pub keep_in_blank: usize,
}

impl Default for CloudSpec {
    fn default() -> Self {
        CloudSpec {
            radius: 0.1f64.sqrt(),
            cloud_frames: 6,
            blank_frames: 2,
            keep_in_blank: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Grid points per axis; the last axis is time for space-time families.
    pub shape: Vec<usize>,
    pub theta: CovParams,
    /// Noise variance, one per outcome (`l = q`, `Z = I`).
    pub tau2: Vec<f64>,
    pub clouds: Option<CloudSpec>,
    pub seed: u64,
    /// Largest `n · q` sampled from the dense covariance; larger grids use
    /// the meshed prior. Defaults to [`DENSE_LIMIT`].
    pub dense_limit: usize,
    /// Sample from the dense covariance even above `dense_limit`.
    pub force_dense: bool,
    /// Partition used for the meshed-prior path on large grids.
    pub mgp_intervals: Vec<usize>,
}

impl SynthSpec {
    pub fn new(shape: Vec<usize>, theta: CovParams, tau2: f64, seed: u64) -> Self {
        let q = theta.q();
        let d = shape.len();
        SynthSpec {
            shape,
            theta,
            tau2: vec![tau2; q],
            clouds: None,
            seed,
            dense_limit: DENSE_LIMIT,
            force_dense: false,
            mgp_intervals: vec![1; d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.is_empty() || self.shape.contains(&0) {
            return Err(Error::Config("grid shape must be nonempty".into()));
        }
        self.theta.validate()?;
        if self.tau2.len() != self.theta.q() || self.tau2.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::Config("one nonnegative tau2 per variable required".into()));
        }
        if self.mgp_intervals.len() != self.shape.len() {
            return Err(Error::Config("mgp_intervals needs one entry per axis".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    /// Locations, noisy outcomes and the observed mask; masked values are
    /// still stored in `y`.
    pub data: Dataset,
    /// Latent field, `n · q`.
    pub w_true: Vec<f64>,
    /// Whether `w_true` came from the dense covariance.
    pub dense: bool,
}

/// Draws `w` on the grid, adds noise and applies the cloud mask.
pub fn generate(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let q = spec.theta.q();
    let dim = spec.shape.len();
    let coords = grid_coords(&spec.shape);
    let n = coords.len() / dim;
    let mut z = vec![0.0; n * q * q];
    for i in 0..n {
        for r in 0..q {
            z[(i * q + r) * q + r] = 1.0;
        }
    }
    let dense = n * q <= spec.dense_limit || spec.force_dense;
    let mut data = Dataset::new(dim, coords, q, q, 0, vec![0.0; n * q], vec![true; n * q], vec![], z)?;
    let w = if dense {
        sample_dense(&data, &spec.theta, spec.seed)?
    } else {
        sample_meshed(&data, &spec.theta, &spec.mgp_intervals, spec.seed)?
    };
    let mut rng = substream(spec.seed, 1, Purpose::Synth, 0);
    for i in 0..n {
        for r in 0..q {
            let e: f64 = rng.sample(StandardNormal);
            data.y[i * q + r] = w[i * q + r] + spec.tau2[r].sqrt() * e;
        }
    }
    if let Some(c) = &spec.clouds {
        apply_clouds(&mut data, c, spec.seed)?;
    }
    Ok(Synthetic { data, w_true: w, dense })
}

fn sample_dense(data: &Dataset, theta: &CovParams, seed: u64) -> Result<Vec<f64>> {
    let locs: Vec<usize> = (0..data.n()).collect();
    let c = block_cov_sym(&data.coords, data.dim, &locs, theta);
    let chol = cholesky_jittered(&c, theta.scale(), "synthetic covariance")?;
    let mut rng = substream(seed, 0, Purpose::Synth, 0);
    Ok(sample_from_cov_factor(&chol, &DVector::zeros(c.nrows()), &mut rng)
        .as_slice()
        .to_vec())
}

/// Sequential draw from the meshed prior: each block given its already
/// drawn parents.
fn sample_meshed(data: &Dataset, theta: &CovParams, intervals: &[usize], seed: u64) -> Result<Vec<f64>> {
    let mm = MeshedModel::build(data, &GeometryConfig::new(intervals.to_vec()))?;
    let lay = &mm.layout;
    let mom = Moments::compute(lay, &mm.data, theta)?;
    let q = lay.q;
    let mut w = vec![0.0; data.n() * q];
    for (b, spec) in lay.ref_blocks.iter().enumerate() {
        debug_assert!(spec.parents.iter().all(|&p| p < b));
        let m = mom.reference_block(lay, b);
        let mean = if spec.parents.is_empty() {
            DVector::zeros(m.r.nrows())
        } else {
            &m.h * gather(&w, &lay.parent_locs(spec), q)
        };
        let mut rng = substream(seed, 0, Purpose::Synth, b as u64 + 1);
        let v = sample_from_cov_factor(&m.chol_r, &mean, &mut rng);
        scatter(&mut w, &spec.locs, q, v.as_slice());
    }
    Ok(w)
}

/// Locations whose first two coordinates fall strictly inside the disc.
pub fn in_disc(loc: &[f64], center: (f64, f64), radius: f64) -> bool {
    let dx = loc[0] - center.0;
    let dy = loc[1] - center.1;
    dx * dx + dy * dy < radius * radius
}

/// Masks cloud discs and blank frames on a space-time grid (time is the last
/// coordinate). Only the observed flags change. Returns the number of masked
/// locations.
pub fn apply_clouds(data: &mut Dataset, spec: &CloudSpec, seed: u64) -> Result<usize> {
    if data.dim < 3 {
        return Err(Error::Unsupported(
            "clouds need two spatial axes and a time axis".into(),
        ));
    }
    let t_axis = data.dim - 1;
    let mut times: Vec<f64> = (0..data.n()).map(|i| data.loc(i)[t_axis]).collect();
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    let nt = times.len();
    let frame_of = |v: f64| times.binary_search_by(|t| t.total_cmp(&v)).unwrap();
    let mut frames: Vec<Vec<usize>> = vec![Vec::new(); nt];
    for i in 0..data.n() {
        frames[frame_of(data.loc(i)[t_axis])].push(i);
    }
    let mut rng = substream(seed, 0, Purpose::Clouds, 0);
    let n_cloud = spec.cloud_frames.min(nt);
    let n_blank = spec.blank_frames.min(nt - n_cloud);
    let order = sample(&mut rng, nt, n_cloud + n_blank).into_vec();
    let mut masked = vec![false; data.n()];
    for &f in &order[..n_cloud] {
        let center = (rng.random::<f64>(), rng.random::<f64>());
        for &i in &frames[f] {
            masked[i] |= in_disc(data.loc(i), center, spec.radius);
        }
    }
    for &f in &order[n_cloud..] {
        let keep = spec.keep_in_blank.min(frames[f].len());
        let kept: Vec<usize> = sample(&mut rng, frames[f].len(), keep)
            .into_iter()
            .map(|k| frames[f][k])
            .collect();
        for &i in &frames[f] {
            masked[i] |= !kept.contains(&i);
        }
    }
    let mut count = 0;
    for (i, &m) in masked.iter().enumerate() {
        if m {
            count += 1;
            for r in 0..data.l {
                data.mask(i, r);
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_has_81_distinct_points() {
        let g = sweep_grid();
        assert_eq!(g.len(), 81);
        for (a, p) in g.iter().enumerate() {
            for b in &g[a + 1..] {
                assert_ne!(p, b);
            }
            p.covariance().validate().unwrap();
        }
    }

    #[test]
    fn grid_coords_are_cell_centres() {
        let c = grid_coords(&[2, 3]);
        assert_eq!(c.len(), 12);
        assert_eq!(&c[..4], &[0.25, 1.0 / 6.0, 0.25, 0.5]);
        assert_eq!(&c[10..], &[0.75, 5.0 / 6.0]);
    }

    #[test]
    fn zero_noise_gives_y_equal_w() {
        let s = generate(&SynthSpec::new(
            vec![5, 5, 2],
            CovParams::gneiting(1.0, 5.0, 50.0, 0.5),
            0.0,
            3,
        ))
        .unwrap();
        assert!(s.dense);
        assert_eq!(s.data.y, s.w_true);
        assert!(s.data.observed.iter().all(|&o| o));
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = SynthSpec::new(vec![6, 6, 3], CovParams::gneiting(1.0, 5.0, 50.0, 0.5), 0.1, 9);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let mut other = spec.clone();
        other.seed = 10;
        assert_ne!(generate(&spec).unwrap().w_true, generate(&other).unwrap().w_true);
    }

    #[test]
    fn meshed_path_used_above_the_limit() {
        let mut spec = SynthSpec::new(vec![20, 20, 11], CovParams::gneiting(1.0, 5.0, 50.0, 0.5), 0.05, 2);
        spec.mgp_intervals = vec![5, 5, 3];
        let s = generate(&spec).unwrap();
        assert!(!s.dense);
        let var = s.w_true.iter().map(|v| v * v).sum::<f64>() / s.w_true.len() as f64;
        assert!(var > 0.5 && var < 1.5, "marginal variance {var}");
    }

    #[test]
    fn cloud_mask_only_flips_flags() {
        let mut spec = SynthSpec::new(vec![10, 10, 10], CovParams::gneiting(1.0, 5.0, 50.0, 0.5), 0.1, 4);
        let plain = generate(&spec).unwrap();
        spec.clouds = Some(CloudSpec::default());
        let cloudy = generate(&spec).unwrap();
        assert_eq!(plain.data.y, cloudy.data.y);
        let masked = cloudy.data.observed.iter().filter(|o| !**o).count();
        // two blank frames of 100 with 10 kept, plus some cloud cover
        assert!(masked >= 180 && masked < 800, "{masked}");
    }

    #[test]
    fn radius_extremes() {
        let base = generate(&SynthSpec::new(
            vec![8, 8, 4],
            CovParams::gneiting(1.0, 5.0, 50.0, 0.5),
            0.1,
            5,
        ))
        .unwrap();
        let mut d = base.data.clone();
        let none = CloudSpec {
            radius: 0.0,
            blank_frames: 0,
            ..CloudSpec::default()
        };
        assert_eq!(apply_clouds(&mut d, &none, 1).unwrap(), 0);
        let mut d = base.data.clone();
        let full = CloudSpec {
            radius: 2.0,
            cloud_frames: 4,
            blank_frames: 0,
            keep_in_blank: 0,
        };
        assert_eq!(apply_clouds(&mut d, &full, 1).unwrap(), 256);
    }

    #[test]
    fn disc_area_matches_geometry() {
        let coords = grid_coords(&[400, 400]);
        let r = 0.1f64.sqrt();
        let inside = coords.chunks_exact(2).filter(|c| in_disc(c, (0.5, 0.5), r)).count();
        let frac = inside as f64 / 160_000.0;
        assert!((frac - std::f64::consts::PI * 0.1).abs() < 2e-3, "{frac}");
    }
}
