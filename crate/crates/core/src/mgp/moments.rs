//! Conditional moments `H_j`, `R_j` of every block, computed once per
//! translation prototype.

use nalgebra::DMatrix;

use crate::covariance::{block_cov, block_cov_sym, CovParams};
use crate::data::Dataset;
use crate::error::Result;
use crate::linalg::{chol_logdet, cholesky_jittered, cholesky_jittered_info, symmetrize, Chol, JITTER_REL};
use crate::mgp::layout::{BlockSpec, Layout};

/// Moments of one block given its stacked parents.
#[derive(Debug, Clone)]
pub struct BlockMoments {
    /// `C_{j,P} C_P^{-1}`, `n_j q × n_P q`.
    pub h: DMatrix<f64>,
    /// `C_j - H C_{P,j}` plus the diagonal jitter that was needed.
    pub r: DMatrix<f64>,
    pub chol_r: Chol,
    /// `R^{-1}`, formed from the triangular factor.
    pub r_inv: DMatrix<f64>,
    /// `R^{-1} H`.
    pub k: DMatrix<f64>,
    /// `Hᵀ R^{-1} H`.
    pub g: DMatrix<f64>,
    /// `log |R|`.
    pub logdet: f64,
}

/// Jitter added to parent covariances before factorization.
pub fn base_jitter(p: &CovParams) -> f64 {
    JITTER_REL * p.scale()
}

/// Moments of a block with locations `own` conditioned on `parents`.
pub fn block_moments(
    coords: &[f64],
    dim: usize,
    own: &[usize],
    parents: &[usize],
    p: &CovParams,
) -> Result<BlockMoments> {
    let scale = p.scale();
    let c_own = block_cov_sym(coords, dim, own, p);
    let nq = c_own.nrows();
    let (h, mut r) = if parents.is_empty() {
        (DMatrix::zeros(nq, 0), c_own)
    } else {
        let c_par = block_cov_sym(coords, dim, parents, p);
        let chol_p = cholesky_jittered(&c_par, scale, "parent covariance")?;
        let c_op = block_cov(coords, dim, own, parents, p);
        let ht = chol_p.solve(&c_op.transpose());
        let r = &c_own - &c_op * &ht;
        (ht.transpose(), r)
    };
    symmetrize(&mut r);
    let (chol_r, jitter) = cholesky_jittered_info(&r, scale, "residual covariance")?;
    for i in 0..nq {
        r[(i, i)] += jitter;
    }
    let mut r_inv = chol_r.inverse();
    symmetrize(&mut r_inv);
    let k = chol_r.solve(&h);
    let mut g = h.transpose() * &k;
    symmetrize(&mut g);
    let logdet = chol_logdet(&chol_r);
    Ok(BlockMoments {
        h,
        r,
        chol_r,
        r_inv,
        k,
        g,
        logdet,
    })
}

/// Moments of all blocks, stored once per prototype.
#[derive(Debug, Clone)]
pub struct Moments {
    pub reference: Vec<BlockMoments>,
    pub other: Vec<BlockMoments>,
}

fn for_prototypes(
    layout: &Layout,
    data: &Dataset,
    blocks: &[BlockSpec],
    reps: &[usize],
    p: &CovParams,
) -> Result<Vec<BlockMoments>> {
    let one = |&b: &usize| {
        let spec = &blocks[b];
        let parents = layout.parent_locs(spec);
        block_moments(&data.coords, data.dim, &spec.locs, &parents, p)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        reps.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        reps.iter().map(one).collect()
    }
}

impl Moments {
    pub fn compute(layout: &Layout, data: &Dataset, p: &CovParams) -> Result<Self> {
        p.validate()?;
        let reference = for_prototypes(layout, data, &layout.ref_blocks, &layout.ref_proto.representative, p)?;
        let other = for_prototypes(
            layout,
            data,
            &layout.other_blocks,
            &layout.other_proto.representative,
            p,
        )?;
        Ok(Moments { reference, other })
    }

    pub fn reference_block<'a>(&'a self, layout: &Layout, b: usize) -> &'a BlockMoments {
        &self.reference[layout.ref_proto.id_of[b]]
    }

    pub fn other_block<'a>(&'a self, layout: &Layout, b: usize) -> &'a BlockMoments {
        &self.other[layout.other_proto.id_of[b]]
    }
}
