//! Log densities of the latent field under the meshed process.

use crate::error::{Error, Result};
use crate::linalg::{mvn_logpdf_chol, pairwise_sum};
use crate::mgp::layout::{gather, BlockSpec, Layout};
use crate::mgp::moments::{BlockMoments, Moments};

fn check_len(layout: &Layout, w: &[f64]) -> Result<()> {
    if w.len() != layout.n * layout.q {
        return Err(Error::DimensionMismatch(format!(
            "latent vector has {} entries, expected {}",
            w.len(),
            layout.n * layout.q
        )));
    }
    Ok(())
}

/// `log N(w_j | H_j w_[j], R_j)` for one block.
pub fn block_log_density(layout: &Layout, spec: &BlockSpec, m: &BlockMoments, w: &[f64]) -> f64 {
    let q = layout.q;
    let x = gather(w, &spec.locs, q);
    let mean = if spec.parents.is_empty() {
        nalgebra::DVector::zeros(x.len())
    } else {
        &m.h * gather(w, &layout.parent_locs(spec), q)
    };
    mvn_logpdf_chol(&x, &mean, &m.chol_r)
}

fn sum_blocks(
    layout: &Layout,
    blocks: &[BlockSpec],
    moment: impl Fn(usize) -> usize + Sync,
    ms: &[BlockMoments],
    w: &[f64],
) -> f64 {
    let one = |b: usize| block_log_density(layout, &blocks[b], &ms[moment(b)], w);
    #[cfg(feature = "parallel")]
    let terms: Vec<f64> = {
        use rayon::prelude::*;
        (0..blocks.len()).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let terms: Vec<f64> = (0..blocks.len()).map(one).collect();
    pairwise_sum(&terms)
}

/// `log p̃(w_S)`: sum over reference blocks.
pub fn log_density_reference(layout: &Layout, moments: &Moments, w: &[f64]) -> Result<f64> {
    check_len(layout, w)?;
    Ok(sum_blocks(
        layout,
        &layout.ref_blocks,
        |b| layout.ref_proto.id_of[b],
        &moments.reference,
        w,
    ))
}

/// `log p̃(w_U | w_S)`: sum over non-reference blocks.
pub fn log_density_other(layout: &Layout, moments: &Moments, w: &[f64]) -> Result<f64> {
    check_len(layout, w)?;
    Ok(sum_blocks(
        layout,
        &layout.other_blocks,
        |b| layout.other_proto.id_of[b],
        &moments.other,
        w,
    ))
}
