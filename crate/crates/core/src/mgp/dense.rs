//! Dense diagnostics for small problems: the implied covariance of the
//! meshed process, its block-sparse precision, the cross-covariance at
//! arbitrary locations and the KL divergence from the base process.
//!
//! None of this is used by the sampler.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use crate::covariance::{block_cov_sym, CovParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{chol_logdet, cholesky_jittered, symmetrize};
use crate::mesh::MeshGraph;
use crate::mgp::layout::Layout;
use crate::mgp::moments::{base_jitter, Moments};
use crate::tessellation::AxisPartition;

fn block_offsets(layout: &Layout, blocks: &[crate::mgp::layout::BlockSpec], start: usize) -> Vec<usize> {
    let mut off = vec![start];
    for b in blocks {
        off.push(off.last().unwrap() + b.locs.len() * layout.q);
    }
    off
}

fn parent_rows(spec: &crate::mgp::layout::BlockSpec, ref_off: &[usize]) -> Vec<usize> {
    spec.parents.iter().flat_map(|&p| ref_off[p]..ref_off[p + 1]).collect()
}

fn select(m: &DMatrix<f64>, rows: &[usize], cols: std::ops::Range<usize>) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols.start + b)])
}

fn select2(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

/// Covariance of `w_S` implied by the block moments, in
/// [`Layout::reference_order`], obtained by propagating covariances forward
/// through the DAG.
pub fn mgp_covariance_reference(layout: &Layout, moments: &Moments) -> DMatrix<f64> {
    let off = block_offsets(layout, &layout.ref_blocks, 0);
    let n = *off.last().unwrap();
    let mut c = DMatrix::zeros(n, n);
    for (b, spec) in layout.ref_blocks.iter().enumerate() {
        let m = moments.reference_block(layout, b);
        let (s, e) = (off[b], off[b + 1]);
        let pr = parent_rows(spec, &off);
        let mut own = m.r.clone();
        if !pr.is_empty() {
            let cross = &m.h * select(&c, &pr, 0..s);
            let pp = select2(&c, &pr, &pr);
            own += &m.h * pp * m.h.transpose();
            c.view_mut((s, 0), (e - s, s)).copy_from(&cross);
            c.view_mut((0, s), (s, e - s)).copy_from(&cross.transpose());
        }
        c.view_mut((s, s), (e - s, e - s)).copy_from(&own);
    }
    symmetrize(&mut c);
    c
}

/// Joint covariance of `(w_S, w_U)` in reference order followed by
/// [`Layout::other_order`].
pub fn mgp_covariance_joint(layout: &Layout, moments: &Moments) -> DMatrix<f64> {
    let cs = mgp_covariance_reference(layout, moments);
    let ns = cs.nrows();
    let ref_off = block_offsets(layout, &layout.ref_blocks, 0);
    let off = block_offsets(layout, &layout.other_blocks, ns);
    let n = *off.last().unwrap();
    let mut c = DMatrix::zeros(n, n);
    c.view_mut((0, 0), (ns, ns)).copy_from(&cs);
    let prs: Vec<Vec<usize>> = layout
        .other_blocks
        .iter()
        .map(|spec| parent_rows(spec, &ref_off))
        .collect();
    for (b, _) in layout.other_blocks.iter().enumerate() {
        let hb = &moments.other_block(layout, b).h;
        let (s, e) = (off[b], off[b + 1]);
        let cross = hb * select(&cs, &prs[b], 0..ns);
        c.view_mut((s, 0), (e - s, ns)).copy_from(&cross);
        c.view_mut((0, s), (ns, e - s)).copy_from(&cross.transpose());
        for b2 in 0..=b {
            let h2 = &moments.other_block(layout, b2).h;
            let mut blk = hb * select2(&cs, &prs[b], &prs[b2]) * h2.transpose();
            if b2 == b {
                blk += &moments.other_block(layout, b).r;
            }
            let (s2, e2) = (off[b2], off[b2 + 1]);
            c.view_mut((s, s2), (e - s, e2 - s2)).copy_from(&blk);
            c.view_mut((s2, s), (e2 - s2, e - s)).copy_from(&blk.transpose());
        }
    }
    symmetrize(&mut c);
    c
}

/// Block-sparse `(I - H)ᵀ R^{-1} (I - H)` over reference blocks.
#[derive(Debug, Clone)]
pub struct PrecisionBlocks {
    /// Row offsets of each reference block (length `blocks + 1`).
    pub offsets: Vec<usize>,
    /// Nonzero blocks keyed by `(row block, column block)`.
    pub blocks: BTreeMap<(usize, usize), DMatrix<f64>>,
}

impl PrecisionBlocks {
    pub fn n_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = *self.offsets.last().unwrap();
        let mut d = DMatrix::zeros(n, n);
        for (&(a, b), m) in &self.blocks {
            d.view_mut((self.offsets[a], self.offsets[b]), m.shape()).copy_from(m);
        }
        d
    }

    /// Block support, row-major over reference blocks.
    pub fn pattern(&self) -> Vec<bool> {
        let k = self.n_blocks();
        let mut p = vec![false; k * k];
        for &(a, b) in self.blocks.keys() {
            p[a * k + b] = true;
        }
        p
    }
}

pub fn assemble_precision(layout: &Layout, moments: &Moments) -> PrecisionBlocks {
    let q = layout.q;
    let offsets = block_offsets(layout, &layout.ref_blocks, 0);
    let mut blocks: BTreeMap<(usize, usize), DMatrix<f64>> = BTreeMap::new();
    let mut add = |a: usize, b: usize, m: DMatrix<f64>| {
        blocks.entry((a, b)).and_modify(|x| *x += &m).or_insert(m);
    };
    for (b, spec) in layout.ref_blocks.iter().enumerate() {
        let m = moments.reference_block(layout, b);
        add(b, b, m.r_inv.clone());
        for (k, &pk) in spec.parents.iter().enumerate() {
            let ck = (spec.parent_offsets[k] * q)..(spec.parent_offsets[k + 1] * q);
            let kk = m.k.columns(ck.start, ck.len()).into_owned();
            add(b, pk, -&kk);
            add(pk, b, -kk.transpose());
            for (l, &pl) in spec.parents.iter().enumerate() {
                let cl = (spec.parent_offsets[l] * q)..(spec.parent_offsets[l + 1] * q);
                add(
                    pk,
                    pl,
                    m.g.view((ck.start, cl.start), (ck.len(), cl.len())).into_owned(),
                );
            }
        }
    }
    PrecisionBlocks { offsets, blocks }
}

/// Base covariance of the reference locations in reference order, with the
/// same diagonal jitter the block factorizations use.
pub fn dense_base_covariance(layout: &Layout, data: &Dataset, p: &CovParams) -> DMatrix<f64> {
    let mut c = block_cov_sym(&data.coords, data.dim, &layout.reference_order(), p);
    let j = base_jitter(p);
    for i in 0..c.nrows() {
        c[(i, i)] += j;
    }
    c
}

/// `KL(N(0, C) ‖ N(0, C̃))` between the base covariance `c_base` (reference
/// order) and the meshed process, using the block precision and block
/// log-determinants so `C̃` is never factored.
pub fn kl_base_to_mgp(layout: &Layout, moments: &Moments, c_base: &DMatrix<f64>) -> Result<f64> {
    let q_prec = assemble_precision(layout, moments);
    let n = *q_prec.offsets.last().unwrap();
    if c_base.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("base covariance must be {n}x{n}")));
    }
    let mut tr = 0.0;
    for (&(a, b), m) in &q_prec.blocks {
        let cb = c_base.view((q_prec.offsets[a], q_prec.offsets[b]), m.shape());
        tr += m.component_mul(&cb).sum();
    }
    let logdet_mgp: f64 = (0..layout.ref_blocks.len())
        .map(|b| moments.reference_block(layout, b).logdet)
        .sum();
    let chol = c_base.clone().cholesky().ok_or(Error::Factorization {
        what: "base covariance".into(),
        size: n,
    })?;
    let logdet_base = chol_logdet(&chol);
    Ok(0.5 * (tr - n as f64 + logdet_mgp - logdet_base))
}

/// How `w(ℓ)` at an arbitrary location is expressed through the process.
#[derive(Debug, Clone)]
enum Rep {
    /// Position of a reference location in reference order.
    Reference(usize),
    /// `w(ℓ) = H w_pa + ξ` with `ξ` shared within the region.
    Other {
        region: usize,
        parent_rows: Vec<usize>,
        parent_locs: Vec<usize>,
        h: DMatrix<f64>,
    },
}

/// The meshed process on a small problem, for evaluating its
/// cross-covariance at arbitrary locations.
///
/// Two non-reference locations in the same region are correlated through the
/// base conditional covariance given the region's parents, which matches the
/// block density `N(w_{U_j} | H w_pa, R_{U_j})`; locations in different
/// regions are conditionally independent.
pub struct MgpProcess<'a> {
    pub data: &'a Dataset,
    pub part: &'a AxisPartition,
    pub mesh: &'a MeshGraph,
    pub layout: &'a Layout,
    pub params: &'a CovParams,
    pub c_tilde: DMatrix<f64>,
    ref_pos: HashMap<Vec<u64>, usize>,
    ref_off: Vec<usize>,
}

fn key(loc: &[f64]) -> Vec<u64> {
    loc.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl<'a> MgpProcess<'a> {
    pub fn new(
        data: &'a Dataset,
        part: &'a AxisPartition,
        mesh: &'a MeshGraph,
        layout: &'a Layout,
        moments: &Moments,
        params: &'a CovParams,
    ) -> Self {
        let c_tilde = mgp_covariance_reference(layout, moments);
        let ref_pos = layout
            .reference_order()
            .into_iter()
            .enumerate()
            .map(|(k, i)| (key(data.loc(i)), k))
            .collect();
        let ref_off = block_offsets(layout, &layout.ref_blocks, 0);
        MgpProcess {
            data,
            part,
            mesh,
            layout,
            params,
            c_tilde,
            ref_pos,
            ref_off,
        }
    }

    fn represent(&self, loc: &[f64]) -> Result<Rep> {
        if loc.len() != self.data.dim {
            return Err(Error::DimensionMismatch("location dimension".into()));
        }
        if let Some(&k) = self.ref_pos.get(&key(loc)) {
            return Ok(Rep::Reference(k));
        }
        let region = self.part.assign_flat(loc);
        let parents = if self.mesh.other_mask[region] {
            self.mesh.other_parents[region].clone()
        } else {
            self.mesh.other_parent_rule(region)
        };
        let mut parent_rows = Vec::new();
        let mut parent_locs = Vec::new();
        for &p in &parents {
            let b = self.layout.ref_index[p];
            parent_rows.extend(self.ref_off[b]..self.ref_off[b + 1]);
            parent_locs.extend_from_slice(&self.layout.ref_blocks[b].locs);
        }
        let h = self.regression(loc, &parent_locs)?;
        Ok(Rep::Other {
            region,
            parent_rows,
            parent_locs,
            h,
        })
    }

    /// Coordinates of `extra` followed by the listed data locations.
    fn stacked(&self, extra: &[&[f64]], locs: &[usize]) -> (Vec<f64>, usize) {
        let mut c: Vec<f64> = extra.iter().flat_map(|l| l.iter().copied()).collect();
        for &i in locs {
            c.extend_from_slice(self.data.loc(i));
        }
        (c, extra.len())
    }

    fn regression(&self, loc: &[f64], parent_locs: &[usize]) -> Result<DMatrix<f64>> {
        let (coords, _) = self.stacked(&[loc], parent_locs);
        let np = parent_locs.len();
        if np == 0 {
            return Ok(DMatrix::zeros(self.layout.q, 0));
        }
        let par: Vec<usize> = (1..=np).collect();
        let c_par = block_cov_sym(&coords, self.data.dim, &par, self.params);
        let chol = cholesky_jittered(&c_par, self.params.scale(), "parent covariance")?;
        let c_lp = crate::covariance::block_cov(&coords, self.data.dim, &[0], &par, self.params);
        Ok(chol.solve(&c_lp.transpose()).transpose())
    }

    /// `q × q` cross-covariance of `w(ℓ1)` and `w(ℓ2)`.
    pub fn cross_cov(&self, l1: &[f64], l2: &[f64]) -> Result<DMatrix<f64>> {
        let q = self.layout.q;
        let r1 = self.represent(l1)?;
        let r2 = self.represent(l2)?;
        fn rows(r: &Rep, q: usize) -> (Vec<usize>, Option<&DMatrix<f64>>) {
            match r {
                Rep::Reference(k) => ((k * q..(k + 1) * q).collect(), None),
                Rep::Other { parent_rows, h, .. } => (parent_rows.clone(), Some(h)),
            }
        }
        let (ra, ha) = rows(&r1, q);
        let (rb, hb) = rows(&r2, q);
        let mut c = select2(&self.c_tilde, &ra, &rb);
        if let Some(h) = ha {
            c = h * c;
        }
        if let Some(h) = hb {
            c *= h.transpose();
        }
        if let (
            Rep::Other {
                region: g1,
                parent_locs,
                ..
            },
            Rep::Other { region: g2, .. },
        ) = (&r1, &r2)
        {
            if g1 == g2 {
                c += self.residual(l1, l2, parent_locs)?;
            }
        }
        Ok(c)
    }

    /// Base conditional covariance of `w(ℓ1)`, `w(ℓ2)` given the parents,
    /// with the block jitter on coincident locations.
    fn residual(&self, l1: &[f64], l2: &[f64], parent_locs: &[usize]) -> Result<DMatrix<f64>> {
        let (coords, _) = self.stacked(&[l1, l2], parent_locs);
        let dim = self.data.dim;
        let np = parent_locs.len();
        let par: Vec<usize> = (2..2 + np).collect();
        let c12 = crate::covariance::block_cov(&coords, dim, &[0], &[1], self.params);
        if np == 0 {
            let mut r = c12;
            if key(l1) == key(l2) {
                for i in 0..r.nrows() {
                    r[(i, i)] += base_jitter(self.params);
                }
            }
            return Ok(r);
        }
        let c_par = block_cov_sym(&coords, dim, &par, self.params);
        let chol = cholesky_jittered(&c_par, self.params.scale(), "parent covariance")?;
        let c1p = crate::covariance::block_cov(&coords, dim, &[0], &par, self.params);
        let c2p = crate::covariance::block_cov(&coords, dim, &[1], &par, self.params);
        let mut r = c12 - &c1p * chol.solve(&c2p.transpose());
        if key(l1) == key(l2) {
            for i in 0..r.nrows() {
                r[(i, i)] += base_jitter(self.params);
            }
        }
        Ok(r)
    }
}
