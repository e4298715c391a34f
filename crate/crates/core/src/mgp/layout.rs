//! Block structure of a fitted mesh: which locations form each block, the
//! ordered parent blocks, and translation prototypes used for caching.

use crate::data::Dataset;
use crate::mesh::MeshGraph;
use crate::tessellation::{detect_prototypes, CoordSet, PrototypeMaps, RegionAssignment};

/// Prototype matching tolerance in normalized coordinates.
pub const PROTOTYPE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub region: usize,
    /// Locations of the block in block order.
    pub locs: Vec<usize>,
    /// Indices (into the reference blocks) of the ordered parents.
    pub parents: Vec<usize>,
    /// Location offset of each parent slot inside the stacked parent vector;
    /// one extra trailing entry holds the total.
    pub parent_offsets: Vec<usize>,
}

impl BlockSpec {
    pub fn n_parent_locs(&self) -> usize {
        *self.parent_offsets.last().unwrap_or(&0)
    }
}

/// A child term in the full conditional of a reference block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChildLink {
    pub kind: BlockKind,
    /// Index of the child block within its kind.
    pub block: usize,
    /// Slot of the parent inside the child's parent list.
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Reference,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub q: usize,
    pub n: usize,
    pub dim: usize,
    pub ref_blocks: Vec<BlockSpec>,
    pub other_blocks: Vec<BlockSpec>,
    /// Region id → index into `ref_blocks`, `usize::MAX` when absent.
    pub ref_index: Vec<usize>,
    pub other_index: Vec<usize>,
    pub ref_children: Vec<Vec<ChildLink>>,
    pub ref_proto: PrototypeMaps,
    pub other_proto: PrototypeMaps,
    pub caching: bool,
}

impl Layout {
    pub fn new(data: &Dataset, asg: &RegionAssignment, mesh: &MeshGraph, caching: bool) -> Self {
        let m = asg.n_regions();
        let mut ref_index = vec![usize::MAX; m];
        let mut ref_regions = Vec::new();
        for j in 0..m {
            if !asg.reference[j].is_empty() {
                ref_index[j] = ref_regions.len();
                ref_regions.push(j);
            }
        }
        let mk = |region: usize, locs: &[usize], parent_regions: &[usize]| {
            let parents: Vec<usize> = parent_regions.iter().map(|&p| ref_index[p]).collect();
            let mut parent_offsets = vec![0];
            for &p in parent_regions {
                parent_offsets.push(parent_offsets.last().unwrap() + asg.reference[p].len());
            }
            BlockSpec {
                region,
                locs: locs.to_vec(),
                parents,
                parent_offsets,
            }
        };
        let ref_blocks: Vec<BlockSpec> = ref_regions
            .iter()
            .map(|&j| mk(j, &asg.reference[j], &mesh.ref_parents[j]))
            .collect();
        let mut other_index = vec![usize::MAX; m];
        let mut other_blocks = Vec::new();
        for j in 0..m {
            if !asg.other[j].is_empty() {
                other_index[j] = other_blocks.len();
                other_blocks.push(mk(j, &asg.other[j], &mesh.other_parents[j]));
            }
        }
        let mut ref_children = vec![Vec::new(); ref_blocks.len()];
        for (kind, blocks) in [(BlockKind::Reference, &ref_blocks), (BlockKind::Other, &other_blocks)] {
            for (b, spec) in blocks.iter().enumerate() {
                for (slot, &p) in spec.parents.iter().enumerate() {
                    ref_children[p].push(ChildLink { kind, block: b, slot });
                }
            }
        }

        let mut layout = Layout {
            q: data.q,
            n: data.n(),
            dim: data.dim,
            ref_proto: PrototypeMaps::identity(ref_blocks.len()),
            other_proto: PrototypeMaps::identity(other_blocks.len()),
            ref_blocks,
            other_blocks,
            ref_index,
            other_index,
            ref_children,
            caching,
        };
        if caching {
            let sets: Vec<CoordSet> = layout.ref_blocks.iter().map(|s| layout.key_set(data, s)).collect();
            layout.ref_proto = detect_prototypes(&sets, PROTOTYPE_TOL);
            let sets: Vec<CoordSet> = layout.other_blocks.iter().map(|s| layout.key_set(data, s)).collect();
            layout.other_proto = detect_prototypes(&sets, PROTOTYPE_TOL);
        }
        layout
    }

    /// Structured coordinate set of a block: its own rows (tag 0) followed by
    /// each parent's rows (tag `k + 1`).
    fn key_set(&self, data: &Dataset, spec: &BlockSpec) -> CoordSet {
        let mut s = CoordSet::new(self.dim, Vec::new());
        for &i in &spec.locs {
            s.values.extend_from_slice(data.loc(i));
            s.tags.push(0);
        }
        for (k, &p) in spec.parents.iter().enumerate() {
            for &i in &self.ref_blocks[p].locs {
                s.values.extend_from_slice(data.loc(i));
                s.tags.push(k as u32 + 1);
            }
        }
        s
    }

    /// Stacked parent locations of a block.
    pub fn parent_locs(&self, spec: &BlockSpec) -> Vec<usize> {
        spec.parents
            .iter()
            .flat_map(|&p| self.ref_blocks[p].locs.iter().copied())
            .collect()
    }

    /// Number of unique prototypes among the parent sets alone (reference and
    /// non-reference blocks together), ignoring the block's own locations.
    pub fn parent_prototype_count(&self, data: &Dataset) -> usize {
        let sets: Vec<CoordSet> = self
            .ref_blocks
            .iter()
            .chain(&self.other_blocks)
            .filter(|s| !s.parents.is_empty())
            .map(|spec| {
                let mut s = CoordSet::new(self.dim, Vec::new());
                for (k, &p) in spec.parents.iter().enumerate() {
                    for &i in &self.ref_blocks[p].locs {
                        s.values.extend_from_slice(data.loc(i));
                        s.tags.push(k as u32 + 1);
                    }
                }
                s
            })
            .collect();
        detect_prototypes(&sets, PROTOTYPE_TOL).n_unique()
    }

    /// `(blocks, unique prototypes)` over reference and non-reference blocks.
    pub fn cache_counts(&self) -> (usize, usize) {
        (
            self.ref_blocks.len() + self.other_blocks.len(),
            self.ref_proto.n_unique() + self.other_proto.n_unique(),
        )
    }

    /// Fraction of block moment computations served by a prototype computed
    /// for another block.
    pub fn cache_hit_rate(&self) -> f64 {
        let (b, u) = self.cache_counts();
        if b == 0 {
            0.0
        } else {
            1.0 - u as f64 / b as f64
        }
    }

    /// Reference locations in block order; the row order of dense diagnostic
    /// matrices (times `q`).
    pub fn reference_order(&self) -> Vec<usize> {
        self.ref_blocks.iter().flat_map(|b| b.locs.iter().copied()).collect()
    }

    pub fn other_order(&self) -> Vec<usize> {
        self.other_blocks.iter().flat_map(|b| b.locs.iter().copied()).collect()
    }
}

/// Gathers the `q` values of each listed location into one vector.
pub fn gather(w: &[f64], locs: &[usize], q: usize) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(
        locs.len() * q,
        locs.iter().flat_map(|&i| w[i * q..(i + 1) * q].iter().copied()),
    )
}

/// Writes a block vector back into the location-major array.
pub fn scatter(w: &mut [f64], locs: &[usize], q: usize, v: &[f64]) {
    for (k, &i) in locs.iter().enumerate() {
        w[i * q..(i + 1) * q].copy_from_slice(&v[k * q..(k + 1) * q]);
    }
}
