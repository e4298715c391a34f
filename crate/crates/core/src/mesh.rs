//! The cubic mesh: a DAG over the regions of an axis-parallel partition.
//!
//! Region `j` carries a reference node `a_j` when it has reference locations
//! and a non-reference node `b_j` when it has non-reference locations. Nodes
//! are addressed by their flat region id.
//!
//! The parent of `a_j` along axis `h` is the nearest preceding region on that
//! axis that has a reference node. `b_j` takes `{a_j} ∪ pa(a_j)` when `a_j`
//! exists; otherwise it takes the nearest reference nodes before and after it
//! along every axis. If that still yields nothing (every line through the
//! region is empty) it falls back to the closest reference node in index
//! space.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::tessellation::{flat_index, multi_index};

#[derive(Debug, Clone, PartialEq)]
pub struct MeshGraph {
    pub shape: Vec<usize>,
    /// Region has a reference node.
    pub ref_mask: Vec<bool>,
    /// Region has a non-reference node.
    pub other_mask: Vec<bool>,
    /// Ordered parents of each reference node (by axis).
    pub ref_parents: Vec<Vec<usize>>,
    /// Reference children of each reference node.
    pub ref_children: Vec<Vec<usize>>,
    /// Ordered parents of each non-reference node.
    pub other_parents: Vec<Vec<usize>>,
    /// Non-reference children of each reference node.
    pub other_children: Vec<Vec<usize>>,
    /// Color of each reference node; `usize::MAX` where there is none.
    pub colors: Vec<usize>,
    pub n_colors: usize,
}

/// Nearest region along `axis` from `idx`, backwards or forwards, whose mask
/// bit is set.
fn line_of_sight(shape: &[usize], mask: &[bool], idx: &[usize], axis: usize, forward: bool) -> Option<usize> {
    let mut p = idx.to_vec();
    loop {
        if forward {
            if p[axis] + 1 >= shape[axis] {
                return None;
            }
            p[axis] += 1;
        } else {
            if p[axis] == 0 {
                return None;
            }
            p[axis] -= 1;
        }
        let f = flat_index(shape, &p);
        if mask[f] {
            return Some(f);
        }
    }
}

pub fn build_cubic_mesh(shape: &[usize], ref_mask: &[bool], other_mask: &[bool]) -> Result<MeshGraph> {
    let m: usize = shape.iter().product();
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidParams("mesh shape must have positive extents".into()));
    }
    if ref_mask.len() != m || other_mask.len() != m {
        return Err(Error::DimensionMismatch(format!("masks must have {m} entries")));
    }
    if !ref_mask.iter().any(|&b| b) {
        return Err(Error::Empty("no region has reference locations".into()));
    }
    let axes = shape.len();
    let mut ref_parents = vec![Vec::new(); m];
    let mut ref_children = vec![Vec::new(); m];
    for j in (0..m).filter(|&j| ref_mask[j]) {
        let idx = multi_index(shape, j);
        for h in 0..axes {
            if let Some(p) = line_of_sight(shape, ref_mask, &idx, h, false) {
                ref_parents[j].push(p);
                ref_children[p].push(j);
            }
        }
    }

    let mut g = MeshGraph {
        shape: shape.to_vec(),
        ref_mask: ref_mask.to_vec(),
        other_mask: other_mask.to_vec(),
        ref_parents,
        ref_children,
        other_parents: vec![Vec::new(); m],
        other_children: vec![Vec::new(); m],
        colors: vec![usize::MAX; m],
        n_colors: 0,
    };
    for j in (0..m).filter(|&j| other_mask[j]) {
        let pa = g.other_parent_rule(j);
        for &p in &pa {
            g.other_children[p].push(j);
        }
        g.other_parents[j] = pa;
    }
    g.color_nodes();
    Ok(g)
}

fn nearest_reference(shape: &[usize], ref_mask: &[bool], idx: &[usize]) -> usize {
    (0..ref_mask.len())
        .filter(|&k| ref_mask[k])
        .min_by_key(|&k| {
            let o = multi_index(shape, k);
            let d: usize = o.iter().zip(idx).map(|(a, b)| a.abs_diff(*b).pow(2)).sum();
            (d, k)
        })
        .expect("mask checked nonempty")
}

impl MeshGraph {
    pub fn n_regions(&self) -> usize {
        self.ref_mask.len()
    }

    pub fn reference_nodes(&self) -> Vec<usize> {
        (0..self.n_regions()).filter(|&j| self.ref_mask[j]).collect()
    }

    /// Parents a non-reference node in region `j` has (or would have).
    pub fn other_parent_rule(&self, j: usize) -> Vec<usize> {
        if self.ref_mask[j] {
            let mut v = vec![j];
            v.extend_from_slice(&self.ref_parents[j]);
            return v;
        }
        let idx = multi_index(&self.shape, j);
        let mut v = Vec::new();
        for h in 0..self.shape.len() {
            for fwd in [false, true] {
                if let Some(p) = line_of_sight(&self.shape, &self.ref_mask, &idx, h, fwd) {
                    v.push(p);
                }
            }
        }
        if v.is_empty() {
            v.push(nearest_reference(&self.shape, &self.ref_mask, &idx));
        }
        v
    }

    pub fn parents_for_other(&self, j: usize) -> Result<&[usize]> {
        if j >= self.n_regions() || !self.other_mask[j] {
            return Err(Error::InvalidParams(format!("region {j} has no non-reference node")));
        }
        Ok(&self.other_parents[j])
    }

    /// Parents, children and co-parents of the reference node `j`, restricted
    /// to reference nodes. Non-reference children contribute their parents.
    pub fn markov_blanket(&self, j: usize) -> BTreeSet<usize> {
        let mut mb = BTreeSet::new();
        if !self.ref_mask[j] {
            return mb;
        }
        mb.extend(&self.ref_parents[j]);
        for &c in &self.ref_children[j] {
            mb.insert(c);
            mb.extend(&self.ref_parents[c]);
        }
        for &c in &self.other_children[j] {
            mb.extend(&self.other_parents[c]);
        }
        mb.remove(&j);
        mb
    }

    /// Seeds colors with the per-axis parity of the multi-index, repairs
    /// conflicts greedily in node order and compacts the color ids.
    fn color_nodes(&mut self) {
        let m = self.n_regions();
        let mut col = vec![usize::MAX; m];
        for j in (0..m).filter(|&j| self.ref_mask[j]) {
            let idx = multi_index(&self.shape, j);
            col[j] = idx.iter().enumerate().map(|(h, &i)| (i % 2) << h).sum();
        }
        let blankets: Vec<BTreeSet<usize>> = (0..m).map(|j| self.markov_blanket(j)).collect();
        for j in (0..m).filter(|&j| self.ref_mask[j]) {
            if blankets[j].iter().any(|&v| col[v] == col[j]) {
                let used: BTreeSet<usize> = blankets[j].iter().map(|&v| col[v]).collect();
                col[j] = (0..).find(|c| !used.contains(c)).unwrap();
            }
        }
        let used: BTreeSet<usize> = col.iter().copied().filter(|&c| c != usize::MAX).collect();
        let remap: Vec<usize> = used.iter().copied().collect();
        for c in col.iter_mut().filter(|c| **c != usize::MAX) {
            *c = remap.binary_search(c).unwrap();
        }
        self.colors = col;
        self.n_colors = remap.len();
        debug_assert!(self.coloring_is_valid());
    }

    /// True when no reference node shares its color with a member of its
    /// Markov blanket.
    pub fn coloring_is_valid(&self) -> bool {
        (0..self.n_regions())
            .filter(|&j| self.ref_mask[j])
            .all(|j| self.markov_blanket(j).iter().all(|&v| self.colors[v] != self.colors[j]))
    }

    /// Reference nodes grouped by color, each group in increasing node order.
    pub fn color_classes(&self) -> Vec<Vec<usize>> {
        let mut classes = vec![Vec::new(); self.n_colors];
        for j in (0..self.n_regions()).filter(|&j| self.ref_mask[j]) {
            classes[self.colors[j]].push(j);
        }
        classes
    }

    /// Block sparsity of the reference precision: `(nodes, pattern)` where
    /// `pattern[a * k + b]` refers to `nodes[a]`, `nodes[b]`.
    pub fn moral_sparsity(&self) -> (Vec<usize>, Vec<bool>) {
        let nodes = self.reference_nodes();
        let k = nodes.len();
        let pos = |j: usize| nodes.binary_search(&j).unwrap();
        let mut pat = vec![false; k * k];
        let mut link = |a: usize, b: usize| {
            pat[a * k + b] = true;
            pat[b * k + a] = true;
        };
        for (a, &j) in nodes.iter().enumerate() {
            link(a, a);
            let ps: Vec<usize> = self.ref_parents[j].iter().map(|&p| pos(p)).collect();
            for (x, &pa) in ps.iter().enumerate() {
                link(a, pa);
                for &pb in &ps[x + 1..] {
                    link(pa, pb);
                }
            }
        }
        (nodes, pat)
    }

    /// Removes the edge `parent → child` between reference nodes. Colors stay
    /// valid because Markov blankets only shrink.
    pub fn remove_edge(&mut self, parent: usize, child: usize) -> Result<()> {
        let pos = self
            .ref_parents
            .get(child)
            .and_then(|ps| ps.iter().position(|&p| p == parent))
            .ok_or_else(|| Error::InvalidParams(format!("no edge {parent} -> {child}")))?;
        self.ref_parents[child].remove(pos);
        self.ref_children[parent].retain(|&c| c != child);
        Ok(())
    }

    /// All reference-to-reference edges `(parent, child)`.
    pub fn reference_edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for j in 0..self.n_regions() {
            for &p in &self.ref_parents[j] {
                e.push((p, j));
            }
        }
        e
    }

    /// Edge list, one `parent child` pair per line. Reference nodes are
    /// written `a<j>`, non-reference nodes `b<j>`.
    pub fn edge_list(&self) -> String {
        let mut s = String::new();
        for (p, c) in self.reference_edges() {
            let _ = writeln!(s, "a{p} a{c}");
        }
        for j in 0..self.n_regions() {
            for &p in &self.other_parents[j] {
                let _ = writeln!(s, "a{p} b{j}");
            }
        }
        s
    }
}
