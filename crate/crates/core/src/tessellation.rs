//! Axis-parallel partitions, region membership, reference/non-reference
//! splits and translation-prototype detection.
//!
//! Regions are identified by a 0-based multi-index; the flat region id is
//! row-major over the multi-index (the last axis varies fastest), so
//! increasing flat ids follow lexicographic order.

use std::collections::HashMap;

use crate::data::{bounds, Dataset};
use crate::error::{Error, Result};

/// How interval breakpoints are placed on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BreakRule {
    /// Equal-width intervals over the coordinate range.
    #[default]
    EqualWidth,
    /// Equal-count intervals from empirical quantiles of the distinct
    /// coordinate values.
    Quantile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisPartition {
    /// Per axis, `L_r + 1` strictly increasing edges; the outer edges are
    /// the bounding box.
    pub breaks: Vec<Vec<f64>>,
}

impl AxisPartition {
    /// Partition from explicit edges.
    pub fn from_breaks(breaks: Vec<Vec<f64>>) -> Result<Self> {
        if breaks.is_empty() {
            return Err(Error::Empty("partition has no axes".into()));
        }
        for (r, b) in breaks.iter().enumerate() {
            if b.len() < 2 || b.windows(2).any(|w| !(w[0] < w[1])) || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "axis {r}: breakpoints must be finite and strictly increasing"
                )));
            }
        }
        Ok(AxisPartition { breaks })
    }

    pub fn n_axes(&self) -> usize {
        self.breaks.len()
    }

    /// Number of intervals per axis.
    pub fn shape(&self) -> Vec<usize> {
        self.breaks.iter().map(|b| b.len() - 1).collect()
    }

    /// Total number of regions `M`.
    pub fn n_regions(&self) -> usize {
        self.shape().iter().product()
    }

    /// Interval index on axis `r`. Intervals are half-open `[lo, hi)`
    /// except the last, which is closed; values outside are clamped.
    pub fn interval(&self, r: usize, v: f64) -> usize {
        let b = &self.breaks[r];
        let last = b.len() - 2;
        // number of interior edges <= v
        let k = b[1..=last].partition_point(|e| *e <= v);
        k.min(last)
    }

    pub fn assign(&self, loc: &[f64]) -> Vec<usize> {
        (0..self.n_axes()).map(|r| self.interval(r, loc[r])).collect()
    }

    pub fn assign_flat(&self, loc: &[f64]) -> usize {
        let mut j = 0;
        for (r, b) in self.breaks.iter().enumerate() {
            j = j * (b.len() - 1) + self.interval(r, loc[r]);
        }
        j
    }
}

/// Row-major flat id of a multi-index.
pub fn flat_index(shape: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &s)| acc * s + i)
}

pub fn multi_index(shape: &[usize], mut j: usize) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for r in (0..shape.len()).rev() {
        idx[r] = j % shape[r];
        j /= shape[r];
    }
    idx
}

pub fn build_partition(coords: &[f64], dim: usize, intervals: &[usize], rule: BreakRule) -> Result<AxisPartition> {
    if coords.is_empty() || dim == 0 {
        return Err(Error::Empty("no locations to partition".into()));
    }
    if intervals.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{} interval counts for {dim} axes",
            intervals.len()
        )));
    }
    if intervals.iter().any(|&l| l == 0) {
        return Err(Error::InvalidParams("intervals per axis must be >= 1".into()));
    }
    let bb = bounds(coords, dim);
    let mut breaks = Vec::with_capacity(dim);
    for r in 0..dim {
        let (mut lo, mut hi) = bb[r];
        if hi <= lo {
            lo -= 0.5;
            hi += 0.5;
        }
        let l = intervals[r];
        let b = match rule {
            BreakRule::EqualWidth => {
                let mut b: Vec<f64> = (0..=l).map(|k| lo + (hi - lo) * k as f64 / l as f64).collect();
                b[l] = hi;
                b
            }
            BreakRule::Quantile => {
                let mut vals: Vec<f64> = coords.chunks_exact(dim).map(|row| row[r]).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                if vals.len() < l {
                    return Err(Error::InvalidParams(format!(
                        "axis {r}: {} distinct values cannot form {l} quantile intervals",
                        vals.len()
                    )));
                }
                let mut b = vec![lo];
                for k in 1..l {
                    // first value of the k-th equal-count group
                    b.push(vals[k * vals.len() / l]);
                }
                b.push(hi);
                b
            }
        };
        breaks.push(b);
    }
    AxisPartition::from_breaks(breaks)
}

/// Which locations enter the reference set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferencePolicy {
    /// Locations with at least one observed outcome are reference locations.
    #[default]
    Observed,
    /// The full detected lattice is the reference set; lattice points absent
    /// from the data are added with missing outcomes.
    Lattice,
    /// Regions that contain observed data are filled to the lattice (when one
    /// is detected) and all their locations are reference; every location in
    /// a region without observed data is non-reference.
    Cover,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionAssignment {
    pub shape: Vec<usize>,
    /// Flat region id per location.
    pub region_of: Vec<usize>,
    /// `S_j` per region, sorted lexicographically by coordinates.
    pub reference: Vec<Vec<usize>>,
    /// `U_j` per region, sorted lexicographically by coordinates.
    pub other: Vec<Vec<usize>>,
    pub is_reference: Vec<bool>,
    /// Position of each location inside its block.
    pub position: Vec<usize>,
}

impl RegionAssignment {
    pub fn n_regions(&self) -> usize {
        self.reference.len()
    }

    pub fn reference_mask(&self) -> Vec<bool> {
        self.reference.iter().map(|s| !s.is_empty()).collect()
    }

    pub fn other_mask(&self) -> Vec<bool> {
        self.other.iter().map(|u| !u.is_empty()).collect()
    }

    pub fn n_reference(&self) -> usize {
        self.reference.iter().map(Vec::len).sum()
    }

    pub fn n_other(&self) -> usize {
        self.other.iter().map(Vec::len).sum()
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Builds the region membership for a fixed choice of reference locations.
pub fn assign_regions(data: &Dataset, part: &AxisPartition, is_reference: Vec<bool>) -> Result<RegionAssignment> {
    if part.n_axes() != data.dim {
        return Err(Error::DimensionMismatch(format!(
            "partition has {} axes, data has {} coordinates",
            part.n_axes(),
            data.dim
        )));
    }
    let m = part.n_regions();
    let n = data.n();
    let region_of: Vec<usize> = (0..n).map(|i| part.assign_flat(data.loc(i))).collect();
    let mut reference = vec![Vec::new(); m];
    let mut other = vec![Vec::new(); m];
    for i in 0..n {
        if is_reference[i] {
            reference[region_of[i]].push(i);
        } else {
            other[region_of[i]].push(i);
        }
    }
    let mut position = vec![0; n];
    for block in reference.iter_mut().chain(other.iter_mut()) {
        block.sort_by(|&a, &b| lex_cmp(data.loc(a), data.loc(b)).then(a.cmp(&b)));
        for (k, &i) in block.iter().enumerate() {
            position[i] = k;
        }
    }
    Ok(RegionAssignment {
        shape: part.shape(),
        region_of,
        reference,
        other,
        is_reference,
        position,
    })
}

/// A regular lattice spanned by the data: per axis, equally spaced values.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub axes: Vec<Vec<f64>>,
}

impl Lattice {
    pub fn size(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }
}

/// Detects whether the distinct coordinate values on every axis are equally
/// spaced (relative tolerance `1e-6` of the spacing).
pub fn detect_lattice(coords: &[f64], dim: usize) -> Option<Lattice> {
    let mut axes = Vec::with_capacity(dim);
    for r in 0..dim {
        let mut vals: Vec<f64> = coords.chunks_exact(dim).map(|row| row[r]).collect();
        vals.sort_by(f64::total_cmp);
        let range = vals.last()? - vals.first()?;
        let tol = 1e-9 * range.abs().max(1.0);
        vals.dedup_by(|a, b| (*a - *b).abs() <= tol);
        if vals.len() > 2 {
            let step = (vals[vals.len() - 1] - vals[0]) / (vals.len() - 1) as f64;
            let ok = vals
                .iter()
                .enumerate()
                .all(|(k, v)| (v - (vals[0] + step * k as f64)).abs() <= 1e-6 * step);
            if !ok {
                return None;
            }
        }
        axes.push(vals);
    }
    Some(Lattice { axes })
}

/// Splits locations into reference and non-reference sets. Policies that fill
/// a lattice return an extended copy of the data.
pub fn split_reference(
    data: &Dataset,
    part: &AxisPartition,
    policy: ReferencePolicy,
) -> Result<(Dataset, RegionAssignment)> {
    let n = data.n();
    match policy {
        ReferencePolicy::Observed => {
            let is_ref = (0..n).map(|i| data.any_observed(i)).collect();
            Ok((data.clone(), assign_regions(data, part, is_ref)?))
        }
        ReferencePolicy::Lattice | ReferencePolicy::Cover => {
            let lattice = detect_lattice(&data.coords, data.dim);
            if policy == ReferencePolicy::Lattice && lattice.is_none() {
                return Err(Error::Unsupported(
                    "lattice reference set requested but the locations are not on a regular grid".into(),
                ));
            }
            let covered: Vec<bool> = if policy == ReferencePolicy::Cover {
                let mut c = vec![false; part.n_regions()];
                for i in 0..n {
                    if data.any_observed(i) {
                        c[part.assign_flat(data.loc(i))] = true;
                    }
                }
                c
            } else {
                vec![true; part.n_regions()]
            };
            let mut out = data.clone();
            if let Some(lat) = &lattice {
                fill_lattice(&mut out, part, lat, &covered);
            }
            let is_ref = (0..out.n()).map(|i| covered[part.assign_flat(out.loc(i))]).collect();
            let asg = assign_regions(&out, part, is_ref)?;
            Ok((out, asg))
        }
    }
}

/// Adds lattice points missing from the data inside the selected regions.
/// New points have no observed outcome, zero `X` and the `Z` of location 0.
fn fill_lattice(data: &mut Dataset, part: &AxisPartition, lat: &Lattice, regions: &[bool]) {
    let dim = data.dim;
    let key = |loc: &[f64]| -> Vec<i64> {
        (0..dim)
            .map(|r| {
                let ax = &lat.axes[r];
                let step = if ax.len() > 1 {
                    (ax[ax.len() - 1] - ax[0]) / (ax.len() - 1) as f64
                } else {
                    1.0
                };
                ((loc[r] - ax[0]) / step).round() as i64
            })
            .collect()
    };
    let mut present: HashMap<Vec<i64>, ()> = HashMap::with_capacity(data.n());
    for i in 0..data.n() {
        present.insert(key(data.loc(i)), ());
    }
    let z0: Vec<f64> = (0..data.l).flat_map(|r| data.z_row(0, r).to_vec()).collect();
    let shape: Vec<usize> = lat.axes.iter().map(Vec::len).collect();
    let mut pt = vec![0.0; dim];
    for k in 0..lat.size() {
        let idx = multi_index(&shape, k);
        for r in 0..dim {
            pt[r] = lat.axes[r][idx[r]];
        }
        if regions[part.assign_flat(&pt)] && !present.contains_key(&key(&pt)) {
            data.push_missing(&pt, &z0);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeMaps {
    /// Prototype id for each input set; ids are dense, in order of first
    /// appearance.
    pub id_of: Vec<usize>,
    /// Index of the representative input set of each prototype (the smallest
    /// matching index).
    pub representative: Vec<usize>,
}

impl PrototypeMaps {
    pub fn n_unique(&self) -> usize {
        self.representative.len()
    }

    /// One prototype per set.
    pub fn identity(g: usize) -> Self {
        PrototypeMaps {
            id_of: (0..g).collect(),
            representative: (0..g).collect(),
        }
    }
}

/// A coordinate set: row-major `rows × cols`, with an optional integer tag
/// per row. Tags are compared exactly and are never shifted; they keep the
/// sub-blocks of a structured set (a block followed by its parents) apart.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoordSet {
    pub cols: usize,
    pub values: Vec<f64>,
    /// Empty, or one tag per row.
    pub tags: Vec<u32>,
}

impl CoordSet {
    pub fn new(cols: usize, values: Vec<f64>) -> Self {
        CoordSet {
            cols,
            values,
            tags: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        if self.cols == 0 {
            0
        } else {
            self.values.len() / self.cols
        }
    }

    fn tag(&self, r: usize) -> u32 {
        self.tags.get(r).copied().unwrap_or(0)
    }
}

/// Groups coordinate sets that are translations of each other.
///
/// Each set is sorted by rows (tag, then first column, ties broken by the
/// following columns) and shifted by its first row; two sets match when the
/// tags agree and the shifted matrices agree elementwise within `tol`.
/// Coordinates are first rescaled to `[0, 1]` per column using the range over
/// all sets, so `tol` is scale-free. Each set maps to the smallest-index set
/// it matches.
pub fn detect_prototypes(sets: &[CoordSet], tol: f64) -> PrototypeMaps {
    let g = sets.len();
    let cols = sets.iter().map(|s| s.cols).max().unwrap_or(0);
    let mut lo = vec![f64::INFINITY; cols];
    let mut hi = vec![f64::NEG_INFINITY; cols];
    for s in sets {
        for row in s.values.chunks_exact(s.cols.max(1)) {
            for (k, &v) in row.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
    }
    let scale: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| if b > a { 1.0 / (b - a) } else { 1.0 })
        .collect();

    let canon: Vec<(Vec<u32>, Vec<f64>)> = sets
        .iter()
        .map(|s| {
            let c = s.cols;
            if c == 0 || s.values.is_empty() {
                return (Vec::new(), Vec::new());
            }
            let mut order: Vec<usize> = (0..s.rows()).collect();
            let row = |r: usize| &s.values[r * c..(r + 1) * c];
            order.sort_by(|&a, &b| s.tag(a).cmp(&s.tag(b)).then_with(|| lex_cmp(row(a), row(b))));
            let first = row(order[0]);
            let tags = order.iter().map(|&r| s.tag(r)).collect();
            let scale = &scale;
            let vals = order
                .iter()
                .flat_map(|&r| (0..c).map(move |k| (row(r)[k] - first[k]) * scale[k]))
                .collect();
            (tags, vals)
        })
        .collect();

    let mut id_of = vec![0; g];
    let mut representative: Vec<usize> = Vec::new();
    // bucket by shape and tags so the scan only touches comparable sets
    let mut buckets: HashMap<(usize, &[u32], usize), Vec<usize>> = HashMap::new();
    for i in 0..g {
        let key = (sets[i].cols, canon[i].0.as_slice(), canon[i].1.len());
        let cands = buckets.entry(key).or_default();
        let hit = cands.iter().copied().find(|&p| {
            let r = &canon[representative[p]].1;
            r.iter().zip(&canon[i].1).all(|(a, b)| (a - b).abs() <= tol)
        });
        match hit {
            Some(p) => id_of[i] = p,
            None => {
                id_of[i] = representative.len();
                cands.push(representative.len());
                representative.push(i);
            }
        }
    }
    PrototypeMaps { id_of, representative }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(nx: usize, ny: usize) -> Vec<f64> {
        let mut c = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                c.push((i as f64 + 0.5) / nx as f64);
                c.push((j as f64 + 0.5) / ny as f64);
            }
        }
        c
    }

    #[test]
    fn unit_square_two_by_two() {
        let part = build_partition(&[0.0, 0.0, 1.0, 1.0], 2, &[2, 2], BreakRule::EqualWidth).unwrap();
        assert_eq!(part.n_regions(), 4);
        assert_eq!(part.breaks[0], vec![0.0, 0.5, 1.0]);
        assert_eq!(part.assign(&[0.1, 0.9]), vec![0, 1]);
        assert_eq!(part.assign(&[0.5, 0.2]), vec![1, 0]);
        assert_eq!(part.assign(&[1.0, 1.0]), vec![1, 1]);
        assert_eq!(part.assign(&[-3.0, 7.0]), vec![0, 1]);
    }

    #[test]
    fn spacetime_configuration_has_500_regions() {
        let mut c = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                for t in 0..10 {
                    c.extend([
                        (i as f64 + 0.5) / 40.0,
                        (j as f64 + 0.5) / 40.0,
                        (t as f64 + 0.5) / 10.0,
                    ]);
                }
            }
        }
        let part = build_partition(&c, 3, &[10, 10, 5], BreakRule::EqualWidth).unwrap();
        assert_eq!(part.n_regions(), 500);
        let mut counts = vec![0; 500];
        for row in c.chunks_exact(3) {
            counts[part.assign_flat(row)] += 1;
        }
        assert!(counts.iter().all(|&k| k == 32));
    }

    #[test]
    fn single_interval_is_one_region() {
        let c = grid(5, 5);
        let part = build_partition(&c, 2, &[1, 1], BreakRule::EqualWidth).unwrap();
        assert_eq!(part.n_regions(), 1);
        assert!(c.chunks_exact(2).all(|r| part.assign_flat(r) == 0));
        assert!(build_partition(&[], 2, &[1, 1], BreakRule::EqualWidth).is_err());
    }

    #[test]
    fn quantile_breaks_balance_counts() {
        let c: Vec<f64> = (0..100).map(|i| ((i as f64) / 100.0).powi(3)).collect();
        let part = build_partition(&c, 1, &[4], BreakRule::Quantile).unwrap();
        let mut counts = [0; 4];
        for v in &c {
            counts[part.interval(0, *v)] += 1;
        }
        assert_eq!(counts, [25, 25, 25, 25]);
    }

    fn four_by_four_with_gaps() -> Dataset {
        let c = grid(4, 4);
        let keep: Vec<usize> = (0..16).filter(|i| ![5, 6, 10].contains(i)).collect();
        let coords: Vec<f64> = keep.iter().flat_map(|&i| c[2 * i..2 * i + 2].to_vec()).collect();
        Dataset::univariate(2, coords, keep.iter().map(|&i| Some(i as f64)).collect()).unwrap()
    }

    #[test]
    fn observed_policy_with_full_data_has_empty_u() {
        let c = grid(4, 4);
        let d = Dataset::univariate(2, c, vec![Some(0.0); 16]).unwrap();
        let part = build_partition(&d.coords, 2, &[2, 2], BreakRule::EqualWidth).unwrap();
        let (_, a) = split_reference(&d, &part, ReferencePolicy::Observed).unwrap();
        assert_eq!(a.n_other(), 0);
        assert_eq!(a.n_reference(), 16);
    }

    #[test]
    fn lattice_policy_fills_missing_points() {
        let d = four_by_four_with_gaps();
        let part = build_partition(&d.coords, 2, &[2, 2], BreakRule::EqualWidth).unwrap();
        let (ext, a) = split_reference(&d, &part, ReferencePolicy::Lattice).unwrap();
        assert_eq!(ext.n(), 16);
        assert_eq!(a.n_reference(), 16);
        assert_eq!((13..16).filter(|&i| !ext.is_observed(i, 0)).count(), 3);
        assert_eq!(ext.observed.iter().filter(|o| !**o).count(), 3);
    }

    #[test]
    fn lattice_policy_requires_grid() {
        let d = Dataset::univariate(2, vec![0.0, 0.0, 0.1, 0.3, 1.0, 1.0, 0.2, 0.25], vec![Some(1.0); 4]).unwrap();
        let part = build_partition(&d.coords, 2, &[2, 2], BreakRule::EqualWidth).unwrap();
        assert!(matches!(
            split_reference(&d, &part, ReferencePolicy::Lattice),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn cover_policy_maps_unobserved_regions_to_other() {
        let c = grid(4, 4);
        // only the lower-left 2x2 region has observations
        let y: Vec<Option<f64>> = c
            .chunks_exact(2)
            .map(|r| if r[0] < 0.5 && r[1] < 0.5 { Some(1.0) } else { None })
            .collect();
        let d = Dataset::univariate(2, c, y).unwrap();
        let part = build_partition(&d.coords, 2, &[2, 2], BreakRule::EqualWidth).unwrap();
        let (_, a) = split_reference(&d, &part, ReferencePolicy::Cover).unwrap();
        assert_eq!(a.reference_mask(), vec![true, false, false, false]);
        assert_eq!(a.other.iter().map(Vec::len).collect::<Vec<_>>(), vec![0, 4, 4, 4]);
    }

    fn set(cols: usize, v: Vec<f64>) -> CoordSet {
        CoordSet::new(cols, v)
    }

    #[test]
    fn translated_grids_share_a_prototype() {
        let base: Vec<f64> = grid(3, 3);
        let moved: Vec<f64> = base
            .chunks_exact(2)
            .rev()
            .flat_map(|r| [r[0] + 2.0, r[1] - 1.0])
            .collect();
        let m = detect_prototypes(&[set(2, base), set(2, moved)], 1e-8);
        assert_eq!(m.id_of, vec![0, 0]);
    }

    #[test]
    fn irregular_sets_do_not_share() {
        let sets: Vec<CoordSet> = (0..6)
            .map(|k| {
                let v: Vec<f64> = (0..8).map(|i| ((i * 7 + k * 13) as f64 * 0.731).sin()).collect();
                set(2, v)
            })
            .collect();
        let m = detect_prototypes(&sets, 1e-8);
        assert_eq!(m.n_unique(), 6);
        assert_eq!(m.representative, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn twenty_five_regions_share_interior_parent_sets() {
        // 15x15 lattice, 5x5 regions of 3x3 points; parent set = left and
        // lower neighbour blocks, tagged by position.
        let c = grid(15, 15);
        let d = Dataset::univariate(2, c, vec![Some(0.0); 225]).unwrap();
        let part = build_partition(&d.coords, 2, &[5, 5], BreakRule::EqualWidth).unwrap();
        let (_, a) = split_reference(&d, &part, ReferencePolicy::Observed).unwrap();
        let sets: Vec<CoordSet> = (0..25)
            .map(|j| {
                let idx = multi_index(&[5, 5], j);
                let mut s = CoordSet::new(2, Vec::new());
                for (tag, axis) in [(1, 0), (2, 1)] {
                    if idx[axis] > 0 {
                        let mut p = idx.clone();
                        p[axis] -= 1;
                        for &i in &a.reference[flat_index(&[5, 5], &p)] {
                            s.values.extend_from_slice(d.loc(i));
                            s.tags.push(tag);
                        }
                    }
                }
                s
            })
            .collect();
        let m = detect_prototypes(&sets, 1e-8);
        let interior: Vec<usize> = (0..25)
            .filter(|&j| multi_index(&[5, 5], j).iter().all(|&i| i > 0))
            .collect();
        assert_eq!(interior.len(), 16);
        assert!(interior.iter().all(|&j| m.id_of[j] == m.id_of[interior[0]]));
        // root (empty set), first row, first column, interior
        assert_eq!(m.n_unique(), 4);
    }

    proptest! {
        #[test]
        fn partition_property(n in 1usize..200, lx in 1usize..6, ly in 1usize..6, seed in 0u64..500, frac in 0.0f64..1.0) {
            let coords: Vec<f64> = (0..2 * n).map(|k| (((k as u64 + 1) * (seed + 7)) as f64 * 0.618).fract()).collect();
            let y: Vec<Option<f64>> = (0..n).map(|i| if (i as f64 / n as f64) < frac { Some(0.0) } else { None }).collect();
            let d = Dataset::univariate(2, coords, y).unwrap();
            let part = build_partition(&d.coords, 2, &[lx, ly], BreakRule::EqualWidth).unwrap();
            for policy in [ReferencePolicy::Observed, ReferencePolicy::Cover] {
                let (ext, a) = split_reference(&d, &part, policy).unwrap();
                let mut seen = vec![0; ext.n()];
                for j in 0..a.n_regions() {
                    for &i in a.reference[j].iter().chain(&a.other[j]) {
                        seen[i] += 1;
                        prop_assert_eq!(a.region_of[i], j);
                    }
                }
                prop_assert!(seen.iter().all(|&s| s == 1));
            }
            for i in 0..d.n() {
                let idx = part.assign(d.loc(i));
                let mid: Vec<f64> = (0..2).map(|r| part.breaks[r][idx[r]]).collect();
                prop_assert_eq!(part.assign(&mid), idx);
            }
        }
    }
}
