//! Meshed Gaussian process: block moments, densities and dense diagnostics.

pub mod dense;
pub mod density;
pub mod layout;
pub mod moments;


pub use dense::{
    assemble_precision, dense_base_covariance, kl_base_to_mgp, mgp_covariance_joint, mgp_covariance_reference,
    MgpProcess, PrecisionBlocks,
};
pub use density::{log_density_other, log_density_reference};
pub use layout::{gather, scatter, BlockKind, BlockSpec, ChildLink, Layout};
pub use moments::{block_moments, BlockMoments, Moments};

use crate::data::Dataset;
use crate::error::Result;
use crate::mesh::{build_cubic_mesh, MeshGraph};
use crate::tessellation::{
    build_partition, split_reference, AxisPartition, BreakRule, ReferencePolicy, RegionAssignment,
};

/// Geometry of a fitted model: partition, reference split, mesh and blocks.
#[derive(Debug, Clone)]
pub struct MeshedModel {
    /// Data, possibly extended with lattice points by the reference policy.
    pub data: Dataset,
    pub part: AxisPartition,
    pub asg: RegionAssignment,
    pub mesh: MeshGraph,
    pub layout: Layout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub intervals: Vec<usize>,
    pub rule: BreakRule,
    pub policy: ReferencePolicy,
    pub caching: bool,
}

impl GeometryConfig {
    pub fn new(intervals: Vec<usize>) -> Self {
        GeometryConfig {
            intervals,
            rule: BreakRule::EqualWidth,
            policy: ReferencePolicy::Observed,
            caching: true,
        }
    }
}

impl MeshedModel {
    pub fn build(data: &Dataset, cfg: &GeometryConfig) -> Result<Self> {
        let part = build_partition(&data.coords, data.dim, &cfg.intervals, cfg.rule)?;
        Self::with_partition(data, part, cfg.policy, cfg.caching)
    }

    pub fn with_partition(data: &Dataset, part: AxisPartition, policy: ReferencePolicy, caching: bool) -> Result<Self> {
        let (data, asg) = split_reference(data, &part, policy)?;
        let mesh = build_cubic_mesh(&asg.shape, &asg.reference_mask(), &asg.other_mask())?;
        let layout = Layout::new(&data, &asg, &mesh, caching);
        Ok(MeshedModel {
            data,
            part,
            asg,
            mesh,
            layout,
        })
    }

    /// Rebuilds the block layout after the mesh was edited.
    pub fn refresh_layout(&mut self) {
        self.layout = Layout::new(&self.data, &self.asg, &self.mesh, self.layout.caching);
    }
}
