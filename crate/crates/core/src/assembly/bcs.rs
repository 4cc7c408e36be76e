//! Boundary prescriptions and the global degree-of-freedom layout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{DofBlock, Error, Result};
use crate::mesh::{MeshGrid, Side};
use crate::nlsolve::sparse::BlockMap;

/// How a prescribed value follows the continuation parameter `t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ramp {
    /// Value is `t * target`.
    #[default]
    Scaled,
    /// Value is the target throughout.
    Fixed,
}

impl Ramp {
    pub fn apply(self, target: f64, t: f64) -> f64 {
        match self {
            Ramp::Scaled => t * target,
            Ramp::Fixed => target,
        }
    }
}

/// Displacement Dirichlet condition; `None` leaves a component free.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementBc {
    pub tag: String,
    pub values: [Option<f64>; 2],
    pub ramp: Ramp,
}

impl DisplacementBc {
    pub fn clamped(tag: &str) -> Self {
        Self {
            tag: tag.into(),
            values: [Some(0.0), Some(0.0)],
            ramp: Ramp::Fixed,
        }
    }

    /// Zero normal displacement on a symmetry plane lying on `side`.
    pub fn symmetry(tag: &str, side: Side) -> Self {
        let values = match side {
            Side::Left | Side::Right => [Some(0.0), None],
            Side::Bottom | Side::Top => [None, Some(0.0)],
        };
        Self {
            tag: tag.into(),
            values,
            ramp: Ramp::Fixed,
        }
    }
}

/// Temperature Dirichlet condition; `rise` is measured from `θ_o`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureBc {
    pub tag: String,
    pub rise: f64,
    pub ramp: Ramp,
}

/// Newton convection `q·n = h (θ − θ_∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvectionBc {
    pub tag: String,
    pub h: f64,
    pub ambient: f64,
}

/// `∫ u_component dS = 0` on a tag through one scalar multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageBc {
    pub tag: String,
    pub component: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryConditions {
    pub displacement: Vec<DisplacementBc>,
    pub temperature: Vec<TemperatureBc>,
    pub convection: Vec<ConvectionBc>,
    pub average: Vec<AverageBc>,
}

impl BoundaryConditions {
    pub fn validate(&self, mesh: &MeshGrid) -> Result<()> {
        for tag in self
            .displacement
            .iter()
            .map(|b| &b.tag)
            .chain(self.temperature.iter().map(|b| &b.tag))
            .chain(self.convection.iter().map(|b| &b.tag))
            .chain(self.average.iter().map(|b| &b.tag))
        {
            mesh.tag_index(tag)?;
        }
        for (i, a) in self.displacement.iter().enumerate() {
            for b in &self.displacement[i + 1..] {
                let overlap = (0..2).any(|c| a.values[c].is_some() && b.values[c].is_some());
                if a.tag == b.tag && overlap {
                    return Err(Error::invalid(format!("tag '{}' has two displacement conditions", a.tag)));
                }
            }
        }
        for (i, a) in self.temperature.iter().enumerate() {
            if self.temperature[i + 1..].iter().any(|b| b.tag == a.tag) {
                return Err(Error::invalid(format!("tag '{}' has two temperature conditions", a.tag)));
            }
            if self.convection.iter().any(|c| c.tag == a.tag) {
                return Err(Error::invalid(format!(
                    "tag '{}' is both temperature-prescribed and convective",
                    a.tag
                )));
            }
        }
        for c in &self.convection {
            if !(c.h > 0.0) || !c.ambient.is_finite() {
                return Err(Error::invalid(format!("invalid convection on '{}'", c.tag)));
            }
        }
        for a in &self.average {
            if a.component > 1 {
                return Err(Error::invalid("average constraint component must be 0 or 1"));
            }
        }
        Ok(())
    }
}

/// Global unknown layout: `[u (node-interleaved) | θ | λ_u | λ_θ | averages]`.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub num_nodes: usize,
    /// `(node, component)` of every traction multiplier.
    pub traction: Vec<(usize, usize)>,
    /// Node of every flux multiplier.
    pub flux: Vec<usize>,
    pub num_average: usize,
    traction_index: BTreeMap<(usize, usize), usize>,
    flux_index: BTreeMap<usize, usize>,
}

impl DofMap {
    pub fn new(mesh: &MeshGrid, bcs: &BoundaryConditions) -> Result<Self> {
        let mut traction_index = BTreeMap::new();
        for bc in &bcs.displacement {
            for f in mesh.facets_with_tag(&bc.tag)? {
                for c in 0..2 {
                    if bc.values[c].is_some() {
                        for &n in &f.nodes {
                            traction_index.entry((n, c)).or_insert(0);
                        }
                    }
                }
            }
        }
        let mut flux_index = BTreeMap::new();
        for bc in &bcs.temperature {
            for f in mesh.facets_with_tag(&bc.tag)? {
                for &n in &f.nodes {
                    flux_index.entry(n).or_insert(0);
                }
            }
        }
        let traction: Vec<(usize, usize)> = traction_index.keys().copied().collect();
        for (k, v) in traction_index.values_mut().enumerate() {
            *v = k;
        }
        let flux: Vec<usize> = flux_index.keys().copied().collect();
        for (k, v) in flux_index.values_mut().enumerate() {
            *v = k;
        }
        Ok(Self {
            num_nodes: mesh.num_nodes(),
            traction,
            flux,
            num_average: bcs.average.len(),
            traction_index,
            flux_index,
        })
    }

    #[inline]
    pub fn u(&self, node: usize, component: usize) -> usize {
        2 * node + component
    }

    #[inline]
    pub fn theta(&self, node: usize) -> usize {
        2 * self.num_nodes + node
    }

    pub fn traction_offset(&self) -> usize {
        3 * self.num_nodes
    }

    pub fn flux_offset(&self) -> usize {
        self.traction_offset() + self.traction.len()
    }

    pub fn average_offset(&self) -> usize {
        self.flux_offset() + self.flux.len()
    }

    pub fn total(&self) -> usize {
        self.average_offset() + self.num_average
    }

    pub fn traction_dof(&self, node: usize, component: usize) -> Option<usize> {
        self.traction_index
            .get(&(node, component))
            .map(|k| self.traction_offset() + k)
    }

    pub fn flux_dof(&self, node: usize) -> Option<usize> {
        self.flux_index.get(&node).map(|k| self.flux_offset() + k)
    }

    pub fn average_dof(&self, k: usize) -> usize {
        self.average_offset() + k
    }

    pub fn block_map(&self) -> BlockMap {
        let n = self.num_nodes;
        BlockMap {
            blocks: vec![
                (DofBlock::Displacement, 0..2 * n),
                (DofBlock::Temperature, 2 * n..3 * n),
                (DofBlock::TractionMultiplier, self.traction_offset()..self.flux_offset()),
                (DofBlock::FluxMultiplier, self.flux_offset()..self.average_offset()),
                (DofBlock::AverageMultiplier, self.average_offset()..self.total()),
            ],
        }
    }
}
