//! Adaptive subdivision with sphere-test pruning.
//!
//! A cell is provably empty when the distance at its center exceeds the
//! radius of its circumscribed sphere plus a tolerance for field error. Only
//! cells that fail the test are subdivided; survivors at the maximum depth are
//! the candidate leaves handed to the vertexer.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::{FieldError, ScalarField};
use crate::grid::{CellIndex, Domain};
use crate::Point3;

pub const DEFAULT_EPSILON: f64 = 2e-3;
pub const DEFAULT_MAX_DEPTH: u32 = 7;

#[derive(Debug, Error)]
pub enum OctreeError {
    #[error("invalid octree config: {0}")]
    InvalidConfig(String),
    #[error("field evaluation failed while subdividing cell {cell} at depth {depth}: {source}")]
    Field {
        cell: u64,
        depth: u32,
        #[source]
        source: FieldError,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OctreeConfig {
    /// Grid resolution is `2^max_depth` cells per axis.
    pub max_depth: u32,
    /// Pruning tolerance added to the half-diagonal.
    pub epsilon: f64,
    pub domain: Domain,
}

impl Default for OctreeConfig {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
            epsilon: DEFAULT_EPSILON,
            domain: Domain::default(),
        }
    }
}

impl OctreeConfig {
    pub fn validate(&self) -> Result<(), OctreeError> {
        if !(4..=10).contains(&self.max_depth) {
            return Err(OctreeError::InvalidConfig(format!(
                "max_depth {} outside 4..=10",
                self.max_depth
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(OctreeError::InvalidConfig(format!("epsilon {} must be >= 0", self.epsilon)));
        }
        if !(self.domain.size.is_finite() && self.domain.size > 0.0) {
            return Err(OctreeError::InvalidConfig("domain size must be positive".into()));
        }
        Ok(())
    }

    pub fn resolution(&self) -> u32 {
        1 << self.max_depth
    }

    pub fn cell_size(&self) -> f64 {
        self.domain.cell_size(self.max_depth)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CellState {
    Empty,
    Unsolved,
    Leaf,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OctreeCell {
    pub index: CellIndex,
    pub min_corner: Point3,
    pub size: f64,
    pub depth: u32,
    pub state: CellState,
    pub morton_key: u64,
    /// Field value at the cell center.
    pub d0: f64,
}

impl OctreeCell {
    pub fn new(domain: &Domain, index: CellIndex, depth: u32, d0: f64) -> Self {
        Self {
            index,
            min_corner: domain.cell_min(index, depth),
            size: domain.cell_size(depth),
            depth,
            state: CellState::Unsolved,
            morton_key: index.morton(),
            d0,
        }
    }

    pub fn center(&self) -> Point3 {
        self.min_corner + nalgebra::Vector3::repeat(0.5 * self.size)
    }

    pub fn half_diagonal(&self) -> f64 {
        half_diagonal(self.size)
    }
}

pub fn half_diagonal(size: f64) -> f64 {
    3f64.sqrt() * size / 2.0
}

/// The sphere test on an already evaluated center distance.
pub fn center_distance_proves_empty(d0: f64, size: f64, epsilon: f64) -> bool {
    d0 > half_diagonal(size) + epsilon
}

/// Evaluates the field at the cell center and applies the sphere test.
pub fn is_provably_empty<F: ScalarField + ?Sized>(
    cell: &OctreeCell,
    field: &F,
    epsilon: f64,
) -> Result<bool, FieldError> {
    let (d0, _) = field.eval_point(cell.center())?;
    Ok(center_distance_proves_empty(d0, cell.size, epsilon))
}

/// Subdivides from the root and returns the non-empty cells at `max_depth`,
/// sorted by Morton key.
pub fn build<F: ScalarField + ?Sized>(field: &F, config: &OctreeConfig) -> Result<Vec<OctreeCell>, OctreeError> {
    config.validate()?;
    let domain = config.domain;
    let root = CellIndex::new(0, 0, 0);
    let (d0, _) = field
        .eval_point(domain.cell_center(root, 0))
        .map_err(|source| OctreeError::Field { cell: 0, depth: 0, source })?;
    if center_distance_proves_empty(d0, domain.size, config.epsilon) {
        return Ok(Vec::new());
    }
    let mut frontier = vec![OctreeCell::new(&domain, root, 0, d0)];
    for depth in 1..=config.max_depth {
        let size = domain.cell_size(depth);
        let next: Vec<Vec<OctreeCell>> = frontier
            .par_iter()
            .map(|parent| {
                let children: Vec<CellIndex> = (0..8).map(|o| parent.index.child(o)).collect();
                let centers: Vec<Point3> = children.iter().map(|&c| domain.cell_center(c, depth)).collect();
                let response = field.eval_batch(&centers).map_err(|source| OctreeError::Field {
                    cell: parent.morton_key,
                    depth: parent.depth,
                    source,
                })?;
                Ok(children
                    .into_iter()
                    .zip(response.distances)
                    .filter(|&(_, d)| !center_distance_proves_empty(d, size, config.epsilon))
                    .map(|(c, d)| OctreeCell::new(&domain, c, depth, d))
                    .collect())
            })
            .collect::<Result<_, OctreeError>>()?;
        frontier = next.into_iter().flatten().collect();
    }
    frontier.sort_by_key(|c| c.morton_key);
    Ok(frontier)
}

#[derive(Serialize)]
struct LeafRecord {
    morton_key: u64,
    min_corner: [f64; 3],
    size: f64,
    d0: f64,
}

/// One JSON object per line: `{morton_key, min_corner, size, d0}`.
pub fn write_leaves_jsonl<W: Write>(leaves: &[OctreeCell], mut out: W) -> std::io::Result<()> {
    for leaf in leaves {
        let record = LeafRecord {
            morton_key: leaf.morton_key,
            min_corner: [leaf.min_corner.x, leaf.min_corner.y, leaf.min_corner.z],
            size: leaf.size,
            d0: leaf.d0,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
