//! Octree, vertexer and mesher run end to end.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::field::{CountingField, FieldError, ScalarField};
use crate::grid::Domain;
use crate::mesh::IndexedMesh;
use crate::mesher::{self, HoleClosing, RepairReport, TriangulationReport};
use crate::octree::{self, OctreeCell, OctreeConfig, OctreeError};
use crate::vertexer::{self, DualVertex, FilterParams, VertexerConfig, VertexerStats};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Octree(#[from] OctreeError),
    #[error("field evaluation failed while solving vertices: {0}")]
    Field(#[from] FieldError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtractConfig {
    pub max_depth: u32,
    pub epsilon: f64,
    pub filter: FilterParams,
    pub sigma_ratio: f64,
    pub normal_tolerance_deg: f64,
    /// 3 gives 27 samples per cell, 5 gives 125.
    pub samples_per_axis: u32,
    pub manifold: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            max_depth: octree::DEFAULT_MAX_DEPTH,
            epsilon: octree::DEFAULT_EPSILON,
            filter: FilterParams::default(),
            sigma_ratio: vertexer::DEFAULT_SIGMA_RATIO,
            normal_tolerance_deg: mesher::DEFAULT_NORMAL_TOLERANCE_DEG,
            samples_per_axis: 3,
            manifold: false,
        }
    }
}

impl ExtractConfig {
    pub fn octree(&self) -> OctreeConfig {
        OctreeConfig {
            max_depth: self.max_depth,
            epsilon: self.epsilon,
            domain: Domain::default(),
        }
    }

    pub fn vertexer(&self) -> VertexerConfig {
        VertexerConfig {
            filter: self.filter,
            sigma_ratio: self.sigma_ratio,
            samples_per_axis: self.samples_per_axis,
            demote_outside: true,
        }
    }

    pub fn validate(&self) -> Result<(), ExtractError> {
        self.octree().validate()?;
        self.vertexer().validate().map_err(ExtractError::Config)?;
        if !(self.normal_tolerance_deg > 0.0 && self.normal_tolerance_deg <= 90.0) {
            return Err(ExtractError::Config(format!(
                "normal tolerance {} outside (0, 90] degrees",
                self.normal_tolerance_deg
            )));
        }
        Ok(())
    }

    /// Edge length of a finest-level cell.
    pub fn cell_size(&self) -> f64 {
        self.octree().cell_size()
    }
}

/// Counts and topology of one run; contains no timings, so identical runs
/// serialize identically.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtractReport {
    pub schema_version: u32,
    pub config: ExtractConfig,
    pub resolution: u32,
    pub cell_size: f64,
    pub leaf_cells: u64,
    pub demoted_cells: u64,
    pub vertexer: VertexerStats,
    pub triangulation: TriangulationReport,
    pub hole_closing: HoleClosing,
    pub repair: Option<RepairReport>,
    pub vertices: u64,
    pub triangles: u64,
    pub boundary_edges: u64,
    pub boundary_loops: u64,
    pub components: u64,
    pub euler_characteristic: i64,
    pub max_edge_degree: u64,
    pub octree_queries: u64,
    pub field_queries: u64,
}

pub struct Extraction {
    pub mesh: IndexedMesh,
    pub report: ExtractReport,
    pub vertices: BTreeMap<u64, DualVertex>,
    pub leaves: Vec<OctreeCell>,
}

/// Extracts a mesh from `field` over the default `[-1, 1]³` domain.
pub fn extract<F: ScalarField + ?Sized>(field: &F, config: &ExtractConfig) -> Result<Extraction, ExtractError> {
    config.validate()?;
    let counting = CountingField::new(field);
    let leaves = octree::build(&counting, &config.octree())?;
    let octree_queries = counting.count();
    let mut solved = vertexer::solve_all(&leaves, &counting, &Domain::default(), &config.vertexer())?;

    let quads = mesher::build_quads(&solved.vertices);
    let (mut mesh, triangulation, holes) = mesher::close_holes(&quads, config.normal_tolerance_deg);
    for key in &holes.dropped {
        solved.vertices.remove(key);
    }
    solved.stats.vertices = solved.vertices.len() as u64;
    let repair = if config.manifold {
        let (repaired, report) = mesher::manifold_repair(&mesh, 1 << config.max_depth);
        mesh = repaired;
        Some(report)
    } else {
        None
    };
    mesh.compact();
    mesh.orient_components();

    let stats = solved.stats;
    let edges = mesh.edge_triangles();
    let report = ExtractReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: *config,
        resolution: 1 << config.max_depth,
        cell_size: config.cell_size(),
        leaf_cells: leaves.len() as u64,
        demoted_cells: stats.demoted_few_samples + stats.demoted_outside,
        vertexer: stats,
        triangulation,
        hole_closing: holes,
        repair,
        vertices: mesh.vertices.len() as u64,
        triangles: mesh.triangles.len() as u64,
        boundary_edges: edges.values().filter(|t| t.len() == 1).count() as u64,
        boundary_loops: mesh.boundary_loop_count() as u64,
        components: mesh.component_count() as u64,
        euler_characteristic: mesh.euler_characteristic(),
        max_edge_degree: edges.values().map(Vec::len).max().unwrap_or(0) as u64,
        octree_queries,
        field_queries: counting.count(),
    };
    Ok(Extraction {
        mesh,
        report,
        vertices: solved.vertices,
        leaves,
    })
}
