//! Dual faces from edge stencils.
//!
//! Every grid edge whose four surrounding cells all hold a vertex yields a
//! quad. Quads are split along the better diagonal and triangles that
//! contradict the feature classification of any of their vertices are
//! dropped. The optional repair derives connectivity from the outer envelope
//! of the blocky model, where each vertex sits at its cell center.

mod repair;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::grid::CellIndex;
use crate::io::{write_mesh, MeshIoError};
use crate::mesh::{edge_key, IndexedMesh};
use crate::vertexer::{Classification, DualVertex, Placement};
use crate::{Point3, Vector3};

pub use repair::{manifold_repair, RepairReport};

pub const DEFAULT_NORMAL_TOLERANCE_DEG: f64 = 25.0;

/// The four cells around one grid edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeStencil {
    /// Edge direction, 0 = x.
    pub axis: usize,
    /// Grid vertex at the lower end of the edge.
    pub base: [u32; 3],
    /// Cells in right-handed order about `axis`.
    pub cells: [CellIndex; 4],
}

impl EdgeStencil {
    /// `base` must be at least 1 along both cross axes.
    pub fn new(axis: usize, base: [u32; 3]) -> Self {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        let cells = [(0, 0), (1, 0), (1, 1), (0, 1)].map(|(i, j)| {
            let mut m = base;
            m[b] = base[b] + i - 1;
            m[c] = base[c] + j - 1;
            CellIndex(m)
        });
        Self { axis, base, cells }
    }

    /// Stencil whose lowest cell is `cell`.
    pub fn from_min_cell(axis: usize, cell: CellIndex) -> Self {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        let mut base = cell.0;
        base[b] += 1;
        base[c] += 1;
        Self::new(axis, base)
    }

    /// Recovers the stencil from three of its cells.
    pub fn from_cells(cells: [CellIndex; 3]) -> Option<Self> {
        let axis = (0..3).find(|&a| cells[0].0[a] == cells[1].0[a] && cells[1].0[a] == cells[2].0[a])?;
        let mut min = cells[0].0;
        for c in &cells[1..] {
            for a in 0..3 {
                min[a] = min[a].min(c.0[a]);
            }
        }
        let s = Self::from_min_cell(axis, CellIndex(min));
        cells.iter().all(|c| s.cells.contains(c)).then_some(s)
    }

    /// The grid vertex at the upper end of the edge.
    pub fn tip(&self) -> [u32; 3] {
        let mut t = self.base;
        t[self.axis] += 1;
        t
    }
}

/// A quad candidate: mesh vertex indices in stencil order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quad {
    pub stencil: EdgeStencil,
    pub vertices: [u32; 4],
}

/// Vertices of the extracted mesh in cell-key order, with their quads.
#[derive(Clone, Debug, Default)]
pub struct QuadMesh {
    pub vertices: Vec<DualVertex>,
    pub quads: Vec<Quad>,
}

/// One quad per grid edge whose four incident cells all carry a vertex.
/// Output order follows the Morton order of each stencil's lowest cell,
/// then the axis.
pub fn build_quads(vertices: &BTreeMap<u64, DualVertex>) -> QuadMesh {
    let list: Vec<DualVertex> = vertices.values().copied().collect();
    let index: HashMap<CellIndex, u32> = list.iter().enumerate().map(|(i, v)| (v.cell, i as u32)).collect();
    let quads: Vec<Quad> = list
        .par_iter()
        .flat_map_iter(|v| {
            let index = &index;
            (0..3).filter_map(move |axis| {
                let stencil = EdgeStencil::from_min_cell(axis, v.cell);
                let mut ids = [0u32; 4];
                for (slot, cell) in ids.iter_mut().zip(&stencil.cells) {
                    *slot = *index.get(cell)?;
                }
                Some(Quad { stencil, vertices: ids })
            })
        })
        .collect();
    QuadMesh { vertices: list, quads }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TriangulationReport {
    pub quads: u64,
    pub triangles: u64,
    pub rejected_degenerate: u64,
    pub rejected_normal: u64,
}

fn longest_edge2(p: &[Point3; 3]) -> f64 {
    (0..3).map(|k| (p[(k + 1) % 3] - p[k]).norm_squared()).fold(0.0, f64::max)
}

fn is_degenerate(p: &[Point3; 3]) -> bool {
    let n = (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
    n <= 1e-12 * longest_edge2(p)
}

/// Longest edge times perimeter over `4√3·area`; 1 for an equilateral
/// triangle, infinite when degenerate.
pub fn aspect_ratio(p: &[Point3; 3]) -> f64 {
    if is_degenerate(p) {
        return f64::INFINITY;
    }
    let e: [f64; 3] = std::array::from_fn(|k| (p[(k + 1) % 3] - p[k]).norm());
    let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
    e[0].max(e[1]).max(e[2]) * (e[0] + e[1] + e[2]) / (4.0 * 3f64.sqrt() * area)
}

/// The two triangles of a quad `0 1 2 3` for diagonal 0–2 and 1–3.
pub const SPLITS: [[[usize; 3]; 2]; 2] = [[[0, 1, 2], [0, 2, 3]], [[0, 1, 3], [1, 2, 3]]];

/// Whether a unit triangle normal agrees with a vertex's feature.
pub fn normal_consistent(normal: &Vector3, class: &Classification, tolerance_rad: f64) -> bool {
    match class {
        Classification::Corner => true,
        Classification::Plane { normal: n } => normal.dot(n).abs() >= tolerance_rad.cos(),
        Classification::Edge { direction } => normal.dot(direction).abs() <= tolerance_rad.sin(),
    }
}

/// Splits one quad along the diagonal with the smaller worst aspect ratio
/// (ties take 0–2). Each non-degenerate triangle comes with whether its
/// normal agrees with all three vertex classifications.
fn triangulate_quad(q: &Quad, vertices: &[DualVertex], tol: f64) -> [Option<([u32; 3], bool)>; 2] {
    let corners = q.vertices.map(|i| vertices[i as usize].position);
    let worst = |split: &[[usize; 3]; 2]| {
        split
            .iter()
            .map(|t| aspect_ratio(&t.map(|k| corners[k])))
            .fold(0.0, f64::max)
    };
    let split = if worst(&SPLITS[1]) < worst(&SPLITS[0]) {
        &SPLITS[1]
    } else {
        &SPLITS[0]
    };
    split.map(|t| {
        let p = t.map(|k| corners[k]);
        if is_degenerate(&p) {
            return None;
        }
        let n = (p[1] - p[0]).cross(&(p[2] - p[0])).normalize();
        let ok = t
            .iter()
            .all(|&k| normal_consistent(&n, &vertices[q.vertices[k] as usize].classification, tol));
        Some((t.map(|k| q.vertices[k]), ok))
    })
}

fn tally(per_quad: &[[Option<([u32; 3], bool)>; 2]]) -> TriangulationReport {
    let mut report = TriangulationReport {
        quads: per_quad.len() as u64,
        ..Default::default()
    };
    for t in per_quad.iter().flatten() {
        match t {
            Some((_, true)) => report.triangles += 1,
            Some((_, false)) => report.rejected_normal += 1,
            None => report.rejected_degenerate += 1,
        }
    }
    report
}

/// Triangulates every quad: the better diagonal, then only non-degenerate
/// triangles that agree with all three vertex classifications.
pub fn validate_and_triangulate(quads: &QuadMesh, normal_tolerance_deg: f64) -> (IndexedMesh, TriangulationReport) {
    let tol = normal_tolerance_deg.to_radians();
    let per_quad: Vec<[Option<([u32; 3], bool)>; 2]> = quads
        .quads
        .par_iter()
        .map(|q| triangulate_quad(q, &quads.vertices, tol))
        .collect();
    let report = tally(&per_quad);
    let triangles: Vec<[u32; 3]> = per_quad.iter().flatten().flatten().filter(|t| t.1).map(|t| t.0).collect();
    let pos: Vec<Point3> = quads.vertices.iter().map(|v| v.position).collect();
    let mut mesh = IndexedMesh::new(pos, triangles);
    mesh.cells = quads.vertices.iter().map(|v| v.cell).collect();
    (mesh, report)
}

/// What [`close_holes`] changed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct HoleClosing {
    /// Cell keys of the vertices dropped, sorted.
    pub dropped: Vec<u64>,
    /// Triangles put back after failing the normal test.
    pub restored: u64,
    /// Triangles dropped for sharing no edge with any other.
    pub isolated: u64,
}

/// Triangulates like [`validate_and_triangulate`], with the same report, then
/// closes holes left by cells the surface only grazes.
///
/// Where a surface only grazes a layer of cells, as at the pole of a sphere
/// dipping a hair past a lattice plane, some of the grazed cells get a vertex
/// and some do not. The few quads among them are slivers: their triangles
/// fail the normal test or leave edges with a single face, and the surface
/// opens. Two edits are tried around each boundary edge: dropping an end
/// vertex with all its quads, and putting back the triangles of a quad that
/// the normal test rejected, one or both. An edit is kept only when it
/// leaves strictly fewer boundary edges; a vertex that was not projected,
/// and so does not stand for a graze, must in addition open no new boundary
/// edge, which spares the rims of open surfaces. Triangles left sharing no
/// edge with any other are dropped. Vertices go first, one at a time:
/// projected ones before the rest, then the one closing the most. Rejected
/// triangles and lone ones follow in index order, and the search repeats
/// until nothing changes. Quads are triangulated independently, so every
/// trial is local.
///
/// Dropped vertices stay in the vertex list, unreferenced.
pub fn close_holes(quads: &QuadMesh, normal_tolerance_deg: f64) -> (IndexedMesh, TriangulationReport, HoleClosing) {
    let tol = normal_tolerance_deg.to_radians();
    let n = quads.vertices.len();
    let tris: Vec<[Option<([u32; 3], bool)>; 2]> = quads
        .quads
        .par_iter()
        .map(|q| triangulate_quad(q, &quads.vertices, tol))
        .collect();
    let mut degree: HashMap<(u32, u32), u32> = HashMap::new();
    let mut quads_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (qi, (q, ts)) in quads.quads.iter().zip(&tris).enumerate() {
        for v in q.vertices {
            quads_of[v as usize].push(qi);
        }
        for (t, _) in ts.iter().flatten().filter(|t| t.1) {
            for e in edges(t) {
                *degree.entry(e).or_default() += 1;
            }
        }
    }
    let open_ends = |degree: &HashMap<(u32, u32), u32>| -> BTreeSet<u32> {
        degree.iter().filter(|(_, &d)| d == 1).flat_map(|(e, _)| [e.0, e.1]).collect()
    };
    // boundary edges created and removed when each edge gains `delta` faces
    let effect = |degree: &HashMap<(u32, u32), u32>, delta: &BTreeMap<(u32, u32), i64>| -> (i64, i64) {
        delta.iter().fold((0, 0), |(made, gone), (e, &d)| {
            let old = degree.get(e).copied().unwrap_or(0) as i64;
            (made + (old != 1 && old + d == 1) as i64, gone + (old == 1 && old + d != 1) as i64)
        })
    };
    let change = |degree: &HashMap<(u32, u32), u32>, delta: &BTreeMap<(u32, u32), i64>| -> i64 {
        let (made, gone) = effect(degree, delta);
        made - gone
    };
    let apply = |degree: &mut HashMap<(u32, u32), u32>, delta: &BTreeMap<(u32, u32), i64>| {
        for (e, &d) in delta {
            let slot = degree.entry(*e).or_default();
            *slot = (*slot as i64 + d) as u32;
        }
    };

    // whether each triangle slot is in the mesh
    let mut present: Vec<[bool; 2]> = tris.iter().map(|ts| ts.map(|t| t.is_some_and(|t| t.1))).collect();
    let mut live = vec![true; quads.quads.len()];
    let mut dropped = vec![false; n];
    let mut restored = 0;
    let mut isolated = 0;
    loop {
        let mut progress = false;
        // one drop at a time, grazing vertices first, then the one closing the most
        loop {
            let mut best: Option<((bool, i64, i64), u32, Vec<usize>, BTreeMap<(u32, u32), i64>)> = None;
            for v in open_ends(&degree) {
                if dropped[v as usize] {
                    continue;
                }
                let doomed: Vec<usize> = quads_of[v as usize].iter().copied().filter(|&q| live[q]).collect();
                let mut delta: BTreeMap<(u32, u32), i64> = BTreeMap::new();
                for &q in &doomed {
                    for (slot, t) in tris[q].iter().enumerate() {
                        if let (true, Some((t, _))) = (present[q][slot], t) {
                            for e in edges(t) {
                                *delta.entry(e).or_default() -= 1;
                            }
                        }
                    }
                }
                let (made, gone) = effect(&degree, &delta);
                let grazing = quads.vertices[v as usize].placement == Placement::Projected;
                let score = (!grazing, made - gone, made);
                if made < gone && (grazing || made == 0) && best.as_ref().is_none_or(|b| score < b.0) {
                    best = Some((score, v, doomed, delta));
                }
            }
            let Some((_, v, doomed, delta)) = best else { break };
            apply(&mut degree, &delta);
            for q in doomed {
                live[q] = false;
                present[q] = [false; 2];
            }
            dropped[v as usize] = true;
            progress = true;
        }
        for v in open_ends(&degree) {
            for &q in &quads_of[v as usize] {
                if !live[q] {
                    continue;
                }
                // either missing triangle alone, then both
                for slots in [&[0usize][..], &[1], &[0, 1]] {
                    if slots.iter().any(|&k| present[q][k] || tris[q][k].is_none()) {
                        continue;
                    }
                    let mut delta: BTreeMap<(u32, u32), i64> = BTreeMap::new();
                    for &k in slots {
                        for e in edges(&tris[q][k].unwrap().0) {
                            *delta.entry(e).or_default() += 1;
                        }
                    }
                    if change(&degree, &delta) < 0 {
                        apply(&mut degree, &delta);
                        for &k in slots {
                            present[q][k] = true;
                        }
                        restored += slots.len() as u64;
                        progress = true;
                        break;
                    }
                }
            }
        }
        for v in open_ends(&degree) {
            for &q in &quads_of[v as usize] {
                for slot in 0..2 {
                    let Some((t, _)) = tris[q][slot] else { continue };
                    if !present[q][slot] || !edges(&t).iter().all(|e| degree[e] == 1) {
                        continue;
                    }
                    let delta: BTreeMap<(u32, u32), i64> = edges(&t).into_iter().map(|e| (e, -1)).collect();
                    apply(&mut degree, &delta);
                    present[q][slot] = false;
                    isolated += 1;
                    progress = true;
                }
            }
        }
        if !progress {
            break;
        }
    }
    let triangles = tris
        .iter()
        .zip(&present)
        .flat_map(|(ts, p)| ts.iter().zip(p).filter(|(_, &p)| p).filter_map(|(t, _)| t.map(|t| t.0)))
        .collect();
    let mut mesh = IndexedMesh::new(quads.vertices.iter().map(|v| v.position).collect(), triangles);
    mesh.cells = quads.vertices.iter().map(|v| v.cell).collect();
    let closing = HoleClosing {
        dropped: (0..n).filter(|&v| dropped[v]).map(|v| quads.vertices[v].cell_key).collect(),
        restored,
        isolated,
    };
    (mesh, tally(&tris), closing)
}

fn edges(t: &[u32; 3]) -> [(u32, u32); 3] {
    [edge_key(t[0], t[1]), edge_key(t[1], t[2]), edge_key(t[2], t[0])]
}

/// Writes OBJ or binary PLY by extension.
pub fn emit(mesh: &IndexedMesh, path: impl AsRef<Path>) -> Result<(), MeshIoError> {
    write_mesh(mesh, path)
}
