//! One surface point per candidate leaf.
//!
//! Each leaf is sampled on a regular sub-lattice (27 points by default).
//! Samples close to the surface, or whose projection `q = p − F(p)·n` lands
//! where the field is still large, are discarded; the rest contribute the
//! tangent plane `n · x = n · q` to a per-cell least-squares system.

pub mod qef;
mod sampling;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::field::{eval_parallel, FieldError, ScalarField, MIN_GRADIENT_NORM};
use crate::grid::{CellIndex, Domain};
use crate::octree::OctreeCell;
use crate::Point3;

pub use qef::{place_in, solve_qef, solve_qef_accepting, CellBox, Classification, Placement, QefSolution, QefSystem, DEFAULT_SIGMA_RATIO};
pub use sampling::{filter_sample, lattice_index, local_offsets, passes_filter, sample_cell, SamplePoint};

use sampling::{needs_projection, LatticeCache};

pub const DEFAULT_DELTA1: f64 = 2e-3;
pub const DEFAULT_DELTA2: f64 = 2e-3;
pub const DEFAULT_FALLBACK_DELTA1: f64 = 1e-3;

/// A neighbor's corner or edge replaces a cell's vertex only within this
/// many cell sizes of the surface.
pub const DONATION_TOLERANCE: f64 = 0.1;

/// Only clear features are handed over: the weakest singular value kept must
/// reach this fraction of the largest. Curvature alone stays below it at the
/// resolutions the extractor targets.
pub const DONATION_SIGMA_RATIO: f64 = 0.3;

/// Filtering thresholds: `delta1` on `F(p)`, `delta2` on `F(q)`, and the
/// lowered `delta1` retried when a cell keeps fewer than three samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FilterParams {
    pub delta1: f64,
    pub delta2: f64,
    pub fallback_delta1: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            delta1: DEFAULT_DELTA1,
            delta2: DEFAULT_DELTA2,
            fallback_delta1: DEFAULT_FALLBACK_DELTA1,
        }
    }
}

impl FilterParams {
    /// Keeps every sample with a usable gradient.
    pub fn disabled() -> Self {
        Self {
            delta1: 0.0,
            delta2: f64::INFINITY,
            fallback_delta1: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta1 >= 0.0 && self.delta1.is_finite()) {
            return Err(format!("delta1 {} must be finite and >= 0", self.delta1));
        }
        if !(self.delta2 > 0.0) {
            return Err(format!("delta2 {} must be > 0", self.delta2));
        }
        if !(self.fallback_delta1 >= 0.0 && self.fallback_delta1 <= self.delta1) {
            return Err(format!(
                "fallback_delta1 {} must lie in [0, delta1]",
                self.fallback_delta1
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexerConfig {
    pub filter: FilterParams,
    pub sigma_ratio: f64,
    /// 3 for the 27-point pattern, 5 for 125.
    pub samples_per_axis: u32,
    /// Drop cells whose unclamped solution lies outside the half-open cell.
    pub demote_outside: bool,
}

impl Default for VertexerConfig {
    fn default() -> Self {
        Self {
            filter: FilterParams::default(),
            sigma_ratio: DEFAULT_SIGMA_RATIO,
            samples_per_axis: 3,
            demote_outside: true,
        }
    }
}

impl VertexerConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.filter.validate()?;
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio < 1.0) {
            return Err(format!("sigma_ratio {} outside (0, 1)", self.sigma_ratio));
        }
        if !(2..=9).contains(&self.samples_per_axis) {
            return Err(format!("samples_per_axis {} outside 2..=9", self.samples_per_axis));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualVertex {
    pub position: Point3,
    pub classification: Classification,
    /// Morton key of the owning cell.
    pub cell_key: u64,
    pub cell: CellIndex,
    pub singular_values: [f64; 3],
    pub placement: Placement,
    pub n_valid_samples: usize,
    /// Solved with the lowered `delta1`.
    pub used_fallback: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct VertexerStats {
    pub leaves: u64,
    pub vertices: u64,
    pub fallback_cells: u64,
    pub demoted_few_samples: u64,
    pub demoted_outside: u64,
    pub clamped: u64,
    pub placement_fallbacks: u64,
    pub projected: u64,
    pub lattice_queries: u64,
    pub projection_queries: u64,
}

impl VertexerStats {
    pub fn field_queries(&self) -> u64 {
        self.lattice_queries + self.projection_queries
    }
}

#[derive(Clone, Debug, Default)]
pub struct VertexSet {
    pub vertices: BTreeMap<u64, DualVertex>,
    pub stats: VertexerStats,
}

/// Whether `raw` lies in the half-open cell `[min, min + size)`. Coordinates
/// within a relative `1e-9` of a cell plane are snapped onto it first.
pub fn owns_position(cell: &OctreeCell, raw: &Point3) -> bool {
    (0..3).all(|a| {
        let mut u = (raw[a] - cell.min_corner[a]) / cell.size;
        if (u - u.round()).abs() < 1e-9 {
            u = u.round();
        }
        (0.0..1.0).contains(&u)
    })
}

fn cell_box(cell: &OctreeCell) -> CellBox {
    CellBox {
        min: cell.min_corner,
        size: cell.size,
    }
}

fn system_from_slots(cache: &LatticeCache, slots: &[usize], delta1: f64, delta2: f64) -> QefSystem {
    let mut sys = QefSystem::new();
    for &i in slots {
        if cache.is_valid(i, delta1, delta2) {
            let s = cache.sample(i);
            sys.push_plane(s.normal, s.projection);
        }
    }
    sys
}

/// Places one vertex in every leaf that keeps at least three samples and
/// whose solution it owns. All leaves must share one depth.
pub fn solve_all<F: ScalarField + ?Sized>(
    leaves: &[OctreeCell],
    field: &F,
    domain: &Domain,
    config: &VertexerConfig,
) -> Result<VertexSet, FieldError> {
    let mut out = VertexSet::default();
    if leaves.is_empty() {
        return Ok(out);
    }
    debug_assert!(leaves.iter().all(|c| c.depth == leaves[0].depth));
    let FilterParams {
        delta1,
        delta2,
        fallback_delta1,
    } = config.filter;
    let mut cache = LatticeCache::build(leaves, field, domain, config.samples_per_axis)?;
    let slots: Vec<Vec<usize>> = leaves.par_iter().map(|c| cache.slots(c)).collect();
    let project = needs_projection(&config.filter);

    if project {
        let wanted: Vec<usize> = (0..cache.len()).filter(|&i| cache.is_candidate(i, delta1)).collect();
        cache.project(&wanted, field)?;
    }
    let count = |cache: &LatticeCache, cell: &[usize], d1: f64| cell.iter().filter(|&&i| cache.is_valid(i, d1, delta2)).count();
    let retry: Vec<bool> = slots
        .iter()
        .map(|s| fallback_delta1 < delta1 && count(&cache, s, delta1) < 3)
        .collect();
    if project {
        let wanted: Vec<usize> = slots
            .iter()
            .zip(&retry)
            .filter(|(_, &r)| r)
            .flat_map(|(s, _)| s.iter().copied())
            .filter(|&i| cache.is_candidate(i, fallback_delta1))
            .collect();
        cache.project(&wanted, field)?;
    }

    let cache = &cache;
    let solved: Vec<Option<(DualVertex, Point3, Option<(Classification, Point3)>)>> = leaves
        .par_iter()
        .zip(slots.par_iter())
        .zip(retry.par_iter())
        .map(|((leaf, cell_slots), &retry)| {
            let d1 = if retry { fallback_delta1 } else { delta1 };
            let sys = system_from_slots(cache, cell_slots, d1, delta2);
            let bx = cell_box(leaf);
            let mut sol = if config.demote_outside {
                solve_qef_accepting(&sys, &bx, config.sigma_ratio, |p| owns_position(leaf, p))?
            } else {
                solve_qef(&sys, &bx, config.sigma_ratio)?
            };
            if config.demote_outside && sol.placement == Placement::Fallback {
                rescue(&mut sol, cache, cell_slots, leaf);
            }
            Some((
                DualVertex {
                    position: sol.position,
                    classification: sol.classification,
                    cell_key: leaf.morton_key,
                    cell: leaf.index,
                    singular_values: sol.singular_values,
                    placement: sol.placement,
                    n_valid_samples: sys.len(),
                    used_fallback: retry,
                },
                sol.raw_position,
                sol.unaccepted,
            ))
        })
        .collect();
    let offered = if config.demote_outside { offers(leaves, &solved) } else { BTreeMap::new() };
    let mut solved: Vec<Option<(DualVertex, Point3)>> = solved.into_iter().map(|s| s.map(|(v, raw, _)| (v, raw))).collect();
    // an offered feature must lie on the surface, not just near the cell
    let mut donation_queries = 0;
    if !offered.is_empty() {
        let points: Vec<Point3> = offered.values().map(|(_, p)| *p).collect();
        let response = eval_parallel(field, &points)?;
        donation_queries = points.len() as u64;
        for ((&j, (class, p)), d) in offered.iter().zip(response.distances) {
            if d <= DONATION_TOLERANCE * leaves[j].size {
                let (v, raw) = solved[j].as_mut().unwrap();
                v.position = *p;
                v.classification = *class;
                v.placement = Placement::Solved;
                *raw = *p;
            }
        }
    }

    // the surface must cross the cell, not merely the fitted feature
    let mut check_queries = 0;
    if config.demote_outside {
        let todo: Vec<usize> = (0..solved.len())
            .filter(|&i| matches!(&solved[i], Some((v, _)) if v.placement != Placement::Fallback))
            .collect();
        if !todo.is_empty() {
            let points: Vec<Point3> = todo.iter().map(|&i| solved[i].as_ref().unwrap().0.position).collect();
            let response = eval_parallel(field, &points)?;
            check_queries = points.len() as u64;
            for (k, &i) in todo.iter().enumerate() {
                let leaf = &leaves[i];
                let g = response.gradients[k];
                let norm = g.norm();
                let q = if norm >= MIN_GRADIENT_NORM {
                    points[k] - g * (response.distances[k] / norm)
                } else {
                    points[k]
                };
                if owns_position(leaf, &q) {
                    continue;
                }
                let (v, raw) = solved[i].as_mut().unwrap();
                let mut sol = QefSolution {
                    position: v.position,
                    raw_position: *raw,
                    classification: v.classification,
                    singular_values: v.singular_values,
                    placement: Placement::Fallback,
                    unaccepted: None,
                };
                rescue(&mut sol, cache, &slots[i], leaf);
                v.position = sol.position;
                v.placement = sol.placement;
                *raw = sol.raw_position;
            }
        }
    }

    let stats = &mut out.stats;
    stats.leaves = leaves.len() as u64;
    stats.fallback_cells = retry.iter().filter(|&&r| r).count() as u64;
    for (leaf, s) in leaves.iter().zip(solved) {
        let Some((v, raw)) = s else {
            stats.demoted_few_samples += 1;
            continue;
        };
        if config.demote_outside && (v.placement == Placement::Fallback || !owns_position(leaf, &raw)) {
            stats.demoted_outside += 1;
            continue;
        }
        match v.placement {
            Placement::Clamped => stats.clamped += 1,
            Placement::Fallback => stats.placement_fallbacks += 1,
            Placement::Projected => stats.projected += 1,
            Placement::Solved => {}
        }
        out.vertices.insert(v.cell_key, v);
    }
    stats.vertices = out.vertices.len() as u64;
    stats.lattice_queries = cache.lattice_queries;
    stats.projection_queries = cache.projection_queries + check_queries + donation_queries;
    Ok(out)
}

#[derive(Serialize)]
struct VertexRecord {
    cell_key: u64,
    position: [f64; 3],
    class: &'static str,
    sigmas: [f64; 3],
    n_valid_samples: usize,
}

/// One JSON object per line: `{cell_key, position, class, sigmas, n_valid_samples}`.
pub fn write_vertices_jsonl<'a, W: Write>(
    vertices: impl IntoIterator<Item = &'a DualVertex>,
    mut out: W,
) -> std::io::Result<()> {
    for v in vertices {
        let record = VertexRecord {
            cell_key: v.cell_key,
            position: [v.position.x, v.position.y, v.position.z],
            class: v.classification.name(),
            sigmas: v.singular_values,
            n_valid_samples: v.n_valid_samples,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// A corner or edge a cell could not keep is offered to every neighbor that
/// owns a point of it, provided the neighbor settled for a feature of lower
/// rank. The best offer wins: highest rank, then the smallest donor key.
///
/// A crease can sit on, or just beside, the face between two cells. The owner
/// may then see only one of the two surfaces through its samples while the
/// neighbor sees both; without the hand-over the crease has no vertex and the
/// surface opens along it.
fn offers(
    leaves: &[OctreeCell],
    solved: &[Option<(DualVertex, Point3, Option<(Classification, Point3)>)>],
) -> BTreeMap<usize, (Classification, Point3)> {
    let resolution = 1u32 << leaves[0].depth;
    let by_index: HashMap<CellIndex, usize> = leaves.iter().enumerate().map(|(i, c)| (c.index, i)).collect();
    let mut best: BTreeMap<usize, (u8, u64, Classification, Point3)> = BTreeMap::new();
    for (i, s) in solved.iter().enumerate() {
        let Some((v, _, Some((class, anchor)))) = s else { continue };
        let sigma = v.singular_values;
        if v.placement == Placement::Fallback || sigma[class.rank() as usize - 1] < DONATION_SIGMA_RATIO * sigma[0] {
            continue;
        }
        for offset in NEIGHBORS {
            let Some(&j) = leaves[i].index.offset(offset, resolution).and_then(|n| by_index.get(&n)) else {
                continue;
            };
            let Some((target, _, _)) = &solved[j] else { continue };
            if target.placement == Placement::Fallback || target.classification.rank() >= class.rank() {
                continue;
            }
            let Some(p) = place_in(class, anchor, &cell_box(&leaves[j])).filter(|p| owns_position(&leaves[j], p)) else {
                continue;
            };
            let key = (class.rank(), std::cmp::Reverse(v.cell_key));
            if best.get(&j).is_none_or(|o| key > (o.0, std::cmp::Reverse(o.1))) {
                best.insert(j, (class.rank(), v.cell_key, *class, p));
            }
        }
    }
    best.into_iter().map(|(j, (_, _, c, p))| (j, (c, p))).collect()
}

const NEIGHBORS: [[i32; 3]; 26] = {
    let mut out = [[0; 3]; 26];
    let mut n = 0;
    let mut k = 0;
    while k < 27 {
        let o = [k as i32 % 3 - 1, k as i32 / 3 % 3 - 1, k as i32 / 9 - 1];
        if k != 13 {
            out[n] = o;
            n += 1;
        }
        k += 1;
    }
    out
};

/// A cell whose feature misses it keeps the projection of its closest
/// sample, provided that projection lands back in the cell: the surface does
/// cross the cell, the fitted feature just passes beside it.
fn rescue(sol: &mut QefSolution, cache: &LatticeCache, slots: &[usize], leaf: &OctreeCell) {
    let best = slots
        .iter()
        .map(|&i| cache.sample(i))
        .filter(|s| s.has_normal() && owns_position(leaf, &s.projection))
        .min_by(|a, b| a.distance.total_cmp(&b.distance));
    if let Some(s) = best {
        sol.position = s.projection;
        sol.raw_position = s.projection;
        sol.placement = Placement::Projected;
    }
}
