//! Per-cell sample lattices and the shared evaluation cache behind them.

use crate::field::{eval_parallel, FieldError, ScalarField, MIN_GRADIENT_NORM};
use crate::grid::{pack_lattice, Domain};
use crate::octree::OctreeCell;
use crate::{Point3, Vector3};

use super::FilterParams;

/// A field sample `p` with its distance `d`, unit normal `n` and projection
/// `q = p − d·n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePoint {
    pub position: Point3,
    pub distance: f64,
    /// Zero when the gradient was too short to normalize.
    pub normal: Vector3,
    pub projection: Point3,
    pub valid: bool,
}

impl SamplePoint {
    pub fn new(position: Point3, distance: f64, gradient: Vector3) -> Self {
        let norm = gradient.norm();
        let normal = if norm >= MIN_GRADIENT_NORM {
            gradient / norm
        } else {
            Vector3::zeros()
        };
        Self {
            position,
            distance,
            normal,
            projection: position - normal * distance,
            valid: false,
        }
    }

    pub fn has_normal(&self) -> bool {
        self.normal != Vector3::zeros()
    }
}

/// The two filtering criteria plus the gradient guard, given `F(q)`.
pub fn passes_filter(sample: &SamplePoint, projected_distance: f64, delta1: f64, delta2: f64) -> bool {
    sample.has_normal() && sample.distance >= delta1 && projected_distance <= delta2
}

/// Evaluates `F(q)` for `sample` and applies [`passes_filter`].
pub fn filter_sample<F: ScalarField + ?Sized>(
    sample: &SamplePoint,
    field: &F,
    delta1: f64,
    delta2: f64,
) -> Result<bool, FieldError> {
    if !sample.has_normal() || sample.distance < delta1 {
        return Ok(false);
    }
    let (dq, _) = field.eval_point(sample.projection)?;
    Ok(passes_filter(sample, dq, delta1, delta2))
}

/// Local offsets of an `n × n × n` pattern, x fastest.
pub fn local_offsets(samples_per_axis: u32) -> impl Iterator<Item = [u32; 3]> {
    let n = samples_per_axis;
    (0..n * n * n).map(move |k| [k % n, (k / n) % n, k / (n * n)])
}

/// Global lattice coordinate of local sample `local` in `cell`.
pub fn lattice_index(cell: &OctreeCell, local: [u32; 3], samples_per_axis: u32) -> [u32; 3] {
    let s = samples_per_axis - 1;
    std::array::from_fn(|a| cell.index.0[a] * s + local[a])
}

/// Samples one cell on its own, without sharing. Each sample's `valid` flag
/// reflects `delta1` and `delta2`.
pub fn sample_cell<F: ScalarField + ?Sized>(
    cell: &OctreeCell,
    field: &F,
    domain: &Domain,
    samples_per_axis: u32,
    delta1: f64,
    delta2: f64,
) -> Result<Vec<SamplePoint>, FieldError> {
    let resolution = (1u32 << cell.depth) * (samples_per_axis - 1);
    let positions: Vec<Point3> = local_offsets(samples_per_axis)
        .map(|l| domain.lattice_point(lattice_index(cell, l, samples_per_axis), resolution))
        .collect();
    let response = field.eval_batch(&positions)?;
    let mut samples: Vec<SamplePoint> = positions
        .iter()
        .zip(response.distances.iter().zip(&response.gradients))
        .map(|(p, (d, g))| SamplePoint::new(*p, *d, *g))
        .collect();
    for s in samples.iter_mut() {
        s.valid = filter_sample(s, field, delta1, delta2)?;
    }
    Ok(samples)
}

/// Every lattice point touched by a set of same-depth leaves, evaluated once.
///
/// Keys are sorted, so lookups are binary searches and the evaluation order
/// never depends on scheduling.
pub(crate) struct LatticeCache {
    keys: Vec<u64>,
    samples: Vec<SamplePoint>,
    /// `F(q)`; NaN until evaluated.
    projected: Vec<f64>,
    pub(crate) samples_per_axis: u32,
    pub(crate) lattice_queries: u64,
    pub(crate) projection_queries: u64,
}

impl LatticeCache {
    pub(crate) fn build<F: ScalarField + ?Sized>(
        leaves: &[OctreeCell],
        field: &F,
        domain: &Domain,
        samples_per_axis: u32,
    ) -> Result<Self, FieldError> {
        let mut keys: Vec<u64> = Vec::new();
        let mut coords: Vec<[u32; 3]> = Vec::new();
        for leaf in leaves {
            for l in local_offsets(samples_per_axis) {
                let c = lattice_index(leaf, l, samples_per_axis);
                keys.push(pack_lattice(c));
                coords.push(c);
            }
        }
        let mut order: Vec<usize> = (0..keys.len()).collect();
        order.sort_unstable_by_key(|&i| keys[i]);
        order.dedup_by_key(|i| keys[*i]);
        let resolution = leaves
            .first()
            .map(|c| (1u32 << c.depth) * (samples_per_axis - 1))
            .unwrap_or(1);
        let positions: Vec<Point3> = order
            .iter()
            .map(|&i| domain.lattice_point(coords[i], resolution))
            .collect();
        let keys: Vec<u64> = order.iter().map(|&i| keys[i]).collect();
        let samples = if positions.is_empty() {
            Vec::new()
        } else {
            let r = eval_parallel(field, &positions)?;
            positions
                .iter()
                .zip(r.distances.iter().zip(&r.gradients))
                .map(|(p, (d, g))| SamplePoint::new(*p, *d, *g))
                .collect()
        };
        Ok(Self {
            projected: vec![f64::NAN; keys.len()],
            lattice_queries: keys.len() as u64,
            keys,
            samples,
            samples_per_axis,
            projection_queries: 0,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.keys.len()
    }

    /// Cache slots of a leaf's samples, in local pattern order.
    pub(crate) fn slots(&self, leaf: &OctreeCell) -> Vec<usize> {
        local_offsets(self.samples_per_axis)
            .map(|l| {
                let key = pack_lattice(lattice_index(leaf, l, self.samples_per_axis));
                self.keys.binary_search(&key).expect("leaf lattice point was cached")
            })
            .collect()
    }

    pub(crate) fn sample(&self, slot: usize) -> &SamplePoint {
        &self.samples[slot]
    }

    /// Whether `slot` could pass with this `delta1`, before projecting.
    pub(crate) fn is_candidate(&self, slot: usize, delta1: f64) -> bool {
        let s = &self.samples[slot];
        s.has_normal() && s.distance >= delta1
    }

    /// Evaluates `F(q)` at the given slots that have not been projected yet.
    pub(crate) fn project<F: ScalarField + ?Sized>(&mut self, slots: &[usize], field: &F) -> Result<(), FieldError> {
        let mut pending: Vec<usize> = slots.iter().copied().filter(|&i| self.projected[i].is_nan()).collect();
        pending.sort_unstable();
        pending.dedup();
        if pending.is_empty() {
            return Ok(());
        }
        let points: Vec<Point3> = pending.iter().map(|&i| self.samples[i].projection).collect();
        let r = eval_parallel(field, &points)?;
        for (&i, d) in pending.iter().zip(r.distances) {
            self.projected[i] = d;
        }
        self.projection_queries += pending.len() as u64;
        Ok(())
    }

    /// Applies the filter; projections must already be evaluated unless
    /// `delta2` is infinite.
    pub(crate) fn is_valid(&self, slot: usize, delta1: f64, delta2: f64) -> bool {
        if !self.is_candidate(slot, delta1) {
            return false;
        }
        if delta2 == f64::INFINITY {
            return true;
        }
        let dq = self.projected[slot];
        debug_assert!(!dq.is_nan(), "projection not evaluated");
        passes_filter(&self.samples[slot], dq, delta1, delta2)
    }
}

/// Whether a projection query is needed to decide validity.
pub(crate) fn needs_projection(params: &FilterParams) -> bool {
    params.delta2 != f64::INFINITY
}
