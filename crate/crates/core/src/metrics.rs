//! Chamfer distance, F-score and Hausdorff distance between two meshes,
//! estimated from area-weighted surface samples and exact point-to-mesh
//! distances.
//!
//! Chamfer distance sums the mean squared distance in both directions.
//! F-score uses unsquared distances against the threshold and is reported as
//! a percentage.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::MeshField;
use crate::mesh::IndexedMesh;
use crate::Point3;

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_THRESHOLD: f64 = 0.001;
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{0} mesh has no triangles with positive area")]
    EmptyMesh(&'static str),
    #[error("sample count {0} is below the minimum of {MIN_SAMPLES}")]
    TooFewSamples(usize),
    #[error("threshold {0} must be positive")]
    BadThreshold(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub chamfer: f64,
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
    pub hausdorff: f64,
    pub sample_count: usize,
    pub threshold: f64,
    pub rng_seed: u64,
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("chamfer", format!("{:.6e}", self.chamfer)),
            ("f_score", format!("{:.4}", self.f_score)),
            ("precision", format!("{:.4}", self.precision)),
            ("recall", format!("{:.4}", self.recall)),
            ("hausdorff", format!("{:.6e}", self.hausdorff)),
            ("samples", self.sample_count.to_string()),
            ("threshold", format!("{}", self.threshold)),
            ("seed", self.rng_seed.to_string()),
        ];
        for (name, value) in rows {
            writeln!(f, "{name:<10} {value:>14}")?;
        }
        Ok(())
    }
}

/// `n` points distributed uniformly by area. The stream depends only on
/// `seed` and the mesh.
pub fn sample_surface(mesh: &IndexedMesh, n: usize, seed: u64) -> Vec<Point3> {
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += 0.5 * mesh.triangle_normal(t).norm();
        cdf.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let target = rng.random::<f64>() * total;
            let t = cdf.partition_point(|&c| c <= target).min(cdf.len() - 1);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            let [a, b, c] = mesh.triangle(t);
            Point3::from(a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2))
        })
        .collect()
}

/// Sum with a fixed binary split, independent of thread count.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 256;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let (l, r) = values.split_at(values.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

fn distances_to(field: &MeshField, points: &[Point3]) -> Vec<f64> {
    points.par_iter().map(|p| field.closest(p).distance).collect()
}

fn field_for(mesh: &IndexedMesh, role: &'static str) -> Result<MeshField, MetricsError> {
    MeshField::new(mesh).map_err(|_| MetricsError::EmptyMesh(role))
}

pub fn evaluate(
    candidate: &IndexedMesh,
    reference: &IndexedMesh,
    samples: usize,
    threshold: f64,
    seed: u64,
) -> Result<MetricReport, MetricsError> {
    if samples < MIN_SAMPLES {
        return Err(MetricsError::TooFewSamples(samples));
    }
    if !(threshold > 0.0) {
        return Err(MetricsError::BadThreshold(threshold));
    }
    let cand_field = field_for(candidate, "candidate")?;
    let ref_field = field_for(reference, "reference")?;
    let cand_pts = sample_surface(candidate, samples, seed);
    let ref_pts = sample_surface(reference, samples, seed);
    let to_ref = distances_to(&ref_field, &cand_pts);
    let to_cand = distances_to(&cand_field, &ref_pts);

    let mean_sq = |d: &[f64]| pairwise_sum(&d.iter().map(|x| x * x).collect::<Vec<_>>()) / d.len() as f64;
    let within = |d: &[f64]| d.iter().filter(|&&x| x <= threshold).count() as f64 / d.len() as f64;
    let max = |d: &[f64]| d.iter().copied().fold(0.0, f64::max);
    let precision = within(&to_ref);
    let recall = within(&to_cand);
    let f_score = if precision + recall > 0.0 {
        100.0 * 2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MetricReport {
        chamfer: mean_sq(&to_ref) + mean_sq(&to_cand),
        f_score,
        precision,
        recall,
        hausdorff: max(&to_ref).max(max(&to_cand)),
        sample_count: samples,
        threshold,
        rng_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use crate::Vector3;
    use nalgebra::{Rotation3, Translation3};

    fn transformed(mesh: &IndexedMesh, f: impl Fn(&Point3) -> Point3) -> IndexedMesh {
        IndexedMesh::new(mesh.vertices.iter().map(f).collect(), mesh.triangles.clone())
    }

    #[test]
    fn identical_meshes() {
        let m = shapes::icosphere(Point3::origin(), 0.5, 2);
        let r = evaluate(&m, &m, 5000, DEFAULT_THRESHOLD, 1).unwrap();
        assert!(r.chamfer < 1e-24);
        assert_eq!(r.f_score, 100.0);
        assert!(r.hausdorff < 1e-12);
    }

    #[test]
    fn offset_square() {
        let t = 0.01;
        let a = shapes::square(0.5, 0.0, 4);
        let b = shapes::square(0.5, t, 4);
        let r = evaluate(&a, &b, 20_000, DEFAULT_THRESHOLD, 7).unwrap();
        assert!((r.hausdorff - t).abs() < 1e-9);
        assert!((r.chamfer - 2.0 * t * t).abs() < 1e-9);
        assert_eq!(r.f_score, 0.0);
    }

    #[test]
    fn swapping_arguments_keeps_cd_and_hd() {
        let a = shapes::icosphere(Point3::origin(), 0.5, 2);
        let b = shapes::uv_sphere(Point3::new(0.02, 0.0, 0.0), 0.5, 16, 10);
        let ab = evaluate(&a, &b, 4000, 0.01, 3).unwrap();
        let ba = evaluate(&b, &a, 4000, 0.01, 3).unwrap();
        assert_eq!(ab.chamfer.to_bits(), ba.chamfer.to_bits());
        assert_eq!(ab.hausdorff.to_bits(), ba.hausdorff.to_bits());
        assert_eq!(ab.precision, ba.recall);
        assert_eq!(ab.f_score, ba.f_score);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = shapes::icosphere(Point3::origin(), 0.5, 1);
        let b = shapes::icosphere(Point3::origin(), 0.52, 2);
        let x = evaluate(&a, &b, 3000, 0.01, 11).unwrap();
        let y = evaluate(&a, &b, 3000, 0.01, 11).unwrap();
        assert_eq!(serde_json::to_string(&x).unwrap(), serde_json::to_string(&y).unwrap());
    }

    #[test]
    fn rigid_motion_invariance() {
        let a = shapes::icosphere(Point3::new(0.1, 0.0, 0.0), 0.5, 1);
        let b = shapes::cuboid(Point3::origin(), Vector3::new(0.4, 0.35, 0.45), 2);
        let rot = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let shift = Translation3::new(0.2, -0.1, 0.05);
        let motion = |p: &Point3| shift * (rot * p);
        let r0 = evaluate(&a, &b, 3000, 0.01, 5).unwrap();
        let r1 = evaluate(&transformed(&a, motion), &transformed(&b, motion), 3000, 0.01, 5).unwrap();
        assert!((r0.chamfer - r1.chamfer).abs() < 1e-9);
        assert!((r0.hausdorff - r1.hausdorff).abs() < 1e-9);
    }

    #[test]
    fn chamfer_converges_with_sample_count() {
        let a = shapes::uv_sphere(Point3::origin(), 0.5, 12, 8);
        let b = shapes::icosphere(Point3::origin(), 0.5, 3);
        let coarse = evaluate(&a, &b, 10_000, 0.01, 2).unwrap();
        let fine = evaluate(&a, &b, 100_000, 0.01, 9).unwrap();
        assert!((coarse.chamfer - fine.chamfer).abs() / fine.chamfer < 0.1);
    }

    #[test]
    fn samples_lie_on_the_surface() {
        let m = shapes::cuboid(Point3::origin(), Vector3::repeat(0.5), 2);
        let f = MeshField::new(&m).unwrap();
        for p in sample_surface(&m, 2000, 4) {
            assert!(f.closest(&p).distance < 1e-12);
        }
    }

    #[test]
    fn rejects_empty_meshes_and_tiny_budgets() {
        let m = shapes::icosphere(Point3::origin(), 0.5, 1);
        assert!(matches!(evaluate(&IndexedMesh::default(), &m, 5000, 0.001, 0), Err(MetricsError::EmptyMesh("candidate"))));
        assert!(matches!(evaluate(&m, &m, 10, 0.001, 0), Err(MetricsError::TooFewSamples(10))));
    }

    #[test]
    fn pairwise_sum_matches_exact_sum() {
        let v: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 49_995_000.0);
    }
}
