//! Unsigned distance sources behind one batched evaluation interface.

mod analytic;
mod bvh;
mod mesh_field;
mod mlp;
mod noisy;
pub mod weights;

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::{Point3, Vector3};

pub use analytic::{Analytic, Shape};
pub use bvh::Bvh;
pub use mesh_field::{closest_point_on_triangle, ClosestPoint, MeshField};
pub use mlp::{Activation, Encoding, Layer, MlpField};
pub use noisy::NoisyField;

/// Gradients shorter than this cannot be normalized and mark a sample invalid.
pub const MIN_GRADIENT_NORM: f64 = 1e-8;

/// Batches larger than this are split across worker threads.
pub const PARALLEL_CHUNK: usize = 4096;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("empty query batch")]
    EmptyBatch,
    #[error("non-finite query point {0:?}")]
    NonFiniteQuery([f64; 3]),
    #[error("field returned a non-finite value at point {0:?}")]
    NonFiniteOutput([f64; 3]),
    #[error("mesh has no usable triangles")]
    EmptyMesh,
    #[error(transparent)]
    Weights(#[from] weights::WeightsError),
}

/// Distances and unnormalized gradients for a batch of query points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldResponse {
    pub distances: Vec<f64>,
    pub gradients: Vec<Vector3>,
}

impl FieldResponse {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            distances: Vec::with_capacity(n),
            gradients: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn push(&mut self, distance: f64, gradient: Vector3) {
        self.distances.push(distance);
        self.gradients.push(gradient);
    }

    fn extend(&mut self, other: FieldResponse) {
        self.distances.extend(other.distances);
        self.gradients.extend(other.gradients);
    }
}

/// An unsigned distance field `F(x) >= 0` with gradient.
///
/// Implementations are immutable after construction and may be shared across
/// threads. Only batched evaluation is exposed; single points go through a
/// batch of one.
pub trait ScalarField: Send + Sync {
    /// Evaluates every point, without validation.
    fn eval_unchecked(&self, points: &[Point3]) -> FieldResponse;

    /// Evaluates a non-empty batch of finite points and checks the output.
    fn eval_batch(&self, points: &[Point3]) -> Result<FieldResponse, FieldError> {
        if points.is_empty() {
            return Err(FieldError::EmptyBatch);
        }
        if let Some(p) = points.iter().find(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(FieldError::NonFiniteQuery([p.x, p.y, p.z]));
        }
        let response = self.eval_unchecked(points);
        debug_assert_eq!(response.len(), points.len());
        for (i, p) in points.iter().enumerate() {
            let d = response.distances[i];
            let g = &response.gradients[i];
            if !d.is_finite() || !g.iter().all(|c| c.is_finite()) {
                return Err(FieldError::NonFiniteOutput([p.x, p.y, p.z]));
            }
        }
        Ok(response)
    }

    fn eval_point(&self, point: Point3) -> Result<(f64, Vector3), FieldError> {
        let r = self.eval_batch(std::slice::from_ref(&point))?;
        Ok((r.distances[0], r.gradients[0]))
    }
}

impl<F: ScalarField + ?Sized> ScalarField for Box<F> {
    fn eval_unchecked(&self, points: &[Point3]) -> FieldResponse {
        (**self).eval_unchecked(points)
    }
}

impl<F: ScalarField + ?Sized> ScalarField for std::sync::Arc<F> {
    fn eval_unchecked(&self, points: &[Point3]) -> FieldResponse {
        (**self).eval_unchecked(points)
    }
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn eval_unchecked(&self, points: &[Point3]) -> FieldResponse {
        (**self).eval_unchecked(points)
    }
}

/// Evaluates a large batch in fixed-size chunks on the rayon pool.
///
/// Chunk boundaries do not depend on the thread count, so the result is the
/// same for every pool size.
pub fn eval_parallel<F: ScalarField + ?Sized>(
    field: &F,
    points: &[Point3],
) -> Result<FieldResponse, FieldError> {
    if points.len() <= PARALLEL_CHUNK {
        return field.eval_batch(points);
    }
    let parts: Vec<FieldResponse> = points
        .par_chunks(PARALLEL_CHUNK)
        .map(|chunk| field.eval_batch(chunk))
        .collect::<Result<_, _>>()?;
    let mut out = FieldResponse::with_capacity(points.len());
    for part in parts {
        out.extend(part);
    }
    Ok(out)
}

/// Wraps a field and counts how many points were evaluated.
pub struct CountingField<F> {
    inner: F,
    count: AtomicU64,
}

impl<F> CountingField<F> {
    pub fn new(inner: F) -> Self {
        Self {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn into_inner(self) -> F {
        self.inner
    }
}

impl<F: ScalarField> ScalarField for CountingField<F> {
    fn eval_unchecked(&self, points: &[Point3]) -> FieldResponse {
        self.count.fetch_add(points.len() as u64, Ordering::Relaxed);
        self.inner.eval_unchecked(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Nan;
    impl ScalarField for Nan {
        fn eval_unchecked(&self, points: &[Point3]) -> FieldResponse {
            let mut r = FieldResponse::with_capacity(points.len());
            for p in points {
                r.push(if p.x > 0.0 { f64::NAN } else { 1.0 }, Vector3::zeros());
            }
            r
        }
    }

    #[test]
    fn non_finite_output_names_the_point() {
        let pts = [Point3::new(-0.5, 0.0, 0.0), Point3::new(0.25, 0.5, 0.75)];
        let err = Nan.eval_batch(&pts).unwrap_err();
        assert!(matches!(err, FieldError::NonFiniteOutput([x, y, z]) if x == 0.25 && y == 0.5 && z == 0.75));
        assert!(err.to_string().contains("0.25"));
    }

    #[test]
    fn empty_batch_is_rejected() {
        assert!(matches!(Nan.eval_batch(&[]), Err(FieldError::EmptyBatch)));
    }

    #[test]
    fn parallel_evaluation_matches_serial() {
        let field = Analytic::new(Shape::Sphere {
            center: Point3::origin(),
            radius: 0.5,
        });
        let pts: Vec<Point3> = (0..10_000)
            .map(|i| {
                let t = i as f64 * 1e-4;
                Point3::new(t.sin(), (3.0 * t).cos(), t - 0.5)
            })
            .collect();
        let a = field.eval_batch(&pts).unwrap();
        let b = eval_parallel(&field, &pts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn counting_field_counts_points() {
        let field = CountingField::new(Analytic::new(Shape::Constant(1.0)));
        field.eval_batch(&[Point3::origin(); 5]).unwrap();
        field.eval_point(Point3::origin()).unwrap();
        assert_eq!(field.count(), 6);
    }
}
