use super::{FieldResponse, ScalarField};
use crate::{Point3, Vector3};

/// Perturbs an exact field to mimic the error profile of a learned one:
/// values are smoothed and floored near the zero-level set, and a seeded,
/// position-hashed error that decays with distance is added to both the
/// value and the gradient.
///
/// With `s` the base averaged over six axis offsets of radius `r`,
/// `w = exp(-s / b)` and `u, ξ` hashed from the position and seed:
///
/// ```text
/// F(x)  = max(s, b) + b·w·(1 + u)/2
/// ∇F(x) = ∇s + w·ξ
/// ```
///
/// The hashed error fades within a few multiples of `b`, so it stays inside
/// the band a filter threshold of `2b` is meant to exclude.
pub struct NoisyField<F> {
    base: F,
    near_surface_bias: f64,
    smoothing_radius: f64,
    seed: u64,
}

pub const DEFAULT_SMOOTHING_RADIUS: f64 = 0.004;
pub const DEFAULT_NEAR_SURFACE_BIAS: f64 = 0.001;

const OFFSETS: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
];

impl<F: ScalarField> NoisyField<F> {
    pub fn new(base: F, seed: u64) -> Self {
        Self::with_params(base, DEFAULT_NEAR_SURFACE_BIAS, DEFAULT_SMOOTHING_RADIUS, seed)
    }

    pub fn with_params(base: F, near_surface_bias: f64, smoothing_radius: f64, seed: u64) -> Self {
        assert!(near_surface_bias >= 0.0 && smoothing_radius > 0.0);
        Self {
            base,
            near_surface_bias,
            smoothing_radius,
            seed,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Four values in [-1, 1] determined by the exact bits of `p` and `seed`.
fn hashed_noise(p: &Point3, seed: u64) -> [f64; 4] {
    let mut h = splitmix64(seed);
    for c in p.iter() {
        h = splitmix64(h ^ c.to_bits());
    }
    let mut out = [0.0; 4];
    for (k, slot) in out.iter_mut().enumerate() {
        let bits = splitmix64(h.wrapping_add(k as u64));
        *slot = (bits >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
    }
    out
}

impl<F: ScalarField> ScalarField for NoisyField<F> {
    fn eval_unchecked(&self, points: &[Point3]) -> FieldResponse {
        let r = self.smoothing_radius;
        let b = self.near_surface_bias;
        let probes: Vec<Point3> = points
            .iter()
            .flat_map(|p| OFFSETS.iter().map(move |o| p + Vector3::from(*o) * r))
            .collect();
        let base = self.base.eval_unchecked(&probes);
        let mut out = FieldResponse::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let range = 6 * i..6 * i + 6;
            let s = base.distances[range.clone()].iter().sum::<f64>() / 6.0;
            let grad_s = base.gradients[range].iter().sum::<Vector3>() / 6.0;
            let w = if b > 0.0 { (-s / b).exp() } else { 0.0 };
            let [u, x, y, z] = hashed_noise(p, self.seed);
            let d = s.max(b) + 0.5 * b * w * (1.0 + u);
            let g = if s >= b { grad_s } else { Vector3::zeros() } + Vector3::new(x, y, z) * w;
            out.push(d, g);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Analytic, Shape};

    fn plane() -> Analytic {
        Analytic::new(Shape::Plane {
            normal: Vector3::z(),
            offset: 0.0,
        })
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let pts: Vec<Point3> = (0..200).map(|i| Point3::new(0.01 * i as f64, 0.3, 0.001 * i as f64 - 0.1)).collect();
        let a = NoisyField::new(plane(), 3).eval_batch(&pts).unwrap();
        let b = NoisyField::new(plane(), 3).eval_batch(&pts).unwrap();
        let c = NoisyField::new(plane(), 4).eval_batch(&pts).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn never_drops_below_the_floor() {
        let f = NoisyField::new(plane(), 1);
        for i in -200..=200 {
            let p = Point3::new(0.1, -0.2, i as f64 * 1e-4);
            let (d, _) = f.eval_point(p).unwrap();
            assert!(d >= DEFAULT_NEAR_SURFACE_BIAS);
        }
    }

    #[test]
    fn error_decays_away_from_the_surface() {
        let f = NoisyField::new(plane(), 5);
        let (d, g) = f.eval_point(Point3::new(0.2, 0.1, 0.1)).unwrap();
        assert!((d - 0.1).abs() < 1e-9);
        assert!((g - Vector3::z()).norm() < 1e-9);
        let (d0, _) = f.eval_point(Point3::new(0.2, 0.1, 0.0)).unwrap();
        assert!(d0 > 0.001 && d0 < 0.003);
    }
}
