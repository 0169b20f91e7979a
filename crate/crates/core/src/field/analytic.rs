use serde::{Deserialize, Serialize};

use super::{FieldResponse, ScalarField};
use crate::{Point3, Vector3};

/// Closed-form surfaces with exact unsigned distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Sphere { center: Point3, radius: f64 },
    /// The plane `normal · x = offset`; `normal` is normalized on construction.
    Plane { normal: Vector3, offset: f64 },
    /// Surface of an axis-aligned box.
    Cuboid { center: Point3, half_extents: Vector3 },
    /// Open disk in the plane `z = center.z`.
    Disk { center: Point3, radius: f64 },
    /// Torus around the z axis through `center`.
    Torus { center: Point3, major: f64, minor: f64 },
    /// No surface; the field is the given constant everywhere.
    Constant(f64),
    /// Pointwise minimum of the parts.
    Union(Vec<Shape>),
}

impl Shape {
    /// Distance and gradient at `p`. The gradient is zero where the distance
    /// is not differentiable in a well-defined direction (on the surface or
    /// on a point-like cut locus).
    pub fn distance(&self, p: &Point3) -> (f64, Vector3) {
        match self {
            Shape::Sphere { center, radius } => {
                let v = p - center;
                let r = v.norm();
                let s = r - radius;
                if r == 0.0 || s == 0.0 {
                    (s.abs(), Vector3::zeros())
                } else {
                    (s.abs(), v * (s.signum() / r))
                }
            }
            Shape::Plane { normal, offset } => {
                let s = normal.dot(&p.coords) - offset;
                if s == 0.0 {
                    (0.0, Vector3::zeros())
                } else {
                    (s.abs(), normal * s.signum())
                }
            }
            Shape::Cuboid {
                center,
                half_extents,
            } => {
                let local = p - center;
                let outside = (0..3).any(|a| local[a].abs() > half_extents[a]);
                if outside {
                    let clamped = Vector3::from_fn(|a, _| local[a].clamp(-half_extents[a], half_extents[a]));
                    let v = local - clamped;
                    let d = v.norm();
                    (d, v / d)
                } else {
                    let mut axis = 0;
                    let mut best = f64::INFINITY;
                    for a in 0..3 {
                        let gap = half_extents[a] - local[a].abs();
                        if gap < best {
                            best = gap;
                            axis = a;
                        }
                    }
                    if best == 0.0 {
                        return (0.0, Vector3::zeros());
                    }
                    let mut g = Vector3::zeros();
                    g[axis] = if local[axis] >= 0.0 { -1.0 } else { 1.0 };
                    (best, g)
                }
            }
            Shape::Disk { center, radius } => {
                let v = p - center;
                let rho = (v.x * v.x + v.y * v.y).sqrt();
                if rho <= *radius {
                    if v.z == 0.0 {
                        (0.0, Vector3::zeros())
                    } else {
                        (v.z.abs(), Vector3::new(0.0, 0.0, v.z.signum()))
                    }
                } else {
                    let rim = Vector3::new(v.x * radius / rho, v.y * radius / rho, 0.0);
                    let w = v - rim;
                    let d = w.norm();
                    (d, w / d)
                }
            }
            Shape::Torus {
                center,
                major,
                minor,
            } => {
                let v = p - center;
                let rho = (v.x * v.x + v.y * v.y).sqrt();
                if rho == 0.0 {
                    let d = (major * major + v.z * v.z).sqrt() - minor;
                    return (d.abs(), Vector3::zeros());
                }
                let ring = Vector3::new(v.x * major / rho, v.y * major / rho, 0.0);
                let w = v - ring;
                let r = w.norm();
                let s = r - minor;
                if r == 0.0 || s == 0.0 {
                    (s.abs(), Vector3::zeros())
                } else {
                    (s.abs(), w * (s.signum() / r))
                }
            }
            Shape::Constant(c) => (*c, Vector3::zeros()),
            Shape::Union(parts) => {
                let mut best = (f64::INFINITY, Vector3::zeros());
                for part in parts {
                    let candidate = part.distance(p);
                    if candidate.0 < best.0 {
                        best = candidate;
                    }
                }
                best
            }
        }
    }
}

/// Analytic unsigned distance field.
#[derive(Clone, Debug)]
pub struct Analytic {
    shape: Shape,
}

impl Analytic {
    pub fn new(shape: Shape) -> Self {
        Self {
            shape: normalize(shape),
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }
}

fn normalize(shape: Shape) -> Shape {
    match shape {
        Shape::Plane { normal, offset } => {
            let n = normal.norm();
            Shape::Plane {
                normal: normal / n,
                offset: offset / n,
            }
        }
        Shape::Union(parts) => Shape::Union(parts.into_iter().map(normalize).collect()),
        other => other,
    }
}

impl ScalarField for Analytic {
    fn eval_unchecked(&self, points: &[Point3]) -> FieldResponse {
        let mut out = FieldResponse::with_capacity(points.len());
        for p in points {
            let (d, g) = self.shape.distance(p);
            out.push(d, g);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shapes() -> Vec<Shape> {
        vec![
            Shape::Sphere {
                center: Point3::new(0.1, -0.2, 0.05),
                radius: 0.5,
            },
            Shape::Plane {
                normal: Vector3::new(1.0, 2.0, -0.5),
                offset: 0.1,
            },
            Shape::Cuboid {
                center: Point3::origin(),
                half_extents: Vector3::new(0.5, 0.3, 0.4),
            },
            Shape::Disk {
                center: Point3::new(0.0, 0.0, 0.1),
                radius: 0.6,
            },
            Shape::Torus {
                center: Point3::origin(),
                major: 0.5,
                minor: 0.2,
            },
        ]
    }

    #[test]
    fn sphere_example() {
        let f = Analytic::new(Shape::Sphere {
            center: Point3::origin(),
            radius: 0.5,
        });
        let (d, g) = f.eval_point(Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(d, 0.5);
        assert_eq!(g, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn gradient_has_unit_length_off_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for shape in shapes() {
            let f = Analytic::new(shape);
            for _ in 0..2000 {
                let p = Point3::new(
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-1.5..1.5),
                );
                let (d, g) = f.eval_point(p).unwrap();
                assert!(d >= 0.0);
                if d > 0.0 && g != Vector3::zeros() {
                    assert_relative_eq!(g.norm(), 1.0, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn distance_is_one_lipschitz_and_projects_onto_the_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for shape in shapes() {
            let f = Analytic::new(shape);
            for _ in 0..2000 {
                let p = Point3::new(
                    rng.random_range(-1.2..1.2),
                    rng.random_range(-1.2..1.2),
                    rng.random_range(-1.2..1.2),
                );
                let q = p + Vector3::new(
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                );
                let (dp, gp) = f.eval_point(p).unwrap();
                let (dq, _) = f.eval_point(q).unwrap();
                assert!((dp - dq).abs() <= (p - q).norm() + 1e-12);
                if gp != Vector3::zeros() {
                    let foot = p - gp * dp;
                    assert!(f.eval_point(foot).unwrap().0 < 1e-12);
                }
            }
        }
    }

    #[test]
    fn union_takes_the_nearer_part() {
        let f = Analytic::new(Shape::Union(vec![
            Shape::Plane {
                normal: Vector3::z(),
                offset: 0.5,
            },
            Shape::Plane {
                normal: Vector3::z(),
                offset: -0.5,
            },
        ]));
        let (d, g) = f.eval_point(Point3::new(0.0, 0.0, 0.4)).unwrap();
        assert_relative_eq!(d, 0.1, epsilon = 1e-15);
        assert_eq!(g, -Vector3::z());
    }
}
