use super::{Bvh, FieldError, FieldResponse, ScalarField};
use crate::mesh::IndexedMesh;
use crate::{Point3, Vector3};

/// Points closer than this to the mesh count as lying on it; their gradient
/// direction is undefined.
pub const ON_SURFACE_EPS: f64 = 1e-12;

/// Closest point on triangle `abc` to `p`, by Voronoi-region classification.
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Result of a nearest-surface query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestPoint {
    pub distance: f64,
    pub point: Point3,
    pub triangle: u32,
    /// Unit direction from the surface to the query; `None` on the surface.
    pub gradient: Option<Vector3>,
}

/// Exact unsigned distance to a triangle mesh.
#[derive(Clone, Debug)]
pub struct MeshField {
    triangles: Vec<[Point3; 3]>,
    bvh: Bvh,
}

impl MeshField {
    /// Ingests a mesh, dropping zero-area triangles.
    pub fn new(mesh: &IndexedMesh) -> Result<Self, FieldError> {
        let triangles: Vec<[Point3; 3]> = (0..mesh.triangles.len())
            .filter(|&t| mesh.triangle_normal(t).norm() > 0.0)
            .map(|t| mesh.triangle(t))
            .collect();
        if triangles.is_empty() {
            return Err(FieldError::EmptyMesh);
        }
        let bvh = Bvh::build(&triangles);
        Ok(Self { triangles, bvh })
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn closest(&self, p: &Point3) -> ClosestPoint {
        let (triangle, d2, point) = self
            .bvh
            .nearest(p, |id| {
                let [a, b, c] = &self.triangles[id as usize];
                let q = closest_point_on_triangle(p, a, b, c);
                ((p - q).norm_squared(), q)
            })
            .expect("mesh field always has triangles");
        let distance = d2.sqrt();
        let gradient = (distance >= ON_SURFACE_EPS).then(|| (p - point) / distance);
        ClosestPoint {
            distance,
            point,
            triangle,
            gradient,
        }
    }

    /// Distance and gradient, gradient zero on the surface.
    pub fn mesh_distance(&self, p: &Point3) -> (f64, Vector3) {
        let c = self.closest(p);
        (c.distance, c.gradient.unwrap_or_else(Vector3::zeros))
    }

    /// Linear scan over every triangle.
    pub fn distance_brute_force(&self, p: &Point3) -> f64 {
        self.triangles
            .iter()
            .map(|[a, b, c]| (p - closest_point_on_triangle(p, a, b, c)).norm_squared())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

impl ScalarField for MeshField {
    fn eval_unchecked(&self, points: &[Point3]) -> FieldResponse {
        let mut out = FieldResponse::with_capacity(points.len());
        for p in points {
            let (d, g) = self.mesh_distance(p);
            out.push(d, g);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_triangle() -> MeshField {
        MeshField::new(&IndexedMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        ))
        .unwrap()
    }

    #[test]
    fn point_above_triangle() {
        let f = single_triangle();
        let (d, g) = f.mesh_distance(&Point3::new(0.0, 0.0, 1.0));
        assert_eq!(d, 1.0);
        assert_eq!(g, Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn vertex_query_is_on_surface() {
        let f = single_triangle();
        let c = f.closest(&Point3::new(1.0, 0.0, 0.0));
        assert_eq!(c.distance, 0.0);
        assert!(c.gradient.is_none());
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let degenerate = IndexedMesh::new(vec![Point3::origin(); 3], vec![[0, 1, 2]]);
        assert!(matches!(MeshField::new(&degenerate), Err(FieldError::EmptyMesh)));
        assert!(matches!(MeshField::new(&IndexedMesh::default()), Err(FieldError::EmptyMesh)));
    }

    /// Closest point by dense barycentric search, independent of the region
    /// logic above.
    fn closest_by_search(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> f64 {
        let n = 400;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                let q = a + (b - a) * u + (c - a) * v;
                best = best.min((p - q).norm());
            }
        }
        best
    }

    #[test]
    fn closest_point_matches_dense_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rp = || Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        for _ in 0..40 {
            let (a, b, c, p) = (rp(), rp(), rp(), rp());
            let exact = (p - closest_point_on_triangle(&p, &a, &b, &c)).norm();
            let searched = closest_by_search(&p, &a, &b, &c);
            // exact is a true minimum; search can only overshoot, by at most
            // the lattice spacing
            assert!(exact <= searched + 1e-12);
            assert!(searched - exact < 2.0 * 3.0 / 400.0);
        }
    }

    #[test]
    fn bvh_matches_brute_force() {
        let mesh = shapes::uv_sphere(Point3::new(0.1, 0.0, -0.1), 0.6, 20, 14);
        assert!(mesh.triangles.len() >= 500);
        let f = MeshField::new(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3000 {
            let p = Point3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let a = f.mesh_distance(&p).0;
            let b = f.distance_brute_force(&p);
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn mesh_distance_is_one_lipschitz() {
        let f = MeshField::new(&shapes::mobius_strip(0.5, 0.2, 64, 8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..3000 {
            let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let q = p + Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            let (dp, dq) = (f.mesh_distance(&p).0, f.mesh_distance(&q).0);
            assert!((dp - dq).abs() <= (p - q).norm() + 1e-12);
        }
    }
}
