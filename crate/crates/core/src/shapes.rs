//! Parametric reference meshes: ground-truth surfaces for mesh-derived
//! fields and for metric evaluation.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use crate::mesh::IndexedMesh;
use crate::{Point3, Vector3};

/// Merges vertices that coincide after rounding to `1e-12`.
pub fn weld(mesh: &IndexedMesh) -> IndexedMesh {
    let mut index: HashMap<[i64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let remap: Vec<u32> = mesh
        .vertices
        .iter()
        .map(|p| {
            let key = [0, 1, 2].map(|a| (p[a] * 1e12).round() as i64);
            *index.entry(key).or_insert_with(|| {
                vertices.push(*p);
                (vertices.len() - 1) as u32
            })
        })
        .collect();
    let triangles = mesh
        .triangles
        .iter()
        .map(|t| t.map(|v| remap[v as usize]))
        .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
        .collect();
    IndexedMesh::new(vertices, triangles)
}

/// Grid of `n × n` quads spanning `origin + [0,1]·u + [0,1]·v`.
fn quad_patch(mesh: &mut IndexedMesh, origin: Point3, u: Vector3, v: Vector3, n: u32) {
    let base = mesh.vertices.len() as u32;
    for j in 0..=n {
        for i in 0..=n {
            mesh.vertices
                .push(origin + u * (i as f64 / n as f64) + v * (j as f64 / n as f64));
        }
    }
    let id = |i: u32, j: u32| base + j * (n + 1) + i;
    for j in 0..n {
        for i in 0..n {
            mesh.triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            mesh.triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
}

/// Closed, outward-facing box surface with `n × n` quads per face.
pub fn cuboid(center: Point3, half: Vector3, n: u32) -> IndexedMesh {
    let mut mesh = IndexedMesh::default();
    for axis in 0..3 {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        for sign in [-1.0, 1.0] {
            let mut origin = center;
            origin[axis] += sign * half[axis];
            origin[b] -= half[b];
            origin[c] -= half[c];
            let mut u = Vector3::zeros();
            let mut v = Vector3::zeros();
            u[b] = 2.0 * half[b];
            v[c] = 2.0 * half[c];
            if sign > 0.0 {
                quad_patch(&mut mesh, origin, u, v, n);
            } else {
                quad_patch(&mut mesh, origin, v, u, n);
            }
        }
    }
    weld(&mesh)
}

pub fn uv_sphere(center: Point3, radius: f64, slices: u32, stacks: u32) -> IndexedMesh {
    let mut vertices = vec![center + Vector3::new(0.0, 0.0, radius)];
    for s in 1..stacks {
        let theta = PI * s as f64 / stacks as f64;
        for k in 0..slices {
            let phi = TAU * k as f64 / slices as f64;
            vertices.push(center + radius * Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()));
        }
    }
    vertices.push(center - Vector3::new(0.0, 0.0, radius));
    let south = vertices.len() as u32 - 1;
    let ring = |s: u32, k: u32| 1 + (s - 1) * slices + (k % slices);
    let mut triangles = Vec::new();
    for k in 0..slices {
        triangles.push([0, ring(1, k), ring(1, k + 1)]);
        triangles.push([south, ring(stacks - 1, k + 1), ring(stacks - 1, k)]);
    }
    for s in 1..stacks - 1 {
        for k in 0..slices {
            triangles.push([ring(s, k), ring(s + 1, k), ring(s + 1, k + 1)]);
            triangles.push([ring(s, k), ring(s + 1, k + 1), ring(s, k + 1)]);
        }
    }
    IndexedMesh::new(vertices, triangles)
}

/// Subdivided icosahedron projected onto the sphere.
pub fn icosphere(center: Point3, radius: f64, level: u32) -> IndexedMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut unit: Vec<Vector3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::from(*v).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, unit: &mut Vec<Vector3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                unit.push((unit[a as usize] + unit[b as usize]).normalize());
                unit.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut unit);
            let bc = mid(b, c, &mut unit);
            let ca = mid(c, a, &mut unit);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    IndexedMesh::new(unit.into_iter().map(|u| center + u * radius).collect(), faces)
}

/// Flat disk in the plane `z = center.z`, triangulated in polar rings.
pub fn disk(center: Point3, radius: f64, rings: u32, segments: u32) -> IndexedMesh {
    let mut vertices = vec![center];
    for r in 1..=rings {
        let rho = radius * r as f64 / rings as f64;
        for k in 0..segments {
            let phi = TAU * k as f64 / segments as f64;
            vertices.push(center + Vector3::new(rho * phi.cos(), rho * phi.sin(), 0.0));
        }
    }
    let ring = |r: u32, k: u32| 1 + (r - 1) * segments + (k % segments);
    let mut triangles = Vec::new();
    for k in 0..segments {
        triangles.push([0, ring(1, k), ring(1, k + 1)]);
    }
    for r in 1..rings {
        for k in 0..segments {
            triangles.push([ring(r, k), ring(r + 1, k), ring(r + 1, k + 1)]);
            triangles.push([ring(r, k), ring(r + 1, k + 1), ring(r, k + 1)]);
        }
    }
    IndexedMesh::new(vertices, triangles)
}

/// Axis-aligned square `[-half, half]²` in the plane `z = height`.
pub fn square(half: f64, height: f64, n: u32) -> IndexedMesh {
    let mut mesh = IndexedMesh::default();
    quad_patch(
        &mut mesh,
        Point3::new(-half, -half, height),
        Vector3::new(2.0 * half, 0.0, 0.0),
        Vector3::new(0.0, 2.0 * half, 0.0),
        n,
    );
    mesh
}

/// Möbius strip of centerline radius `radius` and strip half-width
/// `half_width`, with the half twist closing the seam.
pub fn mobius_strip(radius: f64, half_width: f64, segments: u32, across: u32) -> IndexedMesh {
    let point = |u: f64, v: f64| {
        let r = radius + v * (u / 2.0).cos();
        Point3::new(r * u.cos(), r * u.sin(), v * (u / 2.0).sin())
    };
    let mut vertices = Vec::new();
    for i in 0..segments {
        let u = TAU * i as f64 / segments as f64;
        for j in 0..=across {
            let v = -half_width + 2.0 * half_width * j as f64 / across as f64;
            vertices.push(point(u, v));
        }
    }
    let id = |i: u32, j: u32| -> u32 {
        if i == segments {
            // the seam identifies v with -v
            across - j
        } else {
            i * (across + 1) + j
        }
    };
    let mut triangles = Vec::new();
    for i in 0..segments {
        for j in 0..across {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    IndexedMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_shapes_have_sphere_topology() {
        for mesh in [
            cuboid(Point3::origin(), Vector3::repeat(0.5), 3),
            uv_sphere(Point3::origin(), 1.0, 12, 8),
            icosphere(Point3::origin(), 1.0, 2),
        ] {
            assert_eq!(mesh.euler_characteristic(), 2);
            assert!(mesh.boundary_edges().is_empty());
            assert_eq!(mesh.max_edge_degree(), 2);
        }
    }

    #[test]
    fn cuboid_area() {
        let m = cuboid(Point3::origin(), Vector3::repeat(0.5), 4);
        assert!((m.area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn mobius_strip_has_one_boundary_loop() {
        let m = mobius_strip(0.5, 0.2, 60, 6);
        assert_eq!(m.boundary_loop_count(), 1);
        assert_eq!(m.component_count(), 1);
        assert_eq!(m.euler_characteristic(), 0);
    }

    #[test]
    fn disk_is_a_topological_disk() {
        let m = disk(Point3::origin(), 1.0, 5, 32);
        assert_eq!(m.euler_characteristic(), 1);
        assert_eq!(m.boundary_loop_count(), 1);
    }
}
