use std::collections::BTreeMap;

use serde::Serialize;

use super::EdgeStencil;
use crate::mesh::{edge_key, IndexedMesh};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RepairReport {
    /// Triangles whose dual edge lies entirely inside the blocky solid.
    pub removed_interior: u64,
    /// Triangles dropped afterwards from edges with more than two faces.
    pub removed_nonmanifold: u64,
}

struct Grid {
    n: usize,
}

impl Grid {
    fn index(&self, v: [u32; 3]) -> usize {
        let m = self.n + 1;
        v[0] as usize + m * (v[1] as usize + m * v[2] as usize)
    }
}

/// Grid vertices reachable from the domain boundary without crossing a face
/// of the blocky model. A face of the blocky model is the dual of its grid
/// edge, so crossing it means walking along that edge.
fn outside_vertices(resolution: u32, walls: &[[u32; 3]], axes: &[usize]) -> Vec<bool> {
    let grid = Grid { n: resolution as usize };
    let m = resolution as usize + 1;
    let mut blocked = vec![0u8; m * m * m];
    for (base, &axis) in walls.iter().zip(axes) {
        blocked[grid.index(*base)] |= 1 << axis;
    }
    let stride = [1, m, m * m];
    let mut outside = vec![false; m * m * m];
    let mut stack = Vec::new();
    for z in 0..m {
        for y in 0..m {
            for x in 0..m {
                let on_boundary = [x, y, z].iter().any(|&c| c == 0 || c == m - 1);
                if on_boundary {
                    let i = x + m * (y + m * z);
                    outside[i] = true;
                    stack.push((i, [x, y, z]));
                }
            }
        }
    }
    while let Some((i, c)) = stack.pop() {
        for a in 0..3 {
            if c[a] + 1 < m && blocked[i] & (1 << a) == 0 {
                let j = i + stride[a];
                if !outside[j] {
                    outside[j] = true;
                    let mut d = c;
                    d[a] += 1;
                    stack.push((j, d));
                }
            }
            if c[a] > 0 {
                let j = i - stride[a];
                if blocked[j] & (1 << a) == 0 && !outside[j] {
                    outside[j] = true;
                    let mut d = c;
                    d[a] -= 1;
                    stack.push((j, d));
                }
            }
        }
    }
    outside
}

/// Keeps the triangles on the outer envelope of the blocky model, then
/// trims any edge still shared by more than two triangles, dropping fins
/// before faces that separate the outside from an enclosed region.
///
/// The blocky model moves every vertex to the center of its cell, turning
/// each quad into the square dual to its grid edge. Flooding the grid from
/// the domain boundary, stepping along every edge whose square still has a
/// triangle, labels the outside; a triangle survives when at least one end of
/// its grid edge is outside. Vertex positions are untouched. Triangles whose
/// cells do not form a stencil are kept as they are. Requires `mesh.cells`.
pub fn manifold_repair(mesh: &IndexedMesh, resolution: u32) -> (IndexedMesh, RepairReport) {
    assert_eq!(mesh.cells.len(), mesh.vertices.len(), "repair needs cell provenance");
    let stencils: Vec<Option<EdgeStencil>> = mesh
        .triangles
        .iter()
        .map(|t| EdgeStencil::from_cells(t.map(|v| mesh.cells[v as usize])))
        .collect();
    let walls: Vec<&EdgeStencil> = stencils.iter().flatten().collect();
    let outside = outside_vertices(
        resolution,
        &walls.iter().map(|s| s.base).collect::<Vec<_>>(),
        &walls.iter().map(|s| s.axis).collect::<Vec<_>>(),
    );
    let grid = Grid {
        n: resolution as usize,
    };
    let mut report = RepairReport::default();
    let mut triangles: Vec<[u32; 3]> = Vec::with_capacity(mesh.triangles.len());
    // fins have the outside on both sides; they give way first on crowded edges
    let mut fin: Vec<bool> = Vec::with_capacity(mesh.triangles.len());
    for (t, s) in mesh.triangles.iter().zip(&stencils) {
        let sides = match s {
            Some(s) => [outside[grid.index(s.base)], outside[grid.index(s.tip())]],
            None => [true, false],
        };
        if sides[0] || sides[1] {
            triangles.push(*t);
            fin.push(sides[0] && sides[1]);
        } else {
            report.removed_interior += 1;
        }
    }

    let mut incident: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, t) in triangles.iter().enumerate() {
        for k in 0..3 {
            incident.entry(edge_key(t[k], t[(k + 1) % 3])).or_default().push(i);
        }
    }
    let mut degree: BTreeMap<(u32, u32), usize> = incident.iter().map(|(e, f)| (*e, f.len())).collect();
    let mut removed = vec![false; triangles.len()];
    for faces in incident.values() {
        let mut live: Vec<usize> = faces.iter().copied().filter(|&f| !removed[f]).collect();
        if live.len() <= 2 {
            continue;
        }
        // a face whose other edges are crowded too can go without opening a hole
        let opened = |f: usize| {
            let t = triangles[f];
            (0..3).filter(|&k| degree[&edge_key(t[k], t[(k + 1) % 3])] <= 2).count()
        };
        live.sort_by_key(|&f| (fin[f], std::cmp::Reverse(opened(f))));
        for &f in live.iter().skip(2) {
            removed[f] = true;
            report.removed_nonmanifold += 1;
            let t = triangles[f];
            for k in 0..3 {
                *degree.get_mut(&edge_key(t[k], t[(k + 1) % 3])).unwrap() -= 1;
            }
        }
    }
    let triangles = triangles
        .into_iter()
        .zip(removed)
        .filter(|(_, r)| !r)
        .map(|(t, _)| t)
        .collect();
    let out = IndexedMesh {
        vertices: mesh.vertices.clone(),
        triangles,
        cells: mesh.cells.clone(),
    };
    (out, report)
}
