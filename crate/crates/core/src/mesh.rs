//! Indexed triangle meshes and the topology queries used to audit them.

use std::collections::{BTreeMap, HashMap};

use crate::grid::CellIndex;
use crate::{Point3, Vector3};

/// Triangle mesh with optional per-vertex cell provenance.
///
/// `cells` is either empty (meshes read from disk) or parallel to
/// `vertices`, naming the max-depth grid cell each vertex was solved in.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IndexedMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    pub cells: Vec<CellIndex>,
}

/// Undirected edge key with the smaller vertex first.
pub fn edge_key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl IndexedMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            triangles,
            cells: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized normal, twice the area in length.
    pub fn triangle_normal(&self, t: usize) -> Vector3 {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| 0.5 * self.triangle_normal(t).norm())
            .sum()
    }

    /// Every undirected edge with the triangles using it, in edge order.
    pub fn edge_triangles(&self) -> BTreeMap<(u32, u32), Vec<u32>> {
        let mut map: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                map.entry(edge_key(tri[k], tri[(k + 1) % 3]))
                    .or_default()
                    .push(t as u32);
            }
        }
        map
    }

    pub fn max_edge_degree(&self) -> usize {
        self.edge_triangles().values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn boundary_edges(&self) -> Vec<(u32, u32)> {
        self.edge_triangles()
            .into_iter()
            .filter(|(_, tris)| tris.len() == 1)
            .map(|(e, _)| e)
            .collect()
    }

    /// Number of connected components formed by the boundary edges.
    pub fn boundary_loop_count(&self) -> usize {
        let edges = self.boundary_edges();
        let mut uf = UnionFind::new(self.vertices.len());
        let mut touched = vec![false; self.vertices.len()];
        for &(a, b) in &edges {
            uf.union(a as usize, b as usize);
            touched[a as usize] = true;
            touched[b as usize] = true;
        }
        (0..self.vertices.len())
            .filter(|&v| touched[v] && uf.find(v) == v)
            .count()
    }

    /// Number of edge-connected triangle components.
    pub fn component_count(&self) -> usize {
        self.component_labels().into_iter().max().map_or(0, |m| m as usize + 1)
    }

    /// Component id per triangle, numbered in order of first appearance.
    pub fn component_labels(&self) -> Vec<u32> {
        let mut uf = UnionFind::new(self.triangles.len());
        for tris in self.edge_triangles().values() {
            for w in tris.windows(2) {
                uf.union(w[0] as usize, w[1] as usize);
            }
        }
        let mut ids: HashMap<usize, u32> = HashMap::new();
        (0..self.triangles.len())
            .map(|t| {
                let root = uf.find(t);
                let next = ids.len() as u32;
                *ids.entry(root).or_insert(next)
            })
            .collect()
    }

    /// `V - E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for tri in &self.triangles {
            for &v in tri {
                used[v as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        let e = self.edge_triangles().len() as i64;
        v - e + self.triangles.len() as i64
    }

    /// Drops vertices no triangle references, keeping relative order.
    pub fn compact(&mut self) {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        for tri in &self.triangles {
            for &v in tri {
                remap[v as usize] = 0;
            }
        }
        let mut next = 0u32;
        let mut vertices = Vec::with_capacity(self.vertices.len());
        let mut cells = Vec::new();
        for (i, slot) in remap.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = next;
                next += 1;
                vertices.push(self.vertices[i]);
                if !self.cells.is_empty() {
                    cells.push(self.cells[i]);
                }
            }
        }
        for tri in &mut self.triangles {
            for v in tri.iter_mut() {
                *v = remap[*v as usize];
            }
        }
        self.vertices = vertices;
        self.cells = cells;
    }

    /// Flips triangles so neighbors across manifold edges traverse the shared
    /// edge in opposite directions. Each component keeps the winding of its
    /// first triangle; non-orientable components end with one seam.
    pub fn orient_components(&mut self) {
        let edges = self.edge_triangles();
        let n = self.triangles.len();
        let mut visited = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        for seed in 0..n {
            if visited[seed] {
                continue;
            }
            visited[seed] = true;
            queue.push_back(seed);
            while let Some(t) = queue.pop_front() {
                let tri = self.triangles[t];
                for k in 0..3 {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    let incident = &edges[&edge_key(a, b)];
                    if incident.len() != 2 {
                        continue;
                    }
                    let other = if incident[0] as usize == t {
                        incident[1]
                    } else {
                        incident[0]
                    } as usize;
                    if visited[other] {
                        continue;
                    }
                    visited[other] = true;
                    let o = self.triangles[other];
                    let same_direction = (0..3).any(|j| o[j] == a && o[(j + 1) % 3] == b);
                    if same_direction {
                        self.triangles[other] = [o[0], o[2], o[1]];
                    }
                    queue.push_back(other);
                }
            }
        }
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // lower root wins to keep labels reproducible
            if ra < rb {
                self.parent[rb] = ra;
            } else {
                self.parent[ra] = rb;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetrahedron() -> IndexedMesh {
        IndexedMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]],
        )
    }

    #[test]
    fn closed_tetrahedron_topology() {
        let m = tetrahedron();
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.boundary_edges().is_empty());
        assert_eq!(m.boundary_loop_count(), 0);
        assert_eq!(m.component_count(), 1);
        assert_eq!(m.max_edge_degree(), 2);
    }

    #[test]
    fn open_fan_has_one_loop() {
        let mut m = tetrahedron();
        m.triangles.pop();
        assert_eq!(m.boundary_loop_count(), 1);
        assert_eq!(m.boundary_edges().len(), 3);
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn orientation_propagates() {
        let mut m = tetrahedron();
        m.triangles[2] = [1, 3, 2];
        m.triangles[3] = [0, 2, 3];
        m.orient_components();
        for (_, tris) in m.edge_triangles() {
            assert_eq!(tris.len(), 2);
        }
        // every directed edge now appears exactly once
        let mut directed = std::collections::HashSet::new();
        for t in &m.triangles {
            for k in 0..3 {
                assert!(directed.insert((t[k], t[(k + 1) % 3])));
            }
        }
    }

    #[test]
    fn compact_drops_unused_vertices() {
        let mut m = tetrahedron();
        m.vertices.push(Point3::new(5.0, 5.0, 5.0));
        m.vertices.insert(0, Point3::new(9.0, 9.0, 9.0));
        for t in &mut m.triangles {
            for v in t.iter_mut() {
                *v += 1;
            }
        }
        m.compact();
        assert_eq!(m, tetrahedron());
    }
}
