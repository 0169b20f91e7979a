//! Bounding-volume hierarchy for nearest-triangle queries.

use crate::{Point3, Vector3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Aabb {
    min: Point3,
    max: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Point3::from(Vector3::repeat(f64::INFINITY)),
            max: Point3::from(Vector3::repeat(f64::NEG_INFINITY)),
        }
    }

    fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    fn distance_squared(&self, p: &Point3) -> f64 {
        let mut d2 = 0.0;
        for a in 0..3 {
            let v = if p[a] < self.min[a] {
                self.min[a] - p[a]
            } else if p[a] > self.max[a] {
                p[a] - self.max[a]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2
    }
}

#[derive(Clone, Debug)]
enum Node {
    Inner { bounds: Aabb, left: u32, right: u32 },
    Leaf { bounds: Aabb, start: u32, end: u32 },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Inner { bounds, .. } | Node::Leaf { bounds, .. } => bounds,
        }
    }
}

/// Binary BVH with median splits along the longest centroid axis.
///
/// The tree only stores a permutation of primitive ids; the caller supplies
/// the exact primitive distance during queries.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    /// Builds over primitives described by their bounding points.
    pub fn build(primitives: &[[Point3; 3]]) -> Self {
        let boxes: Vec<Aabb> = primitives
            .iter()
            .map(|tri| {
                let mut b = Aabb::empty();
                tri.iter().for_each(|p| b.grow(p));
                b
            })
            .collect();
        let centroids: Vec<Point3> = boxes
            .iter()
            .map(|b| nalgebra::center(&b.min, &b.max))
            .collect();
        let mut order: Vec<u32> = (0..primitives.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * primitives.len() / LEAF_SIZE + 1);
        if !primitives.is_empty() {
            build_recursive(&boxes, &centroids, &mut order, 0, primitives.len(), &mut nodes);
        }
        Self { nodes, order }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Finds the primitive minimizing `dist2(id, p)`, returning it with its
    /// squared distance. `dist2` must be exact for the box pruning to be sound.
    pub fn nearest<T, F>(&self, p: &Point3, mut dist2: F) -> Option<(u32, f64, T)>
    where
        F: FnMut(u32) -> (f64, T),
    {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(u32, f64, T)> = None;
        let mut best_d2 = f64::INFINITY;
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds().distance_squared(p)));
        while let Some((index, box_d2)) = stack.pop() {
            if box_d2 > best_d2 {
                continue;
            }
            match &self.nodes[index as usize] {
                Node::Leaf { start, end, .. } => {
                    for &prim in &self.order[*start as usize..*end as usize] {
                        let (d2, extra) = dist2(prim);
                        // ties go to the lower primitive id so the result
                        // does not depend on the tree layout
                        let better = match &best {
                            None => true,
                            Some((id, _, _)) => d2 < best_d2 || (d2 == best_d2 && prim < *id),
                        };
                        if better {
                            best_d2 = d2;
                            best = Some((prim, d2, extra));
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left as usize].bounds().distance_squared(p);
                    let dr = self.nodes[*right as usize].bounds().distance_squared(p);
                    // push the farther child first so the nearer one pops next
                    if dl <= dr {
                        stack.push((*right, dr));
                        stack.push((*left, dl));
                    } else {
                        stack.push((*left, dl));
                        stack.push((*right, dr));
                    }
                }
            }
        }
        best
    }
}

fn build_recursive(
    boxes: &[Aabb],
    centroids: &[Point3],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &i in &order[start..end] {
        bounds.merge(&boxes[i as usize]);
        cbounds.grow(&centroids[i as usize]);
    }
    let index = nodes.len() as u32;
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            bounds,
            start: start as u32,
            end: end as u32,
        });
        return index;
    }
    let extent = cbounds.max - cbounds.min;
    let axis = extent.imax();
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node::Leaf {
        bounds,
        start: 0,
        end: 0,
    });
    let left = build_recursive(boxes, centroids, order, start, mid, nodes);
    let right = build_recursive(boxes, centroids, order, mid, end, nodes);
    nodes[index as usize] = Node::Inner {
        bounds,
        left,
        right,
    };
    index
}
