//! Least-squares point placement from estimated tangent planes.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::{Point3, Vector3};

/// Relative singular-value cutoff below which a direction counts as free.
pub const DEFAULT_SIGMA_RATIO: f64 = 0.1;

/// Local feature type implied by the rank of the plane system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum Classification {
    Corner,
    /// A crease; `direction` spans the free direction.
    Edge { direction: Vector3 },
    /// A flat patch with the given normal.
    Plane { normal: Vector3 },
}

impl Classification {
    /// Number of independent constraints: 3 for a corner, 1 for a plane.
    pub fn rank(&self) -> u8 {
        match self {
            Classification::Corner => 3,
            Classification::Edge { .. } => 2,
            Classification::Plane { .. } => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Classification::Corner => "corner",
            Classification::Edge { .. } => "edge",
            Classification::Plane { .. } => "plane",
        }
    }
}

/// How the final position was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Corner solution, edge midpoint or plane centroid inside the cell.
    Solved,
    /// A corner solution outside the cell, clamped into it.
    Clamped,
    /// The feature misses the cell; a sample projection inside the cell is
    /// used instead.
    Projected,
    /// The edge line or plane misses the cell; the least-squares anchor was
    /// clamped instead.
    Fallback,
}

/// Rows `n_i · x = n_i · q_i` with unit normals `n_i`.
#[derive(Clone, Debug, Default)]
pub struct QefSystem {
    pub rows: Vec<(Vector3, f64)>,
    /// Mean of the points the planes pass through.
    pub centroid: Point3,
    point_sum: Vector3,
}

impl QefSystem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the plane with unit `normal` through `point`.
    pub fn push_plane(&mut self, normal: Vector3, point: Point3) {
        self.rows.push((normal, normal.dot(&point.coords)));
        self.point_sum += point.coords;
        self.centroid = Point3::from(self.point_sum / self.rows.len() as f64);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sum of squared plane distances at `x`.
    pub fn residual(&self, x: &Point3) -> f64 {
        self.rows
            .iter()
            .map(|(n, rhs)| (n.dot(&x.coords) - rhs).powi(2))
            .sum()
    }

    /// `Aᵀ(Ax − b)`, zero at any least-squares optimum.
    pub fn normal_equation_residual(&self, x: &Point3) -> Vector3 {
        self.rows
            .iter()
            .map(|(n, rhs)| n * (n.dot(&x.coords) - rhs))
            .sum()
    }
}

/// Outcome of one solve. `raw_position` is before clamping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QefSolution {
    pub position: Point3,
    pub raw_position: Point3,
    pub classification: Classification,
    pub singular_values: [f64; 3],
    pub placement: Placement,
    /// A corner or edge `accept` turned down, with a point on it.
    pub unaccepted: Option<(Classification, Point3)>,
}

/// Axis-aligned cubic cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellBox {
    pub min: Point3,
    pub size: f64,
}

impl CellBox {
    pub fn max(&self) -> Point3 {
        self.min + Vector3::repeat(self.size)
    }

    pub fn center(&self) -> Point3 {
        self.min + Vector3::repeat(0.5 * self.size)
    }

    pub fn clamp(&self, p: &Point3) -> Point3 {
        let max = self.max();
        Point3::from(Vector3::from_fn(|a, _| p[a].clamp(self.min[a], max[a])))
    }

    /// Inside the closed box, with slack `tol`.
    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        let max = self.max();
        (0..3).all(|a| p[a] >= self.min[a] - tol && p[a] <= max[a] + tol)
    }

    fn corners(&self) -> [Point3; 8] {
        std::array::from_fn(|k| {
            self.min
                + Vector3::new(
                    (k & 1) as f64 * self.size,
                    ((k >> 1) & 1) as f64 * self.size,
                    ((k >> 2) & 1) as f64 * self.size,
                )
        })
    }
}

/// Cube edges as corner pairs, corner bits `x | y << 1 | z << 2`.
const CUBE_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Solves the plane system inside `cell`; `None` with fewer than three rows.
///
/// The system is solved in coordinates centered on the cell center with a
/// truncated SVD. Full rank places a corner at the least-squares solution.
/// Rank two gives a line along the weakest singular direction; the vertex is
/// the midpoint of the chord it cuts through the cell. Rank one gives a plane
/// whose intersections with the twelve cell edges are averaged.
pub fn solve_qef(system: &QefSystem, cell: &CellBox, sigma_ratio: f64) -> Option<QefSolution> {
    let tol = 1e-9 * cell.size;
    solve_qef_accepting(system, cell, sigma_ratio, |p| cell.contains(p, tol))
}

/// As [`solve_qef`], but a solution only counts as placed when `accept`
/// holds; otherwise lower ranks are tried.
pub fn solve_qef_accepting(
    system: &QefSystem,
    cell: &CellBox,
    sigma_ratio: f64,
    accept: impl Fn(&Point3) -> bool,
) -> Option<QefSolution> {
    if system.len() < 3 {
        return None;
    }
    let center = cell.center();
    // Normal equations in the centered frame. Truncation keeps only directions
    // with σ ≥ ratio·σ0, so squaring the condition number costs little.
    // (nalgebra's thin SVD mis-factors tall matrices with repeated rows.)
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (n, rhs) in &system.rows {
        ata += n * n.transpose();
        atb += n * (rhs - n.dot(&center.coords));
    }
    let eig = SymmetricEigen::new(ata);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let sigma = order.map(|i| eig.eigenvalues[i].max(0.0).sqrt());
    let vectors = order.map(|i| eig.eigenvectors.column(i).into_owned());
    if !(sigma[0] > 0.0) {
        return None;
    }
    let rank = sigma.iter().filter(|&&s| s >= sigma_ratio * sigma[0]).count();

    let tol = 1e-9 * cell.size;
    let place = |kept: &[usize]| {
        let mut offset = Vector3::zeros();
        for &k in kept {
            offset += vectors[k] * (vectors[k].dot(&atb) / (sigma[k] * sigma[k]));
        }
        let anchor = center + offset;
        match kept {
            [_, _, _] => (Classification::Corner, Some(anchor), anchor),
            &[a, b] => {
                let direction = vectors[a].cross(&vectors[b]).normalize();
                (Classification::Edge { direction }, chord_midpoint(&anchor, &direction, cell, tol), anchor)
            }
            _ => {
                let normal = vectors[kept[0]].normalize();
                (Classification::Plane { normal }, plane_cell_centroid(&anchor, &normal, cell, tol), anchor)
            }
        }
    };

    let (mut classification, found, anchor) = place(&[0, 1, 2][..rank]);
    let mut raw = found.unwrap_or(anchor);
    let mut placement = match found {
        None => Placement::Fallback,
        Some(p) if accept(&p) || cell.contains(&p, tol) => Placement::Solved,
        Some(_) => Placement::Clamped,
    };
    let unaccepted = (rank >= 2 && !found.is_some_and(|p| accept(&p))).then_some((classification, anchor));
    if !found.is_some_and(|p| accept(&p)) {
        // fewer constraints, strongest first, until a feature lands in the cell
        let fewer: &[&[usize]] = match rank {
            3 => &[&[0, 1], &[0, 2], &[1, 2], &[0], &[1], &[2]],
            2 => &[&[0], &[1]],
            _ => &[],
        };
        if let Some((c, Some(p), _)) = fewer.iter().map(|k| place(k)).find(|(_, p, _)| p.is_some_and(|p| accept(&p))) {
            classification = c;
            raw = p;
            placement = Placement::Solved;
        }
    }
    Some(QefSolution {
        position: cell.clamp(&raw),
        raw_position: raw,
        classification,
        singular_values: sigma,
        placement,
        unaccepted,
    })
}

/// Where a feature through `anchor` would put its vertex in `cell`, if it
/// meets the closed cell.
pub fn place_in(classification: &Classification, anchor: &Point3, cell: &CellBox) -> Option<Point3> {
    let tol = 1e-9 * cell.size;
    match classification {
        Classification::Corner => cell.contains(anchor, tol).then_some(*anchor),
        Classification::Edge { direction } => chord_midpoint(anchor, direction, cell, tol),
        Classification::Plane { normal } => plane_cell_centroid(anchor, normal, cell, tol),
    }
}

/// Midpoint of the segment where the line meets the closed cell, if it
/// crosses with positive length.
fn chord_midpoint(origin: &Point3, direction: &Vector3, cell: &CellBox, tol: f64) -> Option<Point3> {
    let max = cell.max();
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for a in 0..3 {
        if direction[a].abs() < 1e-12 {
            if origin[a] < cell.min[a] - tol || origin[a] > max[a] + tol {
                return None;
            }
            continue;
        }
        let t0 = (cell.min[a] - origin[a]) / direction[a];
        let t1 = (max[a] - origin[a]) / direction[a];
        t_lo = t_lo.max(t0.min(t1));
        t_hi = t_hi.min(t0.max(t1));
    }
    (t_hi - t_lo > tol).then(|| origin + direction * (0.5 * (t_lo + t_hi)))
}

/// Centroid of the plane's intersections with the cell edges. Corners lying
/// on the plane count once.
fn plane_cell_centroid(point: &Point3, normal: &Vector3, cell: &CellBox, tol: f64) -> Option<Point3> {
    let corners = cell.corners();
    let f: Vec<f64> = corners.iter().map(|c| normal.dot(&(c - point))).collect();
    let on_plane: Vec<bool> = f.iter().map(|v| v.abs() <= tol).collect();
    let mut sum = Vector3::zeros();
    let mut count = 0usize;
    for (k, c) in corners.iter().enumerate() {
        if on_plane[k] {
            sum += c.coords;
            count += 1;
        }
    }
    for &(i, j) in &CUBE_EDGES {
        if on_plane[i] || on_plane[j] || (f[i] > 0.0) == (f[j] > 0.0) {
            continue;
        }
        let t = f[i] / (f[i] - f[j]);
        sum += corners[i].coords + (corners[j] - corners[i]) * t;
        count += 1;
    }
    (count > 0).then(|| Point3::from(sum / count as f64))
}
