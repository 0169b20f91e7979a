//! Cubic domain, integer cell addressing and Morton keys.

use serde::{Deserialize, Serialize};

use crate::{Point3, Vector3};

/// Axis-aligned cubic region that the octree partitions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub min: Point3,
    pub size: f64,
}

impl Default for Domain {
    /// The bounding cube of side 2 centered at the origin.
    fn default() -> Self {
        Self {
            min: Point3::new(-1.0, -1.0, -1.0),
            size: 2.0,
        }
    }
}

impl Domain {
    pub fn max(&self) -> Point3 {
        self.min + Vector3::repeat(self.size)
    }

    /// Edge length of a cell at `depth`.
    pub fn cell_size(&self, depth: u32) -> f64 {
        self.size / (1u64 << depth) as f64
    }

    pub fn cell_min(&self, cell: CellIndex, depth: u32) -> Point3 {
        let h = self.cell_size(depth);
        self.min + Vector3::new(cell.0[0] as f64, cell.0[1] as f64, cell.0[2] as f64) * h
    }

    pub fn cell_center(&self, cell: CellIndex, depth: u32) -> Point3 {
        let h = self.cell_size(depth);
        self.cell_min(cell, depth) + Vector3::repeat(0.5 * h)
    }

    /// Position of a grid vertex of the `resolution`-per-axis lattice.
    pub fn lattice_point(&self, index: [u32; 3], resolution: u32) -> Point3 {
        let step = self.size / resolution as f64;
        self.min + Vector3::new(index[0] as f64, index[1] as f64, index[2] as f64) * step
    }
}

/// Integer coordinates of a cell on the regular grid of one octree depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex(pub [u32; 3]);

impl CellIndex {
    pub fn new(i: u32, j: u32, k: u32) -> Self {
        Self([i, j, k])
    }

    pub fn morton(self) -> u64 {
        morton_encode(self.0)
    }

    pub fn from_morton(key: u64) -> Self {
        Self(morton_decode(key))
    }

    pub fn child(self, octant: u32) -> Self {
        Self([
            2 * self.0[0] + (octant & 1),
            2 * self.0[1] + ((octant >> 1) & 1),
            2 * self.0[2] + ((octant >> 2) & 1),
        ])
    }

    /// Neighbor at integer `offset`, if it stays inside a `resolution`-wide grid.
    pub fn offset(self, offset: [i32; 3], resolution: u32) -> Option<Self> {
        let mut out = [0u32; 3];
        for a in 0..3 {
            let v = self.0[a] as i64 + offset[a] as i64;
            if v < 0 || v >= resolution as i64 {
                return None;
            }
            out[a] = v as u32;
        }
        Some(Self(out))
    }
}

fn spread_bits(v: u32) -> u64 {
    let mut x = (v as u64) & 0x1f_ffff;
    x = (x | (x << 32)) & 0x1f00000000ffff;
    x = (x | (x << 16)) & 0x1f0000ff0000ff;
    x = (x | (x << 8)) & 0x100f00f00f00f00f;
    x = (x | (x << 4)) & 0x10c30c30c30c30c3;
    x = (x | (x << 2)) & 0x1249249249249249;
    x
}

fn compact_bits(v: u64) -> u32 {
    let mut x = v & 0x1249249249249249;
    x = (x | (x >> 2)) & 0x10c30c30c30c30c3;
    x = (x | (x >> 4)) & 0x100f00f00f00f00f;
    x = (x | (x >> 8)) & 0x1f0000ff0000ff;
    x = (x | (x >> 16)) & 0x1f00000000ffff;
    x = (x | (x >> 32)) & 0x1f_ffff;
    x as u32
}

/// Interleaves 21-bit coordinates as `...z1y1x1 z0y0x0`.
pub fn morton_encode(c: [u32; 3]) -> u64 {
    spread_bits(c[0]) | (spread_bits(c[1]) << 1) | (spread_bits(c[2]) << 2)
}

pub fn morton_decode(key: u64) -> [u32; 3] {
    [compact_bits(key), compact_bits(key >> 1), compact_bits(key >> 2)]
}

/// Packs a lattice coordinate (each < 2^21) into one hashable key.
pub fn pack_lattice(c: [u32; 3]) -> u64 {
    (c[0] as u64) | ((c[1] as u64) << 21) | ((c[2] as u64) << 42)
}
