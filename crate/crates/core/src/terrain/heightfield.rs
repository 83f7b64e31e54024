use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::Ground;

/// Regular grid of ground heights. Node `(row, col)` sits at
/// `origin + (col * cell_size, row * cell_size)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows * cols` entries.
    pub heights: Vec<f64>,
}

impl HeightField {
    pub fn new(origin: [f64; 2], cell_size: f64, rows: usize, cols: usize, heights: Vec<f64>) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidDims(format!("cell_size must be > 0, got {cell_size}")));
        }
        if rows == 0 || cols == 0 || heights.len() != rows * cols {
            return Err(Error::InvalidDims(format!(
                "{} heights for a {rows}x{cols} grid",
                heights.len()
            )));
        }
        if let Some(i) = heights.iter().position(|h| !h.is_finite()) {
            return Err(Error::InvalidDims(format!("non-finite height at index {i}")));
        }
        Ok(Self { origin, cell_size, rows, cols, heights })
    }

    pub fn flat(origin: [f64; 2], cell_size: f64, rows: usize, cols: usize) -> Self {
        Self::new(origin, cell_size, rows, cols, vec![0.0; rows * cols]).expect("valid flat field")
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, h: f64) {
        self.heights[row * self.cols + col] = h;
    }

    pub fn node_position(&self, row: usize, col: usize) -> [f64; 2] {
        [self.origin[0] + col as f64 * self.cell_size, self.origin[1] + row as f64 * self.cell_size]
    }

    /// World extent covered by the nodes, `[width, height]`.
    pub fn extent(&self) -> [f64; 2] {
        [(self.cols - 1) as f64 * self.cell_size, (self.rows - 1) as f64 * self.cell_size]
    }

    /// Bilinear interpolation; points outside the grid clamp to the border.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.origin[0]) / self.cell_size).clamp(0.0, (self.cols - 1) as f64);
        let fy = ((y - self.origin[1]) / self.cell_size).clamp(0.0, (self.rows - 1) as f64);
        let c0 = (fx.floor() as usize).min(self.cols.saturating_sub(2));
        let r0 = (fy.floor() as usize).min(self.rows.saturating_sub(2));
        let c1 = (c0 + 1).min(self.cols - 1);
        let r1 = (r0 + 1).min(self.rows - 1);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let h00 = self.get(r0, c0);
        let h01 = self.get(r0, c1);
        let h10 = self.get(r1, c0);
        let h11 = self.get(r1, c1);
        let bottom = h00 + (h01 - h00) * tx;
        let top = h10 + (h11 - h10) * tx;
        bottom + (top - bottom) * ty
    }

    /// Largest height difference between axis-neighbouring nodes per meter.
    pub fn max_slope(&self) -> f64 {
        let mut m = 0.0f64;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let h = self.get(r, c);
                if c + 1 < self.cols {
                    m = m.max((self.get(r, c + 1) - h).abs());
                }
                if r + 1 < self.rows {
                    m = m.max((self.get(r + 1, c) - h).abs());
                }
            }
        }
        m / self.cell_size
    }
}

impl Ground for HeightField {
    fn height(&self, x: f64, y: f64) -> f64 {
        self.height_at(x, y)
    }
}

/// Body-frame sample points of a square local map, as world coordinates.
/// Row `i` runs from the back of the map to the front, column `j` from left
/// to right, with spacing `extent / (resolution - 1)`.
pub fn local_sample_points(pose: [f64; 3], extent: f64, resolution: usize) -> Vec<[f64; 2]> {
    let [x, y, heading] = pose;
    let (s, c) = heading.sin_cos();
    let spacing = if resolution > 1 { extent / (resolution - 1) as f64 } else { 0.0 };
    let half = 0.5 * extent;
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        let fwd = -half + i as f64 * spacing;
        for j in 0..resolution {
            let left = half - j as f64 * spacing;
            out.push([x + fwd * c - left * s, y + fwd * s + left * c]);
        }
    }
    out
}

/// Body-centric elevation crop, relative to the ground height under the
/// vehicle. Row-major `resolution x resolution`.
pub fn local_elevation_map(field: &HeightField, pose: [f64; 3], extent: f64, resolution: usize) -> Vec<f64> {
    let base = field.height_at(pose[0], pose[1]);
    local_sample_points(pose, extent, resolution)
        .into_iter()
        .map(|[px, py]| field.height_at(px, py) - base)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assert_close;
    use proptest::prelude::*;

    fn asymmetric() -> HeightField {
        let rows = 33;
        let cols = 33;
        let mut f = HeightField::flat([-2.0, -2.0], 0.125, rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let [x, y] = f.node_position(r, c);
                f.set(r, c, 0.05 * x + 0.02 * y * y + if x > 0.5 && y > 0.0 { 0.2 } else { 0.0 });
            }
        }
        f
    }

    #[test]
    fn flat_is_zero_everywhere() {
        let f = HeightField::flat([0.0, 0.0], 0.5, 4, 4);
        for (x, y) in [(0.0, 0.0), (0.3, 1.1), (-5.0, 9.0)] {
            assert_eq!(f.height_at(x, y), 0.0);
        }
    }

    #[test]
    fn nodes_are_exact() {
        let f = asymmetric();
        for (r, c) in [(0, 0), (3, 7), (32, 32), (20, 11)] {
            let [x, y] = f.node_position(r, c);
            assert_eq!(f.height_at(x, y), f.get(r, c));
        }
    }

    #[test]
    fn two_by_two_center() {
        let f = HeightField::new([0.0, 0.0], 1.0, 2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_close!(f.height_at(0.5, 0.5), 0.5, 1e-15);
    }

    #[test]
    fn out_of_bounds_clamps() {
        let f = HeightField::new([0.0, 0.0], 1.0, 2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.height_at(-3.0, -3.0), 0.0);
        assert_eq!(f.height_at(10.0, 10.0), 3.0);
        assert_eq!(f.height_at(10.0, -1.0), 1.0);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(HeightField::new([0.0, 0.0], 0.0, 2, 2, vec![0.0; 4]).is_err());
        assert!(HeightField::new([0.0, 0.0], 1.0, 2, 2, vec![0.0; 3]).is_err());
        assert!(HeightField::new([0.0, 0.0], 1.0, 1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn local_map_flat_is_zero() {
        let f = HeightField::flat([-5.0, -5.0], 0.1, 101, 101);
        let m = local_elevation_map(&f, [1.0, -2.0, 0.7], 2.5, 25);
        assert_eq!(m.len(), 625);
        assert!(m.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn local_map_spacing() {
        let pts = local_sample_points([0.0, 0.0, 0.0], 2.5, 25);
        let spacing = pts[25][0] - pts[0][0];
        assert_close!(spacing, 2.5 / 24.0, 1e-12);
        assert_close!(spacing, 0.104, 5e-4);
    }

    #[test]
    fn local_map_rotated_matches_direct_queries() {
        let f = asymmetric();
        let pose = [0.3, -0.2, std::f64::consts::FRAC_PI_2];
        let m = local_elevation_map(&f, pose, 2.5, 25);
        // Oracle: with heading +90 deg, body forward is world +y and body left
        // is world -x.
        let spacing = 2.5 / 24.0;
        let base = f.height_at(0.3, -0.2);
        for i in 0..25 {
            for j in 0..25 {
                let fwd = -1.25 + i as f64 * spacing;
                let left = 1.25 - j as f64 * spacing;
                let expected = f.height_at(0.3 - left, -0.2 + fwd) - base;
                assert_close!(m[i * 25 + j], expected, 1e-12);
            }
        }
        let unrotated = local_elevation_map(&f, [0.3, -0.2, 0.0], 2.5, 25);
        assert_ne!(m, unrotated);
    }

    proptest! {
        #[test]
        fn height_is_lipschitz(x in -2.5f64..2.5, y in -2.5f64..2.5, dx in -0.01f64..0.01, dy in -0.01f64..0.01) {
            let f = asymmetric();
            let eps = dx.hypot(dy);
            let bound = f.max_slope() * eps * 2f64.sqrt() + 1e-12;
            prop_assert!((f.height_at(x + dx, y + dy) - f.height_at(x, y)).abs() <= bound);
        }
    }
}
