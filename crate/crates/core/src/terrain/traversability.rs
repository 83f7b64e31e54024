use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::EnvRng;

/// Binary tile grid: 1 is traversable (white), 0 is not (black). Tile
/// `(row, col)` covers `origin + [col, col+1) x [row, row+1)` tiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraversabilityMap {
    pub rows: usize,
    pub cols: usize,
    pub tile_size: f64,
    pub origin: [f64; 2],
    pub cells: Vec<u8>,
}

pub const DEFAULT_TILE_SIZE: f64 = 0.6;

impl TraversabilityMap {
    pub fn new(rows: usize, cols: usize, tile_size: f64, origin: [f64; 2], cells: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(Error::InvalidDims(format!("{} cells for a {rows}x{cols} map", cells.len())));
        }
        if !(tile_size.is_finite() && tile_size > 0.0) {
            return Err(Error::InvalidDims(format!("tile_size must be > 0, got {tile_size}")));
        }
        if let Some(i) = cells.iter().position(|&v| v > 1) {
            return Err(Error::InvalidDims(format!("non-binary value {} at index {i}", cells[i])));
        }
        Ok(Self { rows, cols, tile_size, origin, cells })
    }

    pub fn filled(rows: usize, cols: usize, tile_size: f64, value: u8) -> Self {
        Self::new(rows, cols, tile_size, [0.0, 0.0], vec![value.min(1); rows * cols]).expect("valid dims")
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.cells[row * self.cols + col] = value.min(1);
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.tile_size
    }

    pub fn height(&self) -> f64 {
        self.rows as f64 * self.tile_size
    }

    /// Tile containing a world point, if inside the map.
    pub fn tile_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.origin[0]) / self.tile_size;
        let fy = (y - self.origin[1]) / self.tile_size;
        if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let (c, r) = (fx as usize, fy as usize);
        (r < self.rows && c < self.cols).then_some((r, c))
    }

    /// `Some(true)` on white, `Some(false)` on black, `None` off the map.
    pub fn traversable_at(&self, x: f64, y: f64) -> Option<bool> {
        self.tile_at(x, y).map(|(r, c)| self.get(r, c) == 1)
    }

    pub fn tile_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin[0] + (col as f64 + 0.5) * self.tile_size,
            self.origin[1] + (row as f64 + 0.5) * self.tile_size,
        ]
    }

    pub fn traversable_fraction(&self) -> f64 {
        self.cells.iter().map(|&v| v as usize).sum::<usize>() as f64 / self.cells.len() as f64
    }
}

/// Start points and carved paths recorded during generation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GenerationTrace {
    pub start_points: Vec<(usize, usize)>,
    /// Each path lists tiles from its start point to its endpoint.
    pub paths: Vec<Vec<(usize, usize)>>,
}

pub fn generate_traversability(
    env_dims: (usize, usize),
    cell_dims: (usize, usize),
    n_walkers: usize,
    seed: u64,
) -> Result<TraversabilityMap> {
    let mut rng = EnvRng::from_seed(seed);
    generate_traversability_with(&mut rng, env_dims, cell_dims, n_walkers, DEFAULT_TILE_SIZE).map(|(m, _)| m)
}

/// Sub-environment generation: one uniformly placed start point per cell,
/// then for each start point `n_walkers` random endpoints drawn until they
/// land on a tile that is still black, each joined to its start point by a
/// random staircase path carved white.
pub fn generate_traversability_with(
    rng: &mut EnvRng,
    env_dims: (usize, usize),
    cell_dims: (usize, usize),
    n_walkers: usize,
    tile_size: f64,
) -> Result<(TraversabilityMap, GenerationTrace)> {
    let (h_env, w_env) = env_dims;
    let (h_cell, w_cell) = cell_dims;
    if h_env == 0 || w_env == 0 || h_cell == 0 || w_cell == 0 {
        return Err(Error::InvalidDims("dimensions must be positive".into()));
    }
    if h_env % h_cell != 0 || w_env % w_cell != 0 {
        return Err(Error::InvalidDims(format!(
            "cell dims {h_cell}x{w_cell} do not divide env dims {h_env}x{w_env}"
        )));
    }
    let mut map = TraversabilityMap::new(h_env, w_env, tile_size, [0.0, 0.0], vec![0; h_env * w_env])?;
    let mut trace = GenerationTrace::default();

    for r in 0..h_env / h_cell {
        for c in 0..w_env / w_cell {
            let p = (rng.index(h_cell) + r * h_cell, rng.index(w_cell) + c * w_cell);
            trace.start_points.push(p);
        }
    }
    for &(r, c) in &trace.start_points {
        map.set(r, c, 1);
    }

    for &start in &trace.start_points.clone() {
        for _ in 0..n_walkers {
            // Endpoints are redrawn while they land on white. Once the map is
            // fully white there is nowhere left to go.
            if map.cells.iter().all(|&v| v == 1) {
                break;
            }
            let end = loop {
                let q = (rng.index(h_env), rng.index(w_env));
                if map.get(q.0, q.1) == 0 {
                    break q;
                }
            };
            let path = carve_random_path(&mut map, rng, start, end);
            trace.paths.push(path);
        }
    }
    Ok((map, trace))
}

/// Axis-aligned random staircase walk from `start` to `end`, each move
/// randomly chosen among the axes that still need closing. Carves every
/// visited tile and returns the visited sequence.
fn carve_random_path(
    map: &mut TraversabilityMap,
    rng: &mut EnvRng,
    start: (usize, usize),
    end: (usize, usize),
) -> Vec<(usize, usize)> {
    let (mut r, mut c) = start;
    let mut path = vec![(r, c)];
    map.set(r, c, 1);
    while (r, c) != end {
        let move_row = if r == end.0 {
            false
        } else if c == end.1 {
            true
        } else {
            rng.bernoulli(0.5)
        };
        if move_row {
            r = if end.0 > r { r + 1 } else { r - 1 };
        } else {
            c = if end.1 > c { c + 1 } else { c - 1 };
        }
        map.set(r, c, 1);
        path.push((r, c));
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_start_points_for_three_by_three_cells() {
        let mut rng = EnvRng::from_seed(1);
        let (_, trace) = generate_traversability_with(&mut rng, (30, 30), (10, 10), 2, 0.6).unwrap();
        assert_eq!(trace.start_points.len(), 9);
        for (i, &(r, c)) in trace.start_points.iter().enumerate() {
            assert_eq!((r / 10, c / 10), (i / 3, i % 3));
        }
    }

    #[test]
    fn zero_walkers_marks_only_start_points() {
        let mut rng = EnvRng::from_seed(5);
        let (map, trace) = generate_traversability_with(&mut rng, (30, 30), (10, 10), 0, 0.6).unwrap();
        assert!(trace.paths.is_empty());
        let white: Vec<_> = (0..30).flat_map(|r| (0..30).map(move |c| (r, c))).filter(|&(r, c)| map.get(r, c) == 1).collect();
        let mut starts = trace.start_points.clone();
        starts.sort();
        assert_eq!(white, starts);
    }

    #[test]
    fn indivisible_dims_rejected() {
        assert!(matches!(generate_traversability((30, 31), (10, 10), 1, 0), Err(Error::InvalidDims(_))));
        assert!(matches!(generate_traversability((30, 30), (0, 10), 1, 0), Err(Error::InvalidDims(_))));
    }

    #[test]
    fn paths_are_four_connected_and_carved() {
        for seed in 0..20 {
            let mut rng = EnvRng::from_seed(seed);
            let (map, trace) = generate_traversability_with(&mut rng, (30, 30), (10, 10), 3, 0.6).unwrap();
            let n_starts = trace.start_points.len();
            assert!(trace.paths.len() <= n_starts * 3);
            for path in &trace.paths {
                assert!(trace.start_points.contains(&path[0]));
                for w in path.windows(2) {
                    let d = w[0].0.abs_diff(w[1].0) + w[0].1.abs_diff(w[1].1);
                    assert_eq!(d, 1);
                }
                assert!(path.iter().all(|&(r, c)| map.get(r, c) == 1));
            }
        }
    }

    #[test]
    fn saturated_map_terminates() {
        let mut rng = EnvRng::from_seed(2);
        let (map, _) = generate_traversability_with(&mut rng, (4, 4), (2, 2), 50, 0.6).unwrap();
        assert_eq!(map.traversable_fraction(), 1.0);
    }

    #[test]
    fn world_lookup() {
        let mut m = TraversabilityMap::filled(3, 4, 0.5, 0);
        m.set(1, 2, 1);
        assert_eq!(m.traversable_at(1.25, 0.75), Some(true));
        assert_eq!(m.traversable_at(0.25, 0.25), Some(false));
        assert_eq!(m.traversable_at(-0.01, 0.25), None);
        assert_eq!(m.traversable_at(2.01, 0.25), None);
        assert_eq!(m.tile_center(1, 2), [1.25, 0.75]);
    }
}
