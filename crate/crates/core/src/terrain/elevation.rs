use serde::{Deserialize, Serialize};

use super::HeightField;
use crate::error::{Error, Result};
use crate::rng::EnvRng;

/// Rectangular block of constant height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSpec {
    pub center: [f64; 2],
    pub length: f64,
    pub thickness: f64,
    pub height: f64,
    /// Direction of the long side, radians from +x.
    #[serde(default)]
    pub angle: f64,
}

/// Linear incline of `slope` from `start` along `heading` up to `top_height`,
/// then a flat top of `top_length`, then either a matching decline
/// (`down_slope`) or a drop-off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSpec {
    pub start: [f64; 2],
    #[serde(default)]
    pub heading: f64,
    pub slope: f64,
    pub width: f64,
    pub top_height: f64,
    #[serde(default)]
    pub top_length: f64,
    #[serde(default)]
    pub down_slope: Option<f64>,
}

impl RampSpec {
    pub fn run(&self) -> f64 {
        self.top_height / self.slope
    }

    fn footprint_length(&self) -> f64 {
        self.run() + self.top_length + self.down_slope.map_or(0.0, |s| self.top_height / s)
    }

    fn height_at_local(&self, along: f64, across: f64) -> Option<f64> {
        if across.abs() > self.width / 2.0 || along < 0.0 {
            return None;
        }
        let run = self.run();
        if along <= run {
            return Some(self.slope * along);
        }
        if along <= run + self.top_length {
            return Some(self.top_height);
        }
        let down = self.down_slope?;
        let h = self.top_height - down * (along - run - self.top_length);
        (h >= 0.0).then_some(h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElevationSceneSpec {
    /// Arena size `[x, y]`, meters; the arena spans `[0, x] x [0, y]`.
    pub arena: [f64; 2],
    pub cell_size: f64,
    #[serde(default)]
    pub walls: Vec<WallSpec>,
    #[serde(default)]
    pub ramps: Vec<RampSpec>,
    /// Slopes available to randomly placed augmentation ramps.
    #[serde(default)]
    pub slope_gradations: Vec<f64>,
    /// Number of augmentation ramps placed from the seed.
    #[serde(default)]
    pub random_ramps: usize,
    /// Top height range of augmentation ramps.
    #[serde(default = "default_random_ramp_height")]
    pub random_ramp_height: [f64; 2],
    /// Walls must be taller than this.
    #[serde(default = "default_max_climbable")]
    pub max_climbable_height: f64,
}

fn default_random_ramp_height() -> [f64; 2] {
    [0.08, 0.2]
}

fn default_max_climbable() -> f64 {
    0.15
}

impl ElevationSceneSpec {
    pub fn empty(arena: [f64; 2], cell_size: f64) -> Self {
        Self {
            arena,
            cell_size,
            walls: vec![],
            ramps: vec![],
            slope_gradations: vec![],
            random_ramps: 0,
            random_ramp_height: default_random_ramp_height(),
            max_climbable_height: default_max_climbable(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScene(m));
        if !(self.arena[0] > 0.0 && self.arena[1] > 0.0 && self.cell_size > 0.0) {
            return bad("arena extent and cell_size must be positive".into());
        }
        let inside = |p: [f64; 2]| p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= self.arena[0] && p[1] <= self.arena[1];
        for (i, w) in self.walls.iter().enumerate() {
            if !(w.length > 0.0 && w.thickness > 0.0) {
                return bad(format!("wall {i} has non-positive size"));
            }
            if w.height <= self.max_climbable_height {
                return bad(format!(
                    "wall {i} height {} is climbable (max climbable {})",
                    w.height, self.max_climbable_height
                ));
            }
            if !wall_corners(w).into_iter().all(inside) {
                return bad(format!("wall {i} extends outside the arena"));
            }
        }
        for (i, r) in self.ramps.iter().enumerate() {
            if !(r.slope > 0.0 && r.width > 0.0 && r.top_height > 0.0 && r.top_length >= 0.0) {
                return bad(format!("ramp {i} needs positive slope, width and top height"));
            }
            if r.down_slope.is_some_and(|s| s <= 0.0) {
                return bad(format!("ramp {i} down_slope must be positive"));
            }
            if !ramp_corners(r).into_iter().all(inside) {
                return bad(format!("ramp {i} extends outside the arena"));
            }
        }
        if self.random_ramps > 0 && self.slope_gradations.iter().any(|&s| s <= 0.0) {
            return bad("slope gradations must be positive".into());
        }
        if self.random_ramps > 0 && self.slope_gradations.is_empty() {
            return bad("random ramps need at least one slope gradation".into());
        }
        if self.random_ramp_height[0] > self.random_ramp_height[1] || self.random_ramp_height[0] <= 0.0 {
            return bad("random_ramp_height must be a positive [lo, hi] range".into());
        }
        Ok(())
    }
}

fn rotate(v: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [v[0] * c - v[1] * s, v[0] * s + v[1] * c]
}

fn wall_corners(w: &WallSpec) -> [[f64; 2]; 4] {
    let (hl, ht) = (w.length / 2.0, w.thickness / 2.0);
    [[-hl, -ht], [hl, -ht], [hl, ht], [-hl, ht]].map(|p| {
        let q = rotate(p, w.angle);
        [w.center[0] + q[0], w.center[1] + q[1]]
    })
}

fn ramp_corners(r: &RampSpec) -> [[f64; 2]; 4] {
    let (len, hw) = (r.footprint_length(), r.width / 2.0);
    [[0.0, -hw], [len, -hw], [len, hw], [0.0, hw]].map(|p| {
        let q = rotate(p, r.heading);
        [r.start[0] + q[0], r.start[1] + q[1]]
    })
}

/// Heights contributed by one feature, with the nodes they cover.
fn rasterize_feature(field: &HeightField, height_at: impl Fn([f64; 2]) -> Option<f64>) -> Vec<(usize, usize, f64)> {
    let mut out = vec![];
    for r in 0..field.rows {
        for c in 0..field.cols {
            if let Some(h) = height_at(field.node_position(r, c)) {
                out.push((r, c, h));
            }
        }
    }
    out
}

fn wall_height(w: &WallSpec, p: [f64; 2]) -> Option<f64> {
    let local = rotate([p[0] - w.center[0], p[1] - w.center[1]], -w.angle);
    (local[0].abs() <= w.length / 2.0 && local[1].abs() <= w.thickness / 2.0).then_some(w.height)
}

fn ramp_height(r: &RampSpec, p: [f64; 2]) -> Option<f64> {
    let local = rotate([p[0] - r.start[0], p[1] - r.start[1]], -r.heading);
    r.height_at_local(local[0], local[1])
}

/// Writes feature heights into the field. Nodes already covered by another
/// feature must agree on the height.
fn apply(field: &mut HeightField, covered: &mut [bool], cells: &[(usize, usize, f64)]) -> Result<()> {
    for &(r, c, h) in cells {
        let i = r * field.cols + c;
        if covered[i] && (field.heights[i] - h).abs() > 1e-12 {
            return Err(Error::Overlap { row: r, col: c });
        }
    }
    for &(r, c, h) in cells {
        let i = r * field.cols + c;
        field.heights[i] = h;
        covered[i] = true;
    }
    Ok(())
}

/// Rasterizes walls and ramps onto a flat arena. Augmentation ramps are then
/// placed from `seed`, redrawn when they would collide with existing
/// features.
pub fn build_elevation_scene(spec: &ElevationSceneSpec, seed: u64) -> Result<HeightField> {
    spec.validate()?;
    let cols = (spec.arena[0] / spec.cell_size).round() as usize + 1;
    let rows = (spec.arena[1] / spec.cell_size).round() as usize + 1;
    let mut field = HeightField::flat([0.0, 0.0], spec.cell_size, rows, cols);
    let mut covered = vec![false; rows * cols];

    for w in &spec.walls {
        let cells = rasterize_feature(&field, |p| wall_height(w, p));
        apply(&mut field, &mut covered, &cells)?;
    }
    for r in &spec.ramps {
        let cells = rasterize_feature(&field, |p| ramp_height(r, p));
        apply(&mut field, &mut covered, &cells)?;
    }

    let mut rng = EnvRng::from_seed(seed);
    for _ in 0..spec.random_ramps {
        for _attempt in 0..50 {
            let slope = spec.slope_gradations[rng.index(spec.slope_gradations.len())];
            let top_height = rng.uniform(spec.random_ramp_height[0], spec.random_ramp_height[1]);
            let ramp = RampSpec {
                start: [rng.uniform(0.0, spec.arena[0]), rng.uniform(0.0, spec.arena[1])],
                heading: rng.uniform(-std::f64::consts::PI, std::f64::consts::PI),
                slope,
                width: rng.uniform(0.4, 0.8),
                top_height,
                top_length: rng.uniform(0.0, 0.5),
                down_slope: Some(slope),
            };
            let inside = ramp_corners(&ramp)
                .into_iter()
                .all(|p| p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= spec.arena[0] && p[1] <= spec.arena[1]);
            if !inside {
                continue;
            }
            let cells = rasterize_feature(&field, |p| ramp_height(&ramp, p));
            if cells.iter().any(|&(r, c, _)| covered[r * cols + c]) {
                continue;
            }
            apply(&mut field, &mut covered, &cells)?;
            break;
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assert_close;

    fn ramp(start: [f64; 2], slope: f64, top: f64) -> RampSpec {
        RampSpec { start, heading: 0.0, slope, width: 0.8, top_height: top, top_length: 0.5, down_slope: None }
    }

    #[test]
    fn empty_spec_is_flat() {
        let f = build_elevation_scene(&ElevationSceneSpec::empty([4.0, 3.0], 0.05), 0).unwrap();
        assert!(f.heights.iter().all(|&h| h == 0.0));
        assert_eq!((f.rows, f.cols), (61, 81));
    }

    #[test]
    fn ramp_halfway_up() {
        let mut spec = ElevationSceneSpec::empty([4.0, 3.0], 0.05);
        spec.ramps.push(ramp([1.0, 1.5], 0.25, 0.25));
        let f = build_elevation_scene(&spec, 0).unwrap();
        assert_close!(spec.ramps[0].run(), 1.0, 1e-12);
        assert_close!(f.height_at(1.5, 1.5), 0.125, 1e-9);
        assert_close!(f.height_at(2.2, 1.5), 0.25, 1e-9);
    }

    #[test]
    fn wall_footprint() {
        let mut spec = ElevationSceneSpec::empty([4.0, 3.0], 0.05);
        spec.walls.push(WallSpec { center: [2.0, 1.0], length: 1.0, thickness: 0.2, height: 0.3, angle: 0.0 });
        let f = build_elevation_scene(&spec, 0).unwrap();
        assert_close!(f.height_at(2.0, 1.0), 0.3, 1e-12);
        assert_close!(f.height_at(2.4, 1.05), 0.3, 1e-12);
        assert_eq!(f.height_at(2.0, 2.0), 0.0);
    }

    #[test]
    fn conflicting_features_overlap() {
        let mut spec = ElevationSceneSpec::empty([4.0, 3.0], 0.05);
        spec.walls.push(WallSpec { center: [1.5, 1.5], length: 1.0, thickness: 0.2, height: 0.3, angle: 0.0 });
        spec.ramps.push(ramp([1.0, 1.5], 0.25, 0.25));
        assert!(matches!(build_elevation_scene(&spec, 0), Err(Error::Overlap { .. })));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = ElevationSceneSpec::empty([4.0, 3.0], 0.05);
        spec.walls.push(WallSpec { center: [2.0, 1.0], length: 1.0, thickness: 0.2, height: 0.1, angle: 0.0 });
        assert!(matches!(build_elevation_scene(&spec, 0), Err(Error::InvalidScene(_))));

        let mut spec = ElevationSceneSpec::empty([4.0, 3.0], 0.05);
        spec.ramps.push(ramp([3.5, 1.5], 0.25, 0.25));
        assert!(matches!(build_elevation_scene(&spec, 0), Err(Error::InvalidScene(_))));

        let mut spec = ElevationSceneSpec::empty([4.0, 3.0], 0.05);
        spec.ramps.push(ramp([1.0, 1.5], 0.0, 0.25));
        assert!(spec.validate().is_err());
    }

    #[test]
    fn random_ramps_are_seeded() {
        let mut spec = ElevationSceneSpec::empty([6.0, 4.0], 0.05);
        spec.slope_gradations = vec![0.15, 0.25, 0.35];
        spec.random_ramps = 3;
        let a = build_elevation_scene(&spec, 11).unwrap();
        let b = build_elevation_scene(&spec, 11).unwrap();
        let c = build_elevation_scene(&spec, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.heights.iter().any(|&h| h > 0.0));
    }
}
