use serde::{Deserialize, Serialize};

use super::MAX_TERMS;
use crate::error::{Error, Result};
use crate::eval::LoopSpec;
use crate::rng::EnvRng;
use crate::sensors::CameraModel;
use crate::terrain::{TraversabilityMap, DEFAULT_TILE_SIZE};
use crate::vehicle::{Action, VehicleState};

/// Non-image observation channels after the image.
pub(crate) const VISUAL_STATE_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisualTask {
    /// Map size in tiles, `[rows, cols]`.
    pub env_dims: [usize; 2],
    /// Sub-environment cell size in tiles, `[rows, cols]`.
    pub cell_dims: [usize; 2],
    pub walkers: usize,
    pub tile_size: f64,
    pub camera: CameraModel,
    pub r_white: f64,
    pub r_black: f64,
    pub terminate_on_black: bool,
    /// Replaces generated maps with loop courses (evaluation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub course: Option<LoopCourse>,
    /// Fixed brightness/contrast shift applied after augmentation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render_shift: Option<RenderShift>,
}

impl Default for VisualTask {
    fn default() -> Self {
        Self {
            env_dims: [30, 30],
            cell_dims: [10, 10],
            walkers: 2,
            tile_size: DEFAULT_TILE_SIZE,
            camera: CameraModel::default(),
            r_white: 0.1,
            r_black: 0.4,
            terminate_on_black: false,
            course: None,
            render_shift: None,
        }
    }
}

impl VisualTask {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("visual: {m}")));
        let [h, w] = self.env_dims;
        let [ch, cw] = self.cell_dims;
        if h == 0 || w == 0 || ch == 0 || cw == 0 || h % ch != 0 || w % cw != 0 {
            return bad(format!("cell_dims {ch}x{cw} must be positive and divide env_dims {h}x{w}"));
        }
        if self.walkers == 0 {
            return bad("walkers must be >= 1 so every map has a white tile".into());
        }
        if !(self.tile_size > 0.0 && self.tile_size.is_finite()) {
            return bad("tile_size must be > 0".into());
        }
        if let Err(e) = self.camera.validate() {
            return bad(format!("camera: {e}"));
        }
        if !(self.r_white.is_finite() && self.r_black.is_finite()) {
            return bad("r_white and r_black must be finite".into());
        }
        if let Some(c) = &self.course {
            c.validate()?;
        }
        if let Some(s) = &self.render_shift {
            if !(s.brightness.is_finite() && s.contrast.is_finite() && s.contrast >= 0.0) {
                return bad("render_shift needs finite brightness and contrast >= 0".into());
            }
        }
        Ok(())
    }

    pub fn observation_dim(&self) -> usize {
        self.camera.rows * self.camera.cols + VISUAL_STATE_DIM
    }
}

/// Deterministic photometric shift, in the same order as the augmentation:
/// brightness offset, then contrast about 0.5, then clamping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderShift {
    pub brightness: f64,
    pub contrast: f64,
}

impl RenderShift {
    pub fn apply(&self, img: &mut [f64]) {
        for p in img {
            *p = (((*p + self.brightness) - 0.5) * self.contrast + 0.5).clamp(0.0, 1.0);
        }
    }
}

/// Rectangular ring of white tiles on black, with size drawn per episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopCourse {
    /// Outer ring height range in tiles (inclusive).
    pub rows: [usize; 2],
    /// Outer ring width range in tiles (inclusive).
    pub cols: [usize; 2],
    /// Ring width in tiles.
    pub width: usize,
    /// Black border around the ring in tiles.
    pub margin: usize,
    /// Distance within which a checkpoint counts as visited, m.
    pub checkpoint_radius: f64,
}

impl Default for LoopCourse {
    fn default() -> Self {
        Self { rows: [6, 8], cols: [8, 11], width: 2, margin: 3, checkpoint_radius: 0.6 }
    }
}

impl LoopCourse {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("visual.course: {m}")));
        if self.width == 0 || self.rows[0] > self.rows[1] || self.cols[0] > self.cols[1] {
            return bad("needs width >= 1 and ordered size ranges");
        }
        if self.rows[0] < 2 * self.width + 1 || self.cols[0] < 2 * self.width + 1 {
            return bad("ring must enclose at least one black tile");
        }
        if !(self.checkpoint_radius > 0.0) {
            return bad("checkpoint_radius must be > 0");
        }
        Ok(())
    }
}

/// Builds one loop course. Returns the map, the lap checkpoints (quarter
/// arc-length points of the ring centerline, ending at the start) and the
/// start pose on the middle of the lower side, facing counter-clockwise.
pub fn loop_course(course: &LoopCourse, tile_size: f64, rng: &mut EnvRng) -> (TraversabilityMap, LoopSpec, [f64; 3]) {
    let n_rows = course.rows[0] + rng.index(course.rows[1] - course.rows[0] + 1);
    let n_cols = course.cols[0] + rng.index(course.cols[1] - course.cols[0] + 1);
    let (m, w) = (course.margin, course.width);
    let mut map = TraversabilityMap::filled(n_rows + 2 * m, n_cols + 2 * m, tile_size, 0);
    for r in 0..n_rows {
        for c in 0..n_cols {
            if r < w || c < w || r >= n_rows - w || c >= n_cols - w {
                map.set(r + m, c + m, 1);
            }
        }
    }
    // Ring centerline rectangle in world coordinates.
    let half = w as f64 / 2.0;
    let x0 = (m as f64 + half) * tile_size;
    let x1 = (m as f64 + n_cols as f64 - half) * tile_size;
    let y0 = (m as f64 + half) * tile_size;
    let y1 = (m as f64 + n_rows as f64 - half) * tile_size;
    let corners = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
    let start = [(x0 + x1) / 2.0, y0];
    let perimeter = 2.0 * ((x1 - x0) + (y1 - y0));

    // Walk the rectangle counter-clockwise from the start point.
    let point_at = |s: f64| -> [f64; 2] {
        let path = [start, corners[1], corners[2], corners[3], corners[0], start];
        let mut rest = s;
        for seg in path.windows(2) {
            let len = (seg[1][0] - seg[0][0]).hypot(seg[1][1] - seg[0][1]);
            if rest <= len {
                let t = if len > 0.0 { rest / len } else { 0.0 };
                return [seg[0][0] + t * (seg[1][0] - seg[0][0]), seg[0][1] + t * (seg[1][1] - seg[0][1])];
            }
            rest -= len;
        }
        start
    };
    let checkpoints = (1..=4).map(|k| point_at(perimeter * k as f64 / 4.0)).collect();
    let spec = LoopSpec { checkpoints, radius: course.checkpoint_radius, bidirectional: true };
    (map, spec, [start[0], start[1], 0.0])
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VisualTerms {
    pub velocity: f64,
    pub traversability: f64,
    pub out_of_bounds: f64,
}

impl VisualTerms {
    pub fn to_array(&self) -> [f64; MAX_TERMS] {
        [self.velocity, self.traversability, self.out_of_bounds, 0.0, 0.0, 0.0, 0.0]
    }
}

/// Off-map positions count as black and out of bounds.
pub fn visual_reward(state: &VehicleState, map: &TraversabilityMap, r_white: f64, r_black: f64) -> VisualTerms {
    let under = map.traversable_at(state.position[0], state.position[1]);
    VisualTerms {
        velocity: state.speed(),
        traversability: if under == Some(true) { r_white } else { -r_black },
        out_of_bounds: if under.is_none() { -1.0 } else { 0.0 },
    }
}

/// `[image pixels (row-major), u/2, r/3, previous throttle, previous steer]`.
pub fn visual_observation(image: &[f64], state: &VehicleState, prev_action: Action) -> Vec<f64> {
    let mut obs = Vec::with_capacity(image.len() + VISUAL_STATE_DIM);
    obs.extend_from_slice(image);
    obs.extend_from_slice(&[
        state.body_velocity[0] / 2.0,
        state.yaw_rate / 3.0,
        prev_action.throttle,
        prev_action.steer,
    ]);
    obs
}
