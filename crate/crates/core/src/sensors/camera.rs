use serde::{Deserialize, Serialize};

use crate::terrain::TraversabilityMap;

/// Intensity for rays that miss the map or point above the horizon.
pub const BACKGROUND: f64 = 0.0;

/// Pinhole camera rigidly mounted on the body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    /// Mount offset from the body origin: forward, left, up (meters).
    pub mount: [f64; 3],
    /// Optical-axis pitch; negative looks down.
    pub pitch: f64,
    pub horizontal_fov: f64,
    pub rows: usize,
    pub cols: usize,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self { mount: [0.0, 0.0, 0.15], pitch: -25f64.to_radians(), horizontal_fov: 90f64.to_radians(), rows: 40, cols: 60 }
    }
}

impl CameraModel {
    /// Vertical field of view implied by square pixels.
    pub fn vertical_fov(&self) -> f64 {
        2.0 * ((self.horizontal_fov / 2.0).tan() * self.rows as f64 / self.cols as f64).atan()
    }

    pub fn validate(&self) -> Result<(), String> {
        let fov_ok = |f: f64| f > 0.0 && f < std::f64::consts::PI;
        if !fov_ok(self.horizontal_fov) || !fov_ok(self.vertical_fov()) {
            return Err("camera field of view must lie in (0, pi)".into());
        }
        if self.rows == 0 || self.cols == 0 {
            return Err("camera resolution must be positive".into());
        }
        if self.mount[2] <= 0.0 {
            return Err("camera must be mounted above the ground".into());
        }
        Ok(())
    }

    /// Body-frame direction (forward, left, up) of every pixel ray, row-major
    /// from the top-left pixel.
    fn body_rays(&self) -> Vec<[f64; 3]> {
        let tx = (self.horizontal_fov / 2.0).tan();
        let ty = (self.vertical_fov() / 2.0).tan();
        let (sp, cp) = self.pitch.sin_cos();
        let mut rays = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            let up = (1.0 - 2.0 * (i as f64 + 0.5) / self.rows as f64) * ty;
            for j in 0..self.cols {
                let right = (2.0 * (j as f64 + 0.5) / self.cols as f64 - 1.0) * tx;
                rays.push([cp - up * sp, -right, sp + up * cp]);
            }
        }
        rays
    }
}

/// Camera with its per-pixel rays precomputed.
#[derive(Clone, Debug)]
pub struct Renderer {
    pub model: CameraModel,
    rays: Vec<[f64; 3]>,
}

impl Renderer {
    pub fn new(model: CameraModel) -> Self {
        let rays = model.body_rays();
        Self { model, rays }
    }

    pub fn pixels(&self) -> usize {
        self.rays.len()
    }

    /// Renders into `out` (length `rows * cols`). `pose` is `(x, y, heading)`
    /// on flat ground.
    pub fn render_into(&self, pose: [f64; 3], map: &TraversabilityMap, out: &mut [f64]) {
        let [x, y, heading] = pose;
        let (sh, ch) = heading.sin_cos();
        let [mf, ml, height] = self.model.mount;
        let cam = [x + mf * ch - ml * sh, y + mf * sh + ml * ch];
        for (px, ray) in out.iter_mut().zip(&self.rays) {
            let [f, l, u] = *ray;
            *px = if u >= 0.0 {
                BACKGROUND
            } else {
                let t = height / -u;
                let (dx, dy) = (t * f, t * l);
                let gx = cam[0] + dx * ch - dy * sh;
                let gy = cam[1] + dx * sh + dy * ch;
                match map.traversable_at(gx, gy) {
                    Some(true) => 1.0,
                    _ => BACKGROUND,
                }
            };
        }
    }

    pub fn render(&self, pose: [f64; 3], map: &TraversabilityMap) -> Vec<f64> {
        let mut out = vec![0.0; self.rays.len()];
        self.render_into(pose, map, &mut out);
        out
    }
}

/// Grayscale image of the traversability coloring seen from `pose`: white
/// tiles are 1, black tiles, off-map ground and sky are 0.
pub fn render_grayscale(camera: &CameraModel, pose: [f64; 3], map: &TraversabilityMap) -> Vec<f64> {
    Renderer::new(camera.clone()).render(pose, map)
}
