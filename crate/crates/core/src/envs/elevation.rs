use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::MAX_TERMS;
use crate::error::{Error, Result};
use crate::terrain::{local_elevation_map, ElevationSceneSpec, HeightField, RampSpec, WallSpec};
use crate::vehicle::{Action, VehicleState};

/// Non-map observation channels before the elevation map.
pub(crate) const ELEVATION_STATE_DIM: usize = 10;
const MAP_SCALE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElevationTask {
    pub scene: ElevationSceneSpec,
    pub start: [f64; 2],
    pub start_heading: f64,
    /// Reset noise half-widths: position (m) and heading (rad).
    pub start_noise: [f64; 2],
    pub goal: [f64; 2],
    pub goal_radius: f64,
    /// Terrain above this height counts as an elevation feature, m.
    pub flat_height: f64,
    /// Roll or pitch beyond this ends the episode, rad.
    pub rollover_limit: f64,
    /// Side of the square body-centric elevation map, m.
    pub map_extent: f64,
    /// Samples per side of the elevation map.
    pub map_resolution: usize,
}

impl Default for ElevationTask {
    fn default() -> Self {
        let mut scene = ElevationSceneSpec::empty([6.0, 4.0], 0.05);
        scene.walls = vec![
            WallSpec { center: [3.9, 1.3], length: 1.8, thickness: 0.15, height: 0.3, angle: FRAC_PI_2 },
            WallSpec { center: [2.5, 0.9], length: 1.0, thickness: 0.15, height: 0.3, angle: FRAC_PI_2 },
        ];
        scene.ramps = vec![RampSpec {
            start: [1.6, 2.4],
            heading: 0.0,
            slope: 0.25,
            width: 0.7,
            top_height: 0.15,
            top_length: 0.6,
            down_slope: Some(0.25),
        }];
        scene.slope_gradations = vec![0.15, 0.2, 0.25, 0.3];
        scene.random_ramps = 1;
        Self {
            scene,
            start: [0.5, 2.0],
            start_heading: 0.0,
            start_noise: [0.2, 0.3],
            goal: [5.5, 2.0],
            goal_radius: 0.3,
            flat_height: 0.02,
            rollover_limit: 60f64.to_radians(),
            map_extent: 2.5,
            map_resolution: 11,
        }
    }
}

impl ElevationTask {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(format!("elevation: {m}")));
        let [ax, ay] = self.scene.arena;
        let inside = |p: [f64; 2]| p[0] > 0.0 && p[1] > 0.0 && p[0] < ax && p[1] < ay;
        if !inside(self.start) || !inside(self.goal) {
            return bad("start and goal must lie inside the arena");
        }
        if !(self.start_noise.iter().all(|n| *n >= 0.0 && n.is_finite())) {
            return bad("start_noise must be >= 0");
        }
        if !(self.goal_radius > 0.0 && self.flat_height >= 0.0) {
            return bad("goal_radius must be > 0 and flat_height >= 0");
        }
        if !(self.rollover_limit > 0.0 && self.rollover_limit <= FRAC_PI_2) {
            return bad("rollover_limit must be in (0, pi/2]");
        }
        if !(self.map_extent > 0.0 && self.map_resolution >= 2) {
            return bad("map_extent must be > 0 and map_resolution >= 2");
        }
        Ok(())
    }

    pub fn observation_dim(&self) -> usize {
        ELEVATION_STATE_DIM + self.map_resolution * self.map_resolution + 2
    }

    pub(crate) fn map_scale(&self) -> f64 {
        MAP_SCALE
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElevationTerms {
    pub goal_velocity: f64,
    pub z_position: f64,
    pub falling: f64,
    pub roll_on_elevation: f64,
    pub out_of_bounds: f64,
}

impl ElevationTerms {
    pub fn to_array(&self) -> [f64; MAX_TERMS] {
        [self.goal_velocity, self.z_position, self.falling, self.roll_on_elevation, self.out_of_bounds, 0.0, 0.0]
    }
}

pub(crate) fn outside(field: &HeightField, p: [f64; 2]) -> bool {
    let [w, h] = field.extent();
    let [ox, oy] = field.origin;
    !(p[0] >= ox && p[1] >= oy && p[0] <= ox + w && p[1] <= oy + h)
}

pub fn elevation_reward(state: &VehicleState, task: &ElevationTask, field: &HeightField) -> ElevationTerms {
    let p = [state.position[0], state.position[1]];
    let to_goal = [task.goal[0] - p[0], task.goal[1] - p[1]];
    let dist = to_goal[0].hypot(to_goal[1]);
    let vel = state.world_velocity();
    let goal_velocity = if dist > 0.0 { (vel[0] * to_goal[0] + vel[1] * to_goal[1]) / dist } else { 0.0 };
    let on_feature = field.height_at(p[0], p[1]) > task.flat_height;
    ElevationTerms {
        goal_velocity,
        z_position: state.position[2],
        falling: state.vertical_velocity.min(0.0),
        roll_on_elevation: if on_feature { -state.roll.abs() } else { 0.0 },
        out_of_bounds: if outside(field, p) { -1.0 } else { 0.0 },
    }
}

/// `[goal x/5, goal y/5 (body frame), sin, cos of the goal bearing, roll,
/// pitch, u/2, v/2, r/3, vertical velocity, elevation map / 0.2 (row-major,
/// back to front, left to right), previous throttle, previous steer]`.
pub fn elevation_observation(
    state: &VehicleState,
    prev_action: Action,
    task: &ElevationTask,
    field: &HeightField,
) -> Vec<f64> {
    let [x, y, _] = state.position;
    let (sh, ch) = state.heading.sin_cos();
    let (dx, dy) = (task.goal[0] - x, task.goal[1] - y);
    let gx = dx * ch + dy * sh;
    let gy = -dx * sh + dy * ch;
    let bearing = gy.atan2(gx);
    let mut obs = Vec::with_capacity(task.observation_dim());
    obs.extend_from_slice(&[
        gx / 5.0,
        gy / 5.0,
        bearing.sin(),
        bearing.cos(),
        state.roll,
        state.pitch,
        state.body_velocity[0] / 2.0,
        state.body_velocity[1] / 2.0,
        state.yaw_rate / 3.0,
        state.vertical_velocity,
    ]);
    let map = local_elevation_map(field, [x, y, state.heading], task.map_extent, task.map_resolution);
    obs.extend(map.into_iter().map(|h| h / MAP_SCALE));
    obs.extend_from_slice(&[prev_action.throttle, prev_action.steer]);
    obs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assert_close;
    use crate::terrain::build_elevation_scene;
    use crate::vehicle::{FlatGround, VehicleParams};

    fn flat() -> (ElevationTask, HeightField) {
        let task = ElevationTask::default();
        let field = build_elevation_scene(&ElevationSceneSpec::empty(task.scene.arena, 0.05), 0).unwrap();
        (task, field)
    }

    fn state(x: f64, y: f64, heading: f64, vel: [f64; 2]) -> VehicleState {
        let mut s = VehicleState::at_rest(&VehicleParams::default(), &FlatGround, x, y, heading);
        s.body_velocity = vel;
        s
    }

    #[test]
    fn default_task_validates_and_builds() {
        let task = ElevationTask::default();
        task.validate().unwrap();
        for seed in 0..20 {
            build_elevation_scene(&task.scene, seed).unwrap();
        }
    }

    #[test]
    fn goal_velocity_projection() {
        let (task, field) = flat();
        let s = state(1.0, 2.0, 0.0, [1.0, 0.0]);
        assert_close!(elevation_reward(&s, &task, &field).goal_velocity, 1.0, 1e-12);
        let s = state(1.0, 2.0, FRAC_PI_2, [1.0, 0.0]);
        assert_close!(elevation_reward(&s, &task, &field).goal_velocity, 0.0, 1e-12);
        let s = state(1.0, 2.0, 0.0, [-0.5, 0.0]);
        assert_close!(elevation_reward(&s, &task, &field).goal_velocity, -0.5, 1e-12);
    }

    #[test]
    fn roll_gated_off_on_flat_ground() {
        let (task, field) = flat();
        let mut s = state(1.0, 2.0, 0.0, [0.0, 0.0]);
        s.roll = 0.2;
        assert_eq!(elevation_reward(&s, &task, &field).roll_on_elevation, 0.0);
    }

    #[test]
    fn roll_penalized_on_ramp() {
        let task = ElevationTask { scene: ElevationSceneSpec { random_ramps: 0, ..ElevationTask::default().scene }, ..Default::default() };
        let field = build_elevation_scene(&task.scene, 0).unwrap();
        // On the flat top of the default ramp.
        let mut s = state(2.5, 2.4, 0.0, [0.0, 0.0]);
        s.roll = -0.2;
        assert_close!(elevation_reward(&s, &task, &field).roll_on_elevation, -0.2, 1e-12);
    }

    #[test]
    fn falling_only_negative() {
        let (task, field) = flat();
        let mut s = state(1.0, 2.0, 0.0, [0.0, 0.0]);
        s.vertical_velocity = 0.3;
        assert_eq!(elevation_reward(&s, &task, &field).falling, 0.0);
        s.vertical_velocity = -0.3;
        assert_eq!(elevation_reward(&s, &task, &field).falling, -0.3);
    }

    #[test]
    fn observation_layout() {
        let (task, field) = flat();
        let s = state(0.5, 2.0, 0.0, [1.0, 0.0]);
        let o = elevation_observation(&s, Action::new(0.5, -0.5), &task, &field);
        assert_eq!(o.len(), task.observation_dim());
        assert_close!(o[0], 1.0, 1e-12);
        assert_close!(o[1], 0.0, 1e-12);
        assert_close!(o[3], 1.0, 1e-12);
        assert!(o[ELEVATION_STATE_DIM..o.len() - 2].iter().all(|&h| h == 0.0));
        assert_eq!(&o[o.len() - 2..], &[0.5, -0.5]);
    }
}
