use serde::{Deserialize, Serialize};

use super::MAX_TERMS;
use crate::error::{Error, Result};
use crate::terrain::{progress_delta, TrackLine};
use crate::vehicle::{slip_angle, wrap_angle, Action, VehicleState};

pub const DRIFT_OBS_DIM: usize = 9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftTask {
    pub track: TrackLine,
    /// Reset offset from the line is uniform in `[-lateral_noise, lateral_noise]`, m.
    pub lateral_noise: f64,
    /// Reset heading noise half-width, rad.
    pub heading_noise: f64,
    /// Reset forward speed range, m/s.
    pub initial_speed: [f64; 2],
    /// Distance from the line beyond which the car is out of bounds, m.
    pub out_of_bounds_distance: f64,
    /// Largest side-slip that earns the side-slip reward, rad.
    pub beta_stable: f64,
    /// Side-slip flagged as a spin-out event, rad.
    pub spin_out_beta: f64,
    /// Arc-length distances ahead at which the line heading is observed, m.
    pub lookahead: [f64; 2],
}

impl Default for DriftTask {
    fn default() -> Self {
        Self {
            track: TrackLine::default(),
            lateral_noise: 0.1,
            heading_noise: 0.15,
            initial_speed: [0.0, 1.0],
            out_of_bounds_distance: 0.75,
            beta_stable: 60f64.to_radians(),
            spin_out_beta: 80f64.to_radians(),
            lookahead: [0.5, 1.0],
        }
    }
}

impl DriftTask {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("drift: {m}")));
        let t = &self.track;
        if !(t.straight_length >= 0.0 && t.corner_radius > 0.0 && t.center.iter().all(|c| c.is_finite())) {
            return bad("track needs straight_length >= 0 and corner_radius > 0");
        }
        if !(0.0..=0.3).contains(&self.lateral_noise) {
            return bad("lateral_noise must be in [0, 0.3]");
        }
        if !(self.heading_noise >= 0.0 && self.heading_noise < std::f64::consts::PI) {
            return bad("heading_noise must be in [0, pi)");
        }
        let [lo, hi] = self.initial_speed;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return bad("initial_speed must be a non-negative range");
        }
        if !(self.out_of_bounds_distance > self.lateral_noise && self.out_of_bounds_distance.is_finite()) {
            return bad("out_of_bounds_distance must exceed lateral_noise");
        }
        if !(self.beta_stable > 0.0 && self.spin_out_beta > 0.0 && self.spin_out_beta <= std::f64::consts::PI) {
            return bad("beta_stable and spin_out_beta must be positive angles");
        }
        if !self.lookahead.iter().all(|d| d.is_finite() && *d >= 0.0) {
            return bad("lookahead distances must be >= 0");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DriftTerms {
    pub cross_track: f64,
    pub velocity: f64,
    pub side_slip: f64,
    pub progress: f64,
    pub turn_energy: f64,
    pub turn_left_go_right: f64,
    pub out_of_bounds: f64,
}

impl DriftTerms {
    pub fn to_array(&self) -> [f64; MAX_TERMS] {
        [
            self.cross_track,
            self.velocity,
            self.side_slip,
            self.progress,
            self.turn_energy,
            self.turn_left_go_right,
            self.out_of_bounds,
        ]
    }
}

/// Counter-steer term: `|yaw_rate * steer|` when the two have opposite signs.
fn turn_left_go_right(yaw_rate: f64, steer_cmd: f64) -> f64 {
    if yaw_rate != 0.0 && steer_cmd != 0.0 && yaw_rate.signum() != steer_cmd.signum() {
        (yaw_rate * steer_cmd).abs()
    } else {
        0.0
    }
}

/// Drift reward terms for the state reached after a control step. `s_prev` is
/// the line arc length before the step.
pub fn drift_reward(state: &VehicleState, action: Action, task: &DriftTask, s_prev: f64) -> DriftTerms {
    let track = &task.track;
    let proj = track.project([state.position[0], state.position[1]]);
    let speed = state.speed();
    let beta = slip_angle(state).abs();
    DriftTerms {
        cross_track: -proj.distance,
        velocity: speed,
        side_slip: if beta <= task.beta_stable { beta } else { 0.0 },
        progress: progress_delta(track, s_prev, proj.s),
        turn_energy: if track.in_turn(proj.s) { speed } else { 0.0 },
        turn_left_go_right: turn_left_go_right(state.yaw_rate, action.clamped().steer),
        out_of_bounds: if proj.distance > task.out_of_bounds_distance { -1.0 } else { 0.0 },
    }
}

/// `[u/2, v/2, r/3, offset/0.5, heading error, heading error to the line at
/// both lookahead distances, previous throttle, previous steer]`. Heading
/// errors are vehicle heading minus line heading, wrapped to `[-pi, pi)`.
pub fn drift_observation(state: &VehicleState, prev_action: Action, task: &DriftTask) -> [f64; DRIFT_OBS_DIM] {
    let track = &task.track;
    let proj = track.project([state.position[0], state.position[1]]);
    let err = |ds: f64| wrap_angle(state.heading - track.pose_at(proj.s + ds).1);
    [
        state.body_velocity[0] / 2.0,
        state.body_velocity[1] / 2.0,
        state.yaw_rate / 3.0,
        proj.offset / 0.5,
        err(0.0),
        err(task.lookahead[0]),
        err(task.lookahead[1]),
        prev_action.throttle,
        prev_action.steer,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assert_close;
    use crate::vehicle::{FlatGround, VehicleParams};

    fn state_at(x: f64, y: f64, heading: f64, vel: [f64; 2], r: f64) -> VehicleState {
        let mut s = VehicleState::at_rest(&VehicleParams::default(), &FlatGround, x, y, heading);
        s.body_velocity = vel;
        s.yaw_rate = r;
        s
    }

    #[test]
    fn counter_steer_term() {
        let task = DriftTask::default();
        let s = state_at(0.0, -1.0, 0.0, [1.0, 0.0], 1.0);
        assert_close!(drift_reward(&s, Action::new(0.0, -0.5), &task, 0.0).turn_left_go_right, 0.5, 1e-12);
        assert_eq!(drift_reward(&s, Action::new(0.0, 0.5), &task, 0.0).turn_left_go_right, 0.0);
        assert_eq!(drift_reward(&s, Action::new(0.0, 0.0), &task, 0.0).turn_left_go_right, 0.0);
        let s0 = state_at(0.0, -1.0, 0.0, [1.0, 0.0], 0.0);
        assert_eq!(drift_reward(&s0, Action::new(0.0, -0.5), &task, 0.0).turn_left_go_right, 0.0);
    }

    #[test]
    fn side_slip_gate() {
        let task = DriftTask::default();
        let b = 70f64.to_radians();
        let s = state_at(0.0, -1.0, 0.0, [b.cos(), b.sin()], 0.0);
        assert_eq!(drift_reward(&s, Action::default(), &task, 0.0).side_slip, 0.0);
        let b = 40f64.to_radians();
        let s = state_at(0.0, -1.0, 0.0, [b.cos(), -b.sin()], 0.0);
        assert_close!(drift_reward(&s, Action::default(), &task, 0.0).side_slip, b, 1e-12);
    }

    #[test]
    fn at_rest_on_line_only_cross_track() {
        let task = DriftTask::default();
        let ([x, y], h) = task.track.pose_at(0.7);
        let s = state_at(x, y + 0.2, h, [0.0, 0.0], 0.0);
        let t = drift_reward(&s, Action::default(), &task, 0.7);
        assert_close!(t.cross_track, -0.2, 1e-12);
        assert_eq!(
            [t.velocity, t.side_slip, t.progress, t.turn_energy, t.turn_left_go_right, t.out_of_bounds],
            [0.0; 6]
        );
    }

    #[test]
    fn turn_energy_only_in_turns() {
        let task = DriftTask::default();
        let len = task.track.length();
        for k in 0..100 {
            let s_line = len * k as f64 / 100.0;
            let ([x, y], h) = task.track.pose_at(s_line);
            let s = state_at(x, y, h, [1.5, 0.0], 0.0);
            let t = drift_reward(&s, Action::default(), &task, s_line);
            let expect = if task.track.in_turn(s_line) { 1.5 } else { 0.0 };
            assert_close!(t.turn_energy, expect, 1e-12);
        }
    }

    #[test]
    fn out_of_bounds_flagged() {
        let task = DriftTask::default();
        let s = state_at(0.0, -2.0, 0.0, [0.0, 0.0], 0.0);
        assert_eq!(drift_reward(&s, Action::default(), &task, 0.0).out_of_bounds, -1.0);
    }

    #[test]
    fn observation_on_line_aligned() {
        let task = DriftTask::default();
        let ([x, y], h) = task.track.pose_at(1.5);
        let s = state_at(x, y, h, [1.0, 0.0], 0.5);
        let o = drift_observation(&s, Action::new(0.3, -0.2), &task);
        assert_close!(o[0], 0.5, 1e-12);
        assert_close!(o[3], 0.0, 1e-12);
        assert_close!(o[4], 0.0, 1e-12);
        assert_close!(o[5], 0.0, 1e-12);
        // One meter ahead lies 0.5 m into the first turn.
        assert_close!(o[6], -0.5 / task.track.corner_radius, 1e-9);
        assert_eq!([o[7], o[8]], [0.3, -0.2]);
    }
}
