use serde::Serialize;

use super::{LoopSpec, Trajectory};
use crate::terrain::{progress_delta, TrackLine};
use crate::vehicle::SLIP_SPEED_EPS;

/// A maximal run of samples `[start, end)` in a spin-out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpinoutInterval {
    pub start: usize,
    pub end: usize,
    pub t_start: f64,
    /// Each sample covers one control step, so this is `(end - start) * dt`.
    pub duration: f64,
}

/// Spin-out intervals: maximal runs where `|beta| > beta_max` and the speed
/// exceeds the slip threshold, kept when they last at least `window` seconds.
pub fn detect_spinout(traj: &Trajectory, beta_max: f64, window: f64) -> Vec<SpinoutInterval> {
    assert!(window > 0.0, "spin-out window must be positive");
    let dt = traj.meta.dt;
    let flagged: Vec<bool> = traj.records.iter().map(|r| r.beta.abs() > beta_max && r.speed() > SLIP_SPEED_EPS).collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < flagged.len() {
        if !flagged[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < flagged.len() && flagged[k] {
            k += 1;
        }
        let duration = (k - start) as f64 * dt;
        if duration >= window - 1e-9 * window {
            out.push(SpinoutInterval { start, end: k, t_start: traj.records[start].t, duration });
        }
    }
    out
}

/// Signed laps: accumulated progress along the line over the track length,
/// truncated toward zero.
pub fn count_laps(traj: &Trajectory, track: &TrackLine) -> i64 {
    let mut prev: Option<f64> = None;
    let mut total = 0.0;
    for r in &traj.records {
        let s = track.project(r.xy()).s;
        if let Some(p) = prev {
            total += progress_delta(track, p, s);
        }
        prev = Some(s);
    }
    let laps = total / track.length();
    (laps + 1e-9 * laps.signum()).trunc() as i64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VisualOutcome {
    Success,
    Stalled,
    IncompleteLap,
}

/// Index of the sample completing a lap in either allowed order.
fn lap_completion(traj: &Trajectory, spec: &LoopSpec) -> Option<usize> {
    let orders = spec.orders();
    let mut next = vec![0usize; orders.len()];
    for (k, r) in traj.records.iter().enumerate() {
        let p = r.xy();
        for (order, idx) in orders.iter().zip(next.iter_mut()) {
            if *idx < order.len() {
                let c = order[*idx];
                if (p[0] - c[0]).hypot(p[1] - c[1]) <= spec.radius {
                    *idx += 1;
                }
            }
            if *idx == order.len() {
                return Some(k);
            }
        }
    }
    None
}

/// First sample index that starts a stall within `records[..=last]`: every
/// sample over more than `stall_time` seconds stays within `d_still` of it.
fn first_stall(traj: &Trajectory, last: usize, stall_time: f64, d_still: f64) -> Option<usize> {
    let dt = traj.meta.dt;
    let span = (stall_time / dt + 1e-9).floor() as usize + 1;
    let recs = &traj.records[..=last.min(traj.records.len().saturating_sub(1))];
    if recs.len() <= span {
        return None;
    }
    (0..recs.len() - span).find(|&i| {
        let o = recs[i].xy();
        recs[i..=i + span].iter().all(|r| (r.position[0] - o[0]).hypot(r.position[1] - o[1]) < d_still)
    })
}

/// Lap success: the checkpoints are visited in order and the car never stays
/// in one place for more than `stall_time` seconds before finishing the lap.
pub fn visual_success(traj: &Trajectory, spec: &LoopSpec, stall_time: f64, d_still: f64) -> VisualOutcome {
    if traj.records.is_empty() {
        return VisualOutcome::IncompleteLap;
    }
    let done = lap_completion(traj, spec);
    let last = done.unwrap_or(traj.records.len() - 1);
    if first_stall(traj, last, stall_time, d_still).is_some() {
        VisualOutcome::Stalled
    } else if done.is_some() {
        VisualOutcome::Success
    } else {
        VisualOutcome::IncompleteLap
    }
}

/// One row of the per-turn telemetry series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TurnSample {
    /// Turns are numbered from 0 in the order they are entered.
    pub turn: usize,
    /// Time since entering the turn, s.
    pub t: f64,
    pub beta: f64,
    pub speed: f64,
    pub steer: f64,
    pub throttle: f64,
}

/// Samples taken while the car projects onto a curved part of the line,
/// grouped by turn.
pub fn turn_series(traj: &Trajectory, track: &TrackLine) -> Vec<TurnSample> {
    let mut out = Vec::new();
    let mut turn: Option<(usize, f64)> = None;
    let mut count = 0;
    for r in &traj.records {
        let in_turn = track.in_turn(track.project(r.xy()).s);
        match (in_turn, turn) {
            (true, None) => {
                turn = Some((count, r.t));
                count += 1;
            }
            (false, Some(_)) => turn = None,
            _ => {}
        }
        if let Some((idx, t0)) = turn {
            out.push(TurnSample { turn: idx, t: r.t - t0, beta: r.beta, speed: r.speed(), steer: r.steer, throttle: r.throttle });
        }
    }
    out
}
