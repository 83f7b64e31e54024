use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::LoopSpec;
use crate::envs::{Events, StepResult, Task};
use crate::error::{Error, Result};
use crate::terrain::TrackLine;
use crate::vehicle::{slip_angle, VehicleState};

pub const TRAJECTORY_SCHEMA: &str = "wheelsim.trajectory/1";

/// Fixed columns before the per-term reward columns, with units.
const FIXED_COLUMNS: [&str; 15] = [
    "episode",
    "t[s]",
    "x[m]",
    "y[m]",
    "z[m]",
    "heading[rad]",
    "u[m/s]",
    "v[m/s]",
    "beta[rad]",
    "yaw_rate[rad/s]",
    "steer_angle[rad]",
    "throttle_cmd[-]",
    "steer_cmd[-]",
    "reward[-]",
    "speed[m/s]",
];

const EVENT_COLUMNS: [&str; 7] =
    ["out_of_bounds", "spin_out", "on_black", "collided", "rollover", "goal_reached", "perturbed"];

/// One sample: the state reached after a control step and the action that
/// led to it. The first sample of an episode is the reset state.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub t: f64,
    pub position: [f64; 3],
    pub heading: f64,
    pub velocity: [f64; 2],
    pub beta: f64,
    pub yaw_rate: f64,
    pub steer_angle: f64,
    pub throttle: f64,
    pub steer: f64,
    pub reward: f64,
    pub terms: Vec<f64>,
    pub events: Events,
}

impl Record {
    pub fn initial(state: &VehicleState, n_terms: usize) -> Self {
        Self::from_state(0.0, state, [0.0, 0.0], 0.0, vec![0.0; n_terms], Events::default())
    }

    pub fn from_step(t: f64, step: &StepResult) -> Self {
        let n = step.info.task.term_names().len();
        Self::from_state(
            t,
            &step.final_state,
            [step.action.throttle, step.action.steer],
            step.reward,
            step.info.terms[..n].to_vec(),
            step.info.events,
        )
    }

    fn from_state(t: f64, s: &VehicleState, action: [f64; 2], reward: f64, terms: Vec<f64>, events: Events) -> Self {
        Self {
            t,
            position: s.position,
            heading: s.heading,
            velocity: s.body_velocity,
            beta: slip_angle(s),
            yaw_rate: s.yaw_rate,
            steer_angle: s.steering_angle,
            throttle: action[0],
            steer: action[1],
            reward,
            terms,
            events,
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.position[0], self.position[1]]
    }
}

/// Context needed to compute task metrics from a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub task: Task,
    /// Control step, s.
    pub dt: f64,
    pub term_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<TrackLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub course: Option<LoopSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<[f64; 2]>,
}

/// One episode sampled every `meta.dt` seconds from `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub records: Vec<Record>,
}

impl Trajectory {
    /// Checks that times start at 0, increase strictly and are uniform.
    pub fn new(meta: TrajectoryMeta, records: Vec<Record>) -> Result<Self> {
        if !(meta.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("trajectory dt {} must be > 0", meta.dt)));
        }
        for (k, r) in records.iter().enumerate() {
            let expect = k as f64 * meta.dt;
            if (r.t - expect).abs() > 1e-6 * meta.dt.max(expect) {
                return Err(Error::InvalidConfig(format!("sample {k} at t={} breaks the uniform {} s grid", r.t, meta.dt)));
            }
            if r.terms.len() != meta.term_names.len() {
                return Err(Error::InvalidConfig(format!("sample {k} has {} reward terms", r.terms.len())));
            }
        }
        Ok(Self { meta, records })
    }

    pub fn duration(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }
}

fn header(term_names: &[String]) -> String {
    let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend(term_names.iter().map(|n| format!("term.{n}[-]")));
    cols.extend(EVENT_COLUMNS.iter().map(|n| format!("event.{n}[bool]")));
    cols.join(",")
}

/// Writes episodes as comma-separated rows under a schema line, a JSON meta
/// line and a header with units. A further `#meta` line precedes any episode
/// whose meta differs from the previous one; all metas must share the reward
/// terms.
pub fn write_trajectories(out: &mut dyn Write, episodes: &[Trajectory]) -> Result<()> {
    writeln!(out, "#schema {TRAJECTORY_SCHEMA}")?;
    let Some(first) = episodes.first() else {
        return Ok(());
    };
    let meta = serde_json::to_string(&first.meta).expect("meta serializes");
    writeln!(out, "#meta {meta}")?;
    writeln!(out, "{}", header(&first.meta.term_names))?;
    for (e, traj) in episodes.iter().enumerate() {
        if traj.meta.term_names != first.meta.term_names {
            return Err(Error::InvalidConfig("episodes in one file must share the reward terms".into()));
        }
        if e > 0 && traj.meta != episodes[e - 1].meta {
            writeln!(out, "#meta {}", serde_json::to_string(&traj.meta).expect("meta serializes"))?;
        }
        for r in &traj.records {
            let mut row = vec![e.to_string()];
            let fixed = [
                r.t,
                r.position[0],
                r.position[1],
                r.position[2],
                r.heading,
                r.velocity[0],
                r.velocity[1],
                r.beta,
                r.yaw_rate,
                r.steer_angle,
                r.throttle,
                r.steer,
                r.reward,
                r.speed(),
            ];
            row.extend(fixed.iter().chain(&r.terms).map(|v| v.to_string()));
            let ev = &r.events;
            let flags = [
                ev.out_of_bounds,
                ev.spin_out,
                ev.on_black,
                ev.collided,
                ev.rollover,
                ev.goal_reached,
                ev.perturbed,
            ];
            row.extend(flags.iter().map(|&f| u8::from(f).to_string()));
            writeln!(out, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// Reads a file written by [`write_trajectories`]. Errors carry 1-based line
/// numbers.
pub fn read_trajectories(input: &mut dyn BufRead) -> Result<Vec<Trajectory>> {
    let err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = Vec::new();
    for (i, l) in input.lines().enumerate() {
        lines.push((i + 1, l?));
    }
    let mut it = lines.iter().filter(|(_, l)| !l.trim().is_empty());
    let Some((n, schema)) = it.next() else {
        return Err(err(1, "empty trajectory file".into()));
    };
    if schema.trim() != format!("#schema {TRAJECTORY_SCHEMA}") {
        return Err(err(*n, format!("expected `#schema {TRAJECTORY_SCHEMA}`")));
    }
    let Some((n, meta_line)) = it.next() else {
        return Err(err(*n + 1, "missing #meta line".into()));
    };
    let parse_meta = |n: usize, line: &str| -> Result<TrajectoryMeta> {
        let json = line.strip_prefix("#meta ").ok_or_else(|| err(n, "expected `#meta {...}`".into()))?;
        serde_json::from_str(json).map_err(|e| err(n, format!("bad meta: {e}")))
    };
    let mut meta = parse_meta(*n, meta_line)?;
    let Some((n, head)) = it.next() else {
        return Err(err(*n + 1, "missing column header".into()));
    };
    if *head != header(&meta.term_names) {
        return Err(err(*n, "column header does not match the meta".into()));
    }
    let n_terms = meta.term_names.len();
    let n_cols = FIXED_COLUMNS.len() + n_terms + EVENT_COLUMNS.len();

    let mut episodes: Vec<(TrajectoryMeta, Vec<Record>)> = Vec::new();
    let mut meta_changed = false;
    for (n, line) in it {
        if line.starts_with("#meta") {
            let next = parse_meta(*n, line)?;
            if next.term_names != meta.term_names {
                return Err(err(*n, "meta changes the reward terms".into()));
            }
            meta = next;
            meta_changed = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_cols {
            return Err(err(*n, format!("expected {n_cols} fields, found {}", cells.len())));
        }
        let episode: usize = cells[0].trim().parse().map_err(|_| err(*n, format!("bad episode `{}`", cells[0])))?;
        let mut v = Vec::with_capacity(n_cols - 1);
        for c in &cells[1..FIXED_COLUMNS.len() + n_terms] {
            let x: f64 = c.trim().parse().map_err(|_| err(*n, format!("bad number `{c}`")))?;
            if !x.is_finite() {
                return Err(err(*n, format!("non-finite value `{c}`")));
            }
            v.push(x);
        }
        let mut flags = [false; EVENT_COLUMNS.len()];
        for (f, c) in flags.iter_mut().zip(&cells[FIXED_COLUMNS.len() + n_terms..]) {
            *f = match c.trim() {
                "0" => false,
                "1" => true,
                other => return Err(err(*n, format!("bad flag `{other}`"))),
            };
        }
        let record = Record {
            t: v[0],
            position: [v[1], v[2], v[3]],
            heading: v[4],
            velocity: [v[5], v[6]],
            beta: v[7],
            yaw_rate: v[8],
            steer_angle: v[9],
            throttle: v[10],
            steer: v[11],
            reward: v[12],
            terms: v[14..].to_vec(),
            events: Events {
                out_of_bounds: flags[0],
                spin_out: flags[1],
                on_black: flags[2],
                collided: flags[3],
                rollover: flags[4],
                goal_reached: flags[5],
                perturbed: flags[6],
            },
        };
        if episode == episodes.len() {
            episodes.push((meta.clone(), Vec::new()));
            meta_changed = false;
        } else if episode + 1 != episodes.len() || meta_changed {
            return Err(err(*n, format!("episode {episode} out of sequence")));
        }
        let current = &mut episodes.last_mut().unwrap().1;
        let expect = current.len() as f64 * meta.dt;
        if (record.t - expect).abs() > 1e-6 * meta.dt.max(expect) {
            return Err(err(*n, format!("t={} breaks the uniform {} s grid", record.t, meta.dt)));
        }
        current.push(record);
    }
    if episodes.is_empty() {
        return Err(err(lines.len().max(1), "no samples".into()));
    }
    episodes.into_iter().map(|(meta, records)| Trajectory::new(meta, records)).collect()
}
