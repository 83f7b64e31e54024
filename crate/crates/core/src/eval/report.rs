use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{count_laps, detect_spinout, visual_success, VisualOutcome};
use super::Trajectory;
use crate::envs::Task;
use crate::error::Result;

pub const REPORT_SCHEMA: &str = "wheelsim.eval-report/1";
pub const TABLE_SCHEMA: &str = "wheelsim.eval-table/1";

/// Thresholds used when scoring trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    /// Side-slip above which a sustained run counts as a spin-out, rad.
    pub spin_beta: f64,
    /// Minimum spin-out duration, s.
    pub spin_window: f64,
    /// Longest allowed stay in one place on the visual course, s.
    pub stall_time: f64,
    /// Displacement below which the car counts as staying in place, m.
    pub still_distance: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { spin_beta: 80f64.to_radians(), spin_window: 0.3, stall_time: 5.0, still_distance: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureCause {
    NoLap,
    SpinOut,
    Stalled,
    IncompleteLap,
    GoalNotReached,
}

impl FailureCause {
    pub fn name(self) -> &'static str {
        match self {
            Self::NoLap => "no-lap",
            Self::SpinOut => "spin-out",
            Self::Stalled => "stalled",
            Self::IncompleteLap => "incomplete-lap",
            Self::GoalNotReached => "goal-not-reached",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub episode: usize,
    pub steps: usize,
    pub total_return: f64,
    pub laps: i64,
    pub spin_outs: usize,
    /// Largest `|beta|` outside spin-out intervals, rad.
    pub max_controlled_beta: f64,
    pub max_beta: f64,
    pub mean_speed: f64,
    /// Mean unsigned distance to the racing line; zero without a line.
    pub mean_cross_track: f64,
    pub success: bool,
    pub failure: Option<FailureCause>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(xs: impl Iterator<Item = f64> + Clone) -> Self {
        let n = xs.clone().count();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.clone().sum::<f64>() / n as f64;
        let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        Self { mean, std: var.sqrt() }
    }
}

/// Population statistics over episodes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub episodes: usize,
    pub successes: usize,
    pub total_return: MeanStd,
    pub laps: MeanStd,
    pub spin_outs: MeanStd,
    pub max_controlled_beta: MeanStd,
    pub mean_speed: MeanStd,
    pub mean_cross_track: MeanStd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub task: Option<Task>,
    pub settings: EvalSettings,
    pub episodes: Vec<EpisodeReport>,
    pub aggregate: Aggregate,
}

fn score(index: usize, traj: &Trajectory, settings: &EvalSettings) -> EpisodeReport {
    let recs = &traj.records;
    let spins = detect_spinout(traj, settings.spin_beta, settings.spin_window);
    let mut in_spin = vec![false; recs.len()];
    for iv in &spins {
        in_spin[iv.start..iv.end].iter_mut().for_each(|f| *f = true);
    }
    let max_beta = recs.iter().map(|r| r.beta.abs()).fold(0.0, f64::max);
    let max_controlled_beta =
        recs.iter().zip(&in_spin).filter(|(_, s)| !**s).map(|(r, _)| r.beta.abs()).fold(0.0, f64::max);
    let n = recs.len().max(1) as f64;
    let mean_speed = recs.iter().map(|r| r.speed()).sum::<f64>() / n;
    let track = traj.meta.track.as_ref();
    let mean_cross_track = track.map_or(0.0, |t| recs.iter().map(|r| t.project(r.xy()).distance).sum::<f64>() / n);
    let total_return = recs.iter().skip(1).map(|r| r.reward).sum();

    let (laps, success, failure) = match traj.meta.task {
        Task::Drift => {
            let laps = track.map_or(0, |t| count_laps(traj, t));
            if !spins.is_empty() {
                (laps, false, Some(FailureCause::SpinOut))
            } else if laps < 1 {
                (laps, false, Some(FailureCause::NoLap))
            } else {
                (laps, true, None)
            }
        }
        Task::Visual => match traj.meta.course.as_ref() {
            Some(spec) => match visual_success(traj, spec, settings.stall_time, settings.still_distance) {
                VisualOutcome::Success => (1, true, None),
                VisualOutcome::Stalled => (0, false, Some(FailureCause::Stalled)),
                VisualOutcome::IncompleteLap => (0, false, Some(FailureCause::IncompleteLap)),
            },
            None => (0, false, Some(FailureCause::IncompleteLap)),
        },
        Task::Elevation => {
            if recs.iter().any(|r| r.events.goal_reached) {
                (0, true, None)
            } else {
                (0, false, Some(FailureCause::GoalNotReached))
            }
        }
    };
    EpisodeReport {
        episode: index,
        steps: recs.len().saturating_sub(1),
        total_return,
        laps,
        spin_outs: spins.len(),
        max_controlled_beta,
        max_beta,
        mean_speed,
        mean_cross_track,
        success,
        failure,
    }
}

/// Scores each trajectory and aggregates over episodes.
pub fn summarize(trajectories: &[Trajectory], settings: &EvalSettings) -> EvalReport {
    let episodes: Vec<EpisodeReport> = trajectories.iter().enumerate().map(|(i, t)| score(i, t, settings)).collect();
    let stat = |f: fn(&EpisodeReport) -> f64| MeanStd::of(episodes.iter().map(f));
    let aggregate = Aggregate {
        episodes: episodes.len(),
        successes: episodes.iter().filter(|e| e.success).count(),
        total_return: stat(|e| e.total_return),
        laps: stat(|e| e.laps as f64),
        spin_outs: stat(|e| e.spin_outs as f64),
        max_controlled_beta: stat(|e| e.max_controlled_beta),
        mean_speed: stat(|e| e.mean_speed),
        mean_cross_track: stat(|e| e.mean_cross_track),
    };
    EvalReport {
        schema: REPORT_SCHEMA.to_string(),
        task: trajectories.first().map(|t| t.meta.task),
        settings: settings.clone(),
        episodes,
        aggregate,
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per episode.
    pub fn write_table(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "#schema {TABLE_SCHEMA}")?;
        writeln!(
            out,
            "episode,steps,return[-],laps,spin_outs,max_controlled_beta[deg],max_beta[deg],mean_speed[m/s],mean_cross_track[m],success,failure"
        )?;
        for e in &self.episodes {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                e.episode,
                e.steps,
                e.total_return,
                e.laps,
                e.spin_outs,
                e.max_controlled_beta.to_degrees(),
                e.max_beta.to_degrees(),
                e.mean_speed,
                e.mean_cross_track,
                u8::from(e.success),
                e.failure.map_or("", FailureCause::name),
            )?;
        }
        Ok(())
    }
}
