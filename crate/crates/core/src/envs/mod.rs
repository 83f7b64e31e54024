//! Batched task environments: drift, elevation and visual navigation.

mod drift;
mod elevation;
mod instance;
mod visual;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensors::RandomizationSpec;
use crate::vehicle::{DriveLayout, VehicleParams};

pub use drift::{drift_observation, drift_reward, DriftTask, DriftTerms, DRIFT_OBS_DIM};
pub use elevation::{elevation_observation, elevation_reward, ElevationTask, ElevationTerms};
pub use instance::{EnvInstance, EpisodeStats, StepResult, VecEnv};
pub use visual::{loop_course, visual_observation, visual_reward, LoopCourse, RenderShift, VisualTask, VisualTerms};

/// Upper bound on the number of reward terms of any task.
pub const MAX_TERMS: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Drift,
    Elevation,
    Visual,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Drift => "drift",
            Task::Elevation => "elevation",
            Task::Visual => "visual",
        }
    }

    /// Reward terms in the order used by [`StepInfo::terms`].
    pub fn term_names(self) -> &'static [&'static str] {
        match self {
            Task::Drift => &[
                "cross_track",
                "velocity",
                "side_slip",
                "progress",
                "turn_energy",
                "turn_left_go_right",
                "out_of_bounds",
            ],
            Task::Elevation => &["goal_velocity", "z_position", "falling", "roll_on_elevation", "out_of_bounds"],
            Task::Visual => &["velocity", "traversability", "out_of_bounds"],
        }
    }

    /// Penalty terms are non-positive, so every default weight is a positive
    /// magnitude.
    pub fn default_weights(self) -> BTreeMap<String, f64> {
        let w: &[f64] = match self {
            Task::Drift => &[3.0, 0.5, 0.3, 1.0, 0.3, 0.2, 10.0],
            Task::Elevation => &[1.0, 0.5, 1.0, 0.5, 10.0],
            Task::Visual => &[0.5, 1.0, 10.0],
        };
        self.term_names().iter().zip(w).map(|(n, &v)| (n.to_string(), v)).collect()
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to build a batch of environments of one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub task: Task,
    pub num_envs: usize,
    /// Control steps per episode.
    pub episode_length: usize,
    /// Physics steps per control step.
    pub decimation: usize,
    pub physics_dt: f64,
    pub rewards: BTreeMap<String, f64>,
    pub vehicle: VehicleParams,
    pub randomization: RandomizationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation: Option<ElevationTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual: Option<VisualTask>,
}

impl EnvConfig {
    /// Default configuration of a task with every field resolved.
    pub fn preset(task: Task) -> Self {
        let mut vehicle = VehicleParams::default();
        let (mut drift, mut elevation, mut visual) = (None, None, None);
        // 20 s, 15 s and 30 s at 20 Hz.
        let episode_length = match task {
            Task::Drift => {
                vehicle.drive_layout = DriveLayout::RearWheelDrive;
                drift = Some(DriftTask::default());
                400
            }
            Task::Elevation => {
                elevation = Some(ElevationTask::default());
                300
            }
            Task::Visual => {
                visual = Some(VisualTask::default());
                600
            }
        };
        Self {
            task,
            num_envs: 64,
            episode_length,
            decimation: 5,
            physics_dt: 0.01,
            rewards: task.default_weights(),
            vehicle,
            randomization: RandomizationSpec::default(),
            drift,
            elevation,
            visual,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_envs == 0 {
            return bad("num_envs must be >= 1".into());
        }
        if self.episode_length == 0 {
            return bad("episode_length must be >= 1".into());
        }
        if self.decimation == 0 {
            return bad("decimation must be >= 1".into());
        }
        if !(self.physics_dt > 0.0 && self.physics_dt <= crate::vehicle::MAX_DT) {
            return Err(Error::InvalidTimestep(self.physics_dt));
        }
        let names = self.task.term_names();
        for (k, v) in &self.rewards {
            if !names.contains(&k.as_str()) {
                return bad(format!("unknown reward term `{k}` for task {}", self.task));
            }
            if !v.is_finite() {
                return bad(format!("reward weight `{k}` is not finite"));
            }
        }
        for n in names {
            if !self.rewards.contains_key(*n) {
                return bad(format!("missing reward weight `{n}`"));
            }
        }
        self.vehicle.validate()?;
        self.randomization.validate()?;
        let sections = [
            (Task::Drift, self.drift.is_some()),
            (Task::Elevation, self.elevation.is_some()),
            (Task::Visual, self.visual.is_some()),
        ];
        for (task, present) in sections {
            if task == self.task && !present {
                return bad(format!("missing `{task}` section"));
            }
            if task != self.task && present {
                return bad(format!("section `{task}` is not used by task {}", self.task));
            }
        }
        match self.task {
            Task::Drift => self.drift.as_ref().unwrap().validate(),
            Task::Elevation => self.elevation.as_ref().unwrap().validate(),
            Task::Visual => self.visual.as_ref().unwrap().validate(),
        }
    }

    /// Weights in [`Task::term_names`] order.
    pub fn weight_vector(&self) -> Vec<f64> {
        self.task.term_names().iter().map(|n| self.rewards.get(*n).copied().unwrap_or(0.0)).collect()
    }

    /// Seconds per control step.
    pub fn control_dt(&self) -> f64 {
        self.physics_dt * self.decimation as f64
    }
}

/// Per-step event flags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Events {
    pub out_of_bounds: bool,
    pub spin_out: bool,
    pub on_black: bool,
    pub collided: bool,
    pub rollover: bool,
    pub goal_reached: bool,
    pub perturbed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndCause {
    Timeout,
    OutOfBounds,
    Rollover,
    GoalReached,
    OnBlack,
}

impl EndCause {
    pub fn name(self) -> &'static str {
        match self {
            EndCause::Timeout => "timeout",
            EndCause::OutOfBounds => "out-of-bounds",
            EndCause::Rollover => "rollover",
            EndCause::GoalReached => "goal-reached",
            EndCause::OnBlack => "on-black",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Termination {
    pub terminated: bool,
    pub truncated: bool,
    pub cause: Option<EndCause>,
}

/// Terminal events win over the time limit, so a step is never both
/// terminated and truncated. `episode_step` counts steps taken including the
/// current one.
pub fn check_termination(episode_step: usize, episode_length: usize, events: &Events, terminate_on_black: bool) -> Termination {
    let cause = if events.out_of_bounds {
        Some(EndCause::OutOfBounds)
    } else if events.rollover {
        Some(EndCause::Rollover)
    } else if events.goal_reached {
        Some(EndCause::GoalReached)
    } else if terminate_on_black && events.on_black {
        Some(EndCause::OnBlack)
    } else {
        None
    };
    match cause {
        Some(c) => Termination { terminated: true, truncated: false, cause: Some(c) },
        None if episode_step >= episode_length => {
            Termination { terminated: false, truncated: true, cause: Some(EndCause::Timeout) }
        }
        None => Termination { terminated: false, truncated: false, cause: None },
    }
}

/// Reward breakdown and events of one control step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub task: Task,
    /// Raw term values in [`Task::term_names`] order; unused slots are 0.
    pub terms: [f64; MAX_TERMS],
    /// `weight * term` per slot.
    pub weighted: [f64; MAX_TERMS],
    pub events: Events,
    pub cause: Option<EndCause>,
}

impl StepInfo {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.task.term_names().iter().position(|n| *n == name).map(|i| self.terms[i])
    }

    pub fn named_terms(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.task.term_names().iter().copied().zip(self.terms)
    }

    /// Sum of the weighted terms, accumulated in term order.
    pub fn total(&self) -> f64 {
        self.weighted[..self.task.term_names().len()].iter().sum()
    }
}
