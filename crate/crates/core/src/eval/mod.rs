//! Trajectory logs, task metrics and evaluation reports.

mod metrics;
mod report;
mod trajectory;

use serde::{Deserialize, Serialize};

pub use metrics::{count_laps, detect_spinout, turn_series, visual_success, SpinoutInterval, TurnSample, VisualOutcome};
pub use report::{summarize, Aggregate, EpisodeReport, EvalReport, EvalSettings, FailureCause, REPORT_SCHEMA, TABLE_SCHEMA};
pub use trajectory::{read_trajectories, write_trajectories, Record, Trajectory, TrajectoryMeta, TRAJECTORY_SCHEMA};

/// Lap checkpoints of a closed course. The last checkpoint is the start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub checkpoints: Vec<[f64; 2]>,
    /// A checkpoint is visited when the car passes within this distance, m.
    pub radius: f64,
    /// Whether a lap driven in the reverse direction also counts.
    pub bidirectional: bool,
}

impl LoopSpec {
    /// Checkpoint orders that complete a lap.
    pub fn orders(&self) -> Vec<Vec<[f64; 2]>> {
        let mut orders = vec![self.checkpoints.clone()];
        if self.bidirectional && self.checkpoints.len() > 1 {
            let n = self.checkpoints.len();
            let mut rev: Vec<_> = self.checkpoints[..n - 1].iter().rev().copied().collect();
            rev.push(self.checkpoints[n - 1]);
            orders.push(rev);
        }
        orders
    }
}
