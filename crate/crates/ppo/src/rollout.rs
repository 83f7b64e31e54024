//! Evaluation rollouts recorded as trajectories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use wheelsim_core::envs::{EnvConfig, EnvInstance, Task};
use wheelsim_core::eval::{Record, Trajectory, TrajectoryMeta};

use crate::error::{PpoError, Result};
use crate::policy::Policy;
use crate::trainer::ACTION_DIM;

/// Source of evaluation actions.
#[derive(Clone, Copy, Debug)]
pub enum Controller<'a> {
    /// The policy mean, without sampling.
    Mean(&'a Policy),
    /// Independent uniform actions in `[-1, 1]`.
    Uniform { seed: u64 },
    Zero,
}

/// Runs one episode in each of the environments `0..episodes` of a batch
/// seeded with `seed` and records them.
pub fn rollout(env_cfg: &EnvConfig, controller: Controller<'_>, seed: u64, episodes: usize) -> Result<Vec<Trajectory>> {
    let mut envs: Vec<EnvInstance> =
        (0..episodes as u64).into_par_iter().map(|i| EnvInstance::new(env_cfg, seed, i)).collect::<Result<_, _>>()?;
    if let (Controller::Mean(p), Some(e)) = (controller, envs.first()) {
        if p.obs_dim() != e.observation().len() {
            return Err(PpoError::CheckpointMismatch(format!(
                "policy expects {} observations, environment produces {}",
                p.obs_dim(),
                e.observation().len()
            )));
        }
    }
    let task = env_cfg.task;
    let names = task.term_names();
    let dt = env_cfg.control_dt();
    let mut trajs: Vec<Trajectory> = envs
        .iter()
        .map(|e| {
            let meta = TrajectoryMeta {
                task,
                dt,
                term_names: names.iter().map(|s| s.to_string()).collect(),
                track: env_cfg.drift.as_ref().map(|d| d.track.clone()),
                course: e.course().cloned(),
                goal: if task == Task::Elevation { env_cfg.elevation.as_ref().map(|t| t.goal) } else { None },
            };
            Trajectory { meta, records: vec![Record::initial(e.state(), names.len())] }
        })
        .collect();
    let mut rngs: Vec<ChaCha12Rng> = (0..episodes as u64)
        .map(|i| {
            let mut r = ChaCha12Rng::seed_from_u64(if let Controller::Uniform { seed } = controller { seed } else { 0 });
            r.set_stream(i);
            r
        })
        .collect();
    let mut active: Vec<usize> = (0..episodes).collect();
    let mut step = 0usize;
    while !active.is_empty() {
        step += 1;
        let actions: Vec<[f64; ACTION_DIM]> = match controller {
            Controller::Mean(p) => {
                let obs: Vec<f64> = active.iter().flat_map(|&i| envs[i].observation().iter().copied()).collect();
                let out = p.forward(&obs, active.len())?;
                out.mean.chunks_exact(ACTION_DIM).map(|m| [m[0], m[1]]).collect()
            }
            Controller::Uniform { .. } => {
                active.iter().map(|&i| [rngs[i].random_range(-1.0..=1.0), rngs[i].random_range(-1.0..=1.0)]).collect()
            }
            Controller::Zero => vec![[0.0; ACTION_DIM]; active.len()],
        };
        let mut picked: Vec<(usize, &mut EnvInstance)> =
            envs.iter_mut().enumerate().filter(|(i, _)| active.binary_search(i).is_ok()).collect();
        let results: Vec<_> = picked
            .par_iter_mut()
            .zip(actions.par_iter())
            .map(|((_, e), a)| e.step(*a))
            .collect::<Result<Vec<_>, _>>()?;
        let mut still = Vec::with_capacity(active.len());
        for (&i, r) in active.iter().zip(&results) {
            trajs[i].records.push(Record::from_step(step as f64 * dt, r));
            if r.episode.is_none() {
                still.push(i);
            }
        }
        active = still;
    }
    Ok(trajs)
}
