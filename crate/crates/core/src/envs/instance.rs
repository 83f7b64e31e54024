use std::f64::consts::PI;
use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;

use super::drift::{drift_observation, drift_reward, DRIFT_OBS_DIM};
use super::elevation::{elevation_observation, elevation_reward, outside, ELEVATION_STATE_DIM};
use super::visual::{loop_course, visual_observation, visual_reward, VISUAL_STATE_DIM};
use super::{check_termination, EndCause, EnvConfig, Events, StepInfo, Task, MAX_TERMS};
use crate::error::{Error, Result};
use crate::eval::LoopSpec;
use crate::rng::{EnvRng, Stream};
use crate::sensors::{apply_perturbation, augment_image, corrupt_observation, randomize_params, Renderer};
use crate::terrain::{build_elevation_scene, generate_traversability_with, HeightField, TraversabilityMap};
use crate::vehicle::{slip_angle, step_detailed, Action, FlatGround, Ground, VehicleParams, VehicleState, SLIP_SPEED_EPS};

/// Per-episode totals reported on the step that ends an episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeStats {
    pub total_return: f64,
    pub length: usize,
    /// Unweighted sum of each reward term over the episode.
    pub term_sums: [f64; MAX_TERMS],
    pub cause: EndCause,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    /// Observation for the next action; after an episode end this is the
    /// first observation of the new episode.
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
    /// The clamped action that was applied.
    pub action: Action,
    /// State reached by this step, before any automatic reset.
    pub final_state: VehicleState,
    /// Observation of `final_state` when the episode was truncated.
    pub terminal_observation: Option<Vec<f64>>,
    pub episode: Option<EpisodeStats>,
}

/// Data shared by every instance of a batch.
#[derive(Debug)]
struct Context {
    cfg: EnvConfig,
    weights: Vec<f64>,
    obs_dim: usize,
    sigma: Vec<f64>,
    renderer: Option<Renderer>,
    /// Elevation scene without augmentation ramps, reused when none are drawn.
    base_field: Option<HeightField>,
}

impl Context {
    fn new(cfg: &EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let corr = &cfg.randomization.corruption;
        let state_sigma = if corr.enabled { corr.state_sigma } else { 0.0 };
        let (obs_dim, sigma, renderer, base_field) = match cfg.task {
            Task::Drift => {
                let mut s = vec![state_sigma; DRIFT_OBS_DIM];
                s[DRIFT_OBS_DIM - 2..].fill(0.0);
                (DRIFT_OBS_DIM, s, None, None)
            }
            Task::Elevation => {
                let t = cfg.elevation.as_ref().unwrap();
                let map_sigma = if corr.enabled { corr.elevation_sigma / t.map_scale() } else { 0.0 };
                let n = t.map_resolution * t.map_resolution;
                let mut s = vec![state_sigma; ELEVATION_STATE_DIM];
                s.extend(std::iter::repeat_n(map_sigma, n));
                s.extend([0.0, 0.0]);
                let base = (t.scene.random_ramps == 0).then(|| build_elevation_scene(&t.scene, 0)).transpose()?;
                (t.observation_dim(), s, None, base)
            }
            Task::Visual => {
                let t = cfg.visual.as_ref().unwrap();
                let pixels = t.camera.rows * t.camera.cols;
                let mut s = vec![0.0; pixels];
                s.extend([state_sigma, state_sigma]);
                s.extend([0.0; VISUAL_STATE_DIM - 2]);
                (t.observation_dim(), s, Some(Renderer::new(t.camera.clone())), None)
            }
        };
        debug_assert_eq!(sigma.len(), obs_dim);
        Ok(Self { weights: cfg.weight_vector(), cfg: cfg.clone(), obs_dim, sigma, renderer, base_field })
    }
}

#[derive(Clone, Debug)]
enum Scene {
    Drift,
    Elevation(HeightField),
    Visual { map: TraversabilityMap, course: Option<LoopSpec> },
}

/// One environment: its vehicle, scene and random streams.
#[derive(Clone, Debug)]
pub struct EnvInstance {
    ctx: Arc<Context>,
    seed: u64,
    index: u64,
    episode: u64,
    step: usize,
    params: VehicleParams,
    state: VehicleState,
    prev_action: Action,
    rng_dynamics: EnvRng,
    rng_obs: EnvRng,
    scene: Scene,
    s_prev: f64,
    episode_return: f64,
    term_sums: [f64; MAX_TERMS],
    obs: Vec<f64>,
    image: Vec<f64>,
}

impl EnvInstance {
    /// Builds and resets environment `index` of a run seeded with `seed`.
    pub fn new(cfg: &EnvConfig, seed: u64, index: u64) -> Result<Self> {
        Self::with_context(Arc::new(Context::new(cfg)?), seed, index)
    }

    fn with_context(ctx: Arc<Context>, seed: u64, index: u64) -> Result<Self> {
        let params = ctx.cfg.vehicle.clone();
        let state = VehicleState::at_rest(&params, &FlatGround, 0.0, 0.0, 0.0);
        let mut env = Self {
            seed,
            index,
            episode: 0,
            step: 0,
            state,
            params,
            prev_action: Action::default(),
            rng_dynamics: EnvRng::from_seed(0),
            rng_obs: EnvRng::from_seed(0),
            scene: Scene::Drift,
            s_prev: 0.0,
            episode_return: 0.0,
            term_sums: [0.0; MAX_TERMS],
            obs: vec![0.0; ctx.obs_dim],
            image: vec![],
            ctx,
        };
        env.reset_episode()?;
        Ok(env)
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Episodes started so far, counting the current one from 0.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    pub fn heightfield(&self) -> Option<&HeightField> {
        match &self.scene {
            Scene::Elevation(f) => Some(f),
            _ => None,
        }
    }

    pub fn traversability(&self) -> Option<&TraversabilityMap> {
        match &self.scene {
            Scene::Visual { map, .. } => Some(map),
            _ => None,
        }
    }

    /// Checkpoints of the current loop course, when the task uses one.
    pub fn course(&self) -> Option<&LoopSpec> {
        match &self.scene {
            Scene::Visual { course, .. } => course.as_ref(),
            _ => None,
        }
    }

    /// Restarts the current episode index from its reset distribution.
    pub fn reset(&mut self) -> Result<&[f64]> {
        self.reset_episode()?;
        Ok(&self.obs)
    }

    fn reset_episode(&mut self) -> Result<()> {
        let ctx = Arc::clone(&self.ctx);
        let cfg = &ctx.cfg;
        let derive = |s| EnvRng::derive(self.seed, self.index, self.episode, s);
        let mut rng = derive(Stream::Reset);
        let mut rng_scene = derive(Stream::Scene);
        self.rng_dynamics = derive(Stream::Dynamics);
        self.rng_obs = derive(Stream::Observation);
        self.params = randomize_params(&cfg.vehicle, &cfg.randomization, &mut rng)?;
        self.step = 0;
        self.prev_action = Action::default();
        self.episode_return = 0.0;
        self.term_sums = [0.0; MAX_TERMS];

        match cfg.task {
            Task::Drift => {
                let t = cfg.drift.as_ref().unwrap();
                let s = rng.uniform(0.0, t.track.length());
                let ([x, y], h) = t.track.pose_at(s);
                let off = rng.uniform(-t.lateral_noise, t.lateral_noise);
                let heading = h + rng.uniform(-t.heading_noise, t.heading_noise);
                let (x, y) = (x - off * h.sin(), y + off * h.cos());
                let mut st = VehicleState::at_rest(&self.params, &FlatGround, x, y, heading);
                let speed = rng.uniform(t.initial_speed[0], t.initial_speed[1]);
                st.body_velocity = [speed, 0.0];
                st.wheel_speed = speed / self.params.wheel_radius;
                self.state = st;
                self.s_prev = t.track.project([x, y]).s;
                self.scene = Scene::Drift;
            }
            Task::Elevation => {
                let t = cfg.elevation.as_ref().unwrap();
                let field = match &ctx.base_field {
                    Some(f) => f.clone(),
                    None => build_elevation_scene(&t.scene, rng_scene.next_u64())?,
                };
                let [nx, nh] = t.start_noise;
                let x = t.start[0] + rng.uniform(-nx, nx);
                let y = t.start[1] + rng.uniform(-nx, nx);
                let heading = t.start_heading + rng.uniform(-nh, nh);
                self.state = VehicleState::at_rest(&self.params, &field, x, y, heading);
                self.scene = Scene::Elevation(field);
            }
            Task::Visual => {
                let t = cfg.visual.as_ref().unwrap();
                let (map, course, pose) = match &t.course {
                    Some(c) => {
                        let (map, spec, pose) = loop_course(c, t.tile_size, &mut rng_scene);
                        (map, Some(spec), pose)
                    }
                    None => {
                        let dims = (t.env_dims[0], t.env_dims[1]);
                        let cells = (t.cell_dims[0], t.cell_dims[1]);
                        let (map, _) = generate_traversability_with(&mut rng_scene, dims, cells, t.walkers, t.tile_size)?;
                        let white: Vec<usize> = (0..map.cells.len()).filter(|&i| map.cells[i] == 1).collect();
                        let i = white[rng.index(white.len())];
                        let [cx, cy] = map.tile_center(i / map.cols, i % map.cols);
                        let j = 0.3 * t.tile_size;
                        let pose = [cx + rng.uniform(-j, j), cy + rng.uniform(-j, j), rng.uniform(-PI, PI)];
                        (map, None, pose)
                    }
                };
                self.state = VehicleState::at_rest(&self.params, &FlatGround, pose[0], pose[1], pose[2]);
                self.scene = Scene::Visual { map, course };
            }
        }
        self.build_observation();
        Ok(())
    }

    fn build_observation(&mut self) {
        let ctx = Arc::clone(&self.ctx);
        let cfg = &ctx.cfg;
        match &self.scene {
            Scene::Drift => {
                let o = drift_observation(&self.state, self.prev_action, cfg.drift.as_ref().unwrap());
                self.obs.clear();
                self.obs.extend_from_slice(&o);
            }
            Scene::Elevation(field) => {
                self.obs = elevation_observation(&self.state, self.prev_action, cfg.elevation.as_ref().unwrap(), field);
            }
            Scene::Visual { map, .. } => {
                let t = cfg.visual.as_ref().unwrap();
                let renderer = ctx.renderer.as_ref().unwrap();
                self.image.resize(renderer.pixels(), 0.0);
                let pose = [self.state.position[0], self.state.position[1], self.state.heading];
                renderer.render_into(pose, map, &mut self.image);
                let aug = &cfg.randomization.image;
                if aug.enabled {
                    self.image = augment_image(&self.image, t.camera.rows, t.camera.cols, aug, &mut self.rng_obs);
                }
                if let Some(shift) = &t.render_shift {
                    shift.apply(&mut self.image);
                }
                self.obs = visual_observation(&self.image, &self.state, self.prev_action);
            }
        }
        if cfg.randomization.corruption.enabled {
            corrupt_observation(&mut self.obs, &ctx.sigma, &mut self.rng_obs);
        }
    }

    /// Advances one control step. An episode that ends is reset before
    /// returning, so the observation belongs to the next episode.
    pub fn step(&mut self, action: [f64; 2]) -> Result<StepResult> {
        let ctx = Arc::clone(&self.ctx);
        let cfg = &ctx.cfg;
        let a = Action::new(action[0], action[1]).clamped();
        let ground: &dyn Ground = match &self.scene {
            Scene::Elevation(f) => f,
            _ => &FlatGround,
        };
        let mut state = self.state.clone();
        let mut events = Events::default();
        for _ in 0..cfg.decimation {
            let out = step_detailed(&state, a, &self.params, ground, cfg.physics_dt)?;
            events.collided |= out.collided;
            state = out.state;
        }
        let (state, perturbed) =
            apply_perturbation(&state, &self.params, &cfg.randomization.perturbation, &mut self.rng_dynamics);
        events.perturbed = perturbed;
        let p = [state.position[0], state.position[1]];

        let (terms, terminate_on_black) = match &self.scene {
            Scene::Drift => {
                let t = cfg.drift.as_ref().unwrap();
                let terms = drift_reward(&state, a, t, self.s_prev);
                self.s_prev = t.track.project(p).s;
                events.out_of_bounds = terms.out_of_bounds != 0.0;
                events.spin_out = state.speed() > SLIP_SPEED_EPS && slip_angle(&state).abs() > t.spin_out_beta;
                (terms.to_array(), false)
            }
            Scene::Elevation(field) => {
                let t = cfg.elevation.as_ref().unwrap();
                let terms = elevation_reward(&state, t, field);
                events.out_of_bounds = outside(field, p);
                events.rollover = state.roll.abs() > t.rollover_limit || state.pitch.abs() > t.rollover_limit;
                events.goal_reached = (p[0] - t.goal[0]).hypot(p[1] - t.goal[1]) < t.goal_radius;
                (terms.to_array(), false)
            }
            Scene::Visual { map, .. } => {
                let t = cfg.visual.as_ref().unwrap();
                let terms = visual_reward(&state, map, t.r_white, t.r_black);
                let under = map.traversable_at(p[0], p[1]);
                events.on_black = under != Some(true);
                events.out_of_bounds = under.is_none();
                (terms.to_array(), t.terminate_on_black)
            }
        };

        let mut weighted = [0.0; MAX_TERMS];
        for (i, w) in ctx.weights.iter().enumerate() {
            weighted[i] = w * terms[i];
        }
        let mut info = StepInfo { task: cfg.task, terms, weighted, events, cause: None };
        let reward = info.total();

        self.step += 1;
        self.episode_return += reward;
        for (s, t) in self.term_sums.iter_mut().zip(terms) {
            *s += t;
        }
        let end = check_termination(self.step, cfg.episode_length, &events, terminate_on_black);
        info.cause = end.cause;
        self.prev_action = a;
        self.state = state;
        let final_state = self.state.clone();

        let mut terminal_observation = None;
        let episode = match end.cause {
            Some(cause) => {
                if end.truncated {
                    self.build_observation();
                    terminal_observation = Some(self.obs.clone());
                }
                let stats = EpisodeStats {
                    total_return: self.episode_return,
                    length: self.step,
                    term_sums: self.term_sums,
                    cause,
                };
                self.episode += 1;
                self.reset_episode()?;
                Some(stats)
            }
            None => {
                self.build_observation();
                None
            }
        };
        Ok(StepResult {
            observation: self.obs.clone(),
            reward,
            terminated: end.terminated,
            truncated: end.truncated,
            info,
            action: a,
            final_state,
            terminal_observation,
            episode,
        })
    }
}

/// A batch of independent environments stepped in lockstep. Environment `i`
/// depends only on the run seed, its index and its own actions.
#[derive(Clone, Debug)]
pub struct VecEnv {
    envs: Vec<EnvInstance>,
}

impl VecEnv {
    /// Environments `0..cfg.num_envs`.
    pub fn new(cfg: &EnvConfig, seed: u64) -> Result<Self> {
        let indices: Vec<u64> = (0..cfg.num_envs as u64).collect();
        Self::with_indices(cfg, seed, &indices)
    }

    /// Environments with explicit indices, in the given order.
    pub fn with_indices(cfg: &EnvConfig, seed: u64, indices: &[u64]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidConfig("num_envs must be >= 1".into()));
        }
        let ctx = Arc::new(Context::new(cfg)?);
        let envs = indices
            .par_iter()
            .map(|&i| EnvInstance::with_context(Arc::clone(&ctx), seed, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { envs })
    }

    pub fn num_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.envs[0].ctx.obs_dim
    }

    pub fn config(&self) -> &EnvConfig {
        &self.envs[0].ctx.cfg
    }

    pub fn envs(&self) -> &[EnvInstance] {
        &self.envs
    }

    /// Current observations, one row per environment.
    pub fn observations(&self) -> Vec<&[f64]> {
        self.envs.iter().map(|e| e.observation()).collect()
    }

    /// Steps every environment with its action. Runs on the current rayon
    /// pool; results do not depend on the number of workers.
    pub fn step_batch(&mut self, actions: &[[f64; 2]]) -> Result<Vec<StepResult>> {
        if actions.len() != self.envs.len() {
            return Err(Error::BatchSizeMismatch { expected: self.envs.len(), got: actions.len() });
        }
        self.envs.par_iter_mut().zip(actions.par_iter()).map(|(e, a)| e.step(*a)).collect()
    }
}
