use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use toml::Table;
use wheelsim_core::envs::Task;
use wheelsim_core::eval::{read_trajectories, summarize, turn_series, write_trajectories, EvalReport, TurnSample};
use wheelsim_core::rng::EnvRng;
use wheelsim_core::terrain::{build_elevation_scene, generate_traversability_with, write_heightfield, write_traversability};
use wheelsim_ppo::trainer::Checkpoint;
use wheelsim_ppo::{rollout, train_to_dir, Controller, PpoError, Trainer};

use crate::config::{self, EvalSection, RunConfig, DEFAULT_OUT_ROOT, OUT_ROOT_VAR};
use crate::error::{CliError, Result};
use crate::{ControllerKind, EvalArgs, GenMapArgs, MapTask, ReplayArgs, TrainArgs};

pub const TURN_SERIES_SCHEMA: &str = "wheelsim.turn-series/1";
pub const CONFIG_FILE: &str = "config.toml";

fn write_file(path: &Path, content: &[u8]) -> Result<()> {
    fs::write(path, content).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Reads a configuration file, applies overrides and resolves it.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    config::resolve(config::load(path, overrides)?)
}

fn unique_run_dir(root: &Path, name: &str) -> PathBuf {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let base = root.join(format!("{name}-{secs}"));
    let mut dir = base.clone();
    let mut k = 1;
    while dir.exists() {
        dir = PathBuf::from(format!("{}-{k}", base.display()));
        k += 1;
    }
    dir
}

/// Trains from a resolved configuration into `dir`.
pub fn train_config(cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    create_dir(dir)?;
    write_file(&dir.join(CONFIG_FILE), cfg.to_toml().as_bytes())?;
    let mut trainer = Trainer::new(&cfg.env, cfg.agent.ppo.clone(), &cfg.agent.net, cfg.run.seed)?;
    let every = cfg.run.log_interval;
    let out = train_to_dir(&mut trainer, dir, cfg.run.checkpoint_interval, &cfg.config_hash(), |m| {
        if every > 0 && (m.iteration % every == 0 || m.iteration + 1 == cfg.agent.ppo.iterations) {
            let ret = m.mean_episode_return.map_or("-".to_string(), |r| format!("{r:.2}"));
            eprintln!(
                "iter {:>5}  steps {:>10}  return {ret:>9}  reward/step {:.4}  value loss {:.4}  kl {:.4}",
                m.iteration, m.env_steps, m.mean_step_reward, m.value_loss, m.approx_kl
            );
        }
    });
    match out {
        Ok(_) => Ok(dir.to_path_buf()),
        Err(e @ PpoError::NonFiniteLoss { .. }) => {
            eprintln!("training diverged; weights saved to {}", dir.join("checkpoints/diverged.json").display());
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn train(args: &TrainArgs) -> Result<PathBuf> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    let cfg = load_config(&args.config, &overrides)?;
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => {
            let root = cfg
                .run
                .output_dir
                .clone()
                .or_else(|| std::env::var(OUT_ROOT_VAR).ok().filter(|s| !s.is_empty()))
                .unwrap_or_else(|| DEFAULT_OUT_ROOT.into());
            unique_run_dir(Path::new(&root), &cfg.run.name)
        }
    };
    let dir = train_config(&cfg, &dir)?;
    println!("{}", dir.display());
    Ok(dir)
}

/// Run configuration stored beside a checkpoint in a run directory.
fn run_config_of(checkpoint: &Path) -> Option<PathBuf> {
    let parent = checkpoint.parent()?;
    let run_dir = if parent.file_name()? == "checkpoints" { parent.parent()? } else { parent };
    Some(run_dir.join(CONFIG_FILE)).filter(|p| p.is_file())
}

fn eval_section(args: &EvalArgs, ck: &Checkpoint) -> Result<EvalSection> {
    let mut section = match (&args.config, run_config_of(&args.checkpoint)) {
        (Some(path), _) => load_config(path, &[])?.eval,
        (None, Some(path)) => {
            let cfg = load_config(&path, &[])?;
            if cfg.config_hash() != ck.config_hash {
                return Err(PpoError::CheckpointMismatch(format!(
                    "checkpoint config hash {} differs from {} ({})",
                    ck.config_hash,
                    cfg.config_hash(),
                    path.display()
                ))
                .into());
            }
            cfg.eval
        }
        (None, None) => EvalSection::default(),
    };
    if !args.overrides.is_empty() {
        let mut tree = match toml::Value::try_from(&section).expect("eval section serializes") {
            toml::Value::Table(t) => t,
            _ => unreachable!(),
        };
        for o in &args.overrides {
            config::apply_override(&mut tree, o.strip_prefix("eval.").unwrap_or(o))?;
        }
        section = serde_path_to_error::deserialize(toml::Value::Table(tree))
            .map_err(|e| CliError::field(format!("eval.{}", e.path()), e.into_inner().to_string().trim()))?;
    }
    if let Some(n) = args.episodes {
        section.episodes = n;
    }
    if let Some(s) = args.seed {
        section.seed = s;
    }
    Ok(section)
}

/// Rolls out `episodes` episodes and writes `report.json`, `report.csv` and
/// `trajectories.csv` into `out`.
pub fn evaluate(
    ck: &Checkpoint,
    section: &EvalSection,
    controller: ControllerKind,
    out: &Path,
) -> Result<EvalReport> {
    let env = config::eval_env(&ck.env, &section.env)?;
    if env.task != ck.env.task {
        return Err(PpoError::CheckpointMismatch(format!(
            "checkpoint was trained on {}, evaluation environment is {}",
            ck.env.task, env.task
        ))
        .into());
    }
    let policy = ck.policy()?;
    let ctrl = match controller {
        ControllerKind::Policy => Controller::Mean(&policy),
        ControllerKind::Random => Controller::Uniform { seed: section.seed },
        ControllerKind::Zero => Controller::Zero,
    };
    let trajs = rollout(&env, ctrl, section.seed, section.episodes)?;
    let mut report = summarize(&trajs, &section.settings);
    report.task = Some(env.task);

    create_dir(out)?;
    write_file(&out.join("report.json"), report.to_json().as_bytes())?;
    let mut table = Vec::new();
    report.write_table(&mut table)?;
    write_file(&out.join("report.csv"), &table)?;
    let mut tr = Vec::new();
    write_trajectories(&mut tr, &trajs)?;
    write_file(&out.join("trajectories.csv"), &tr)?;
    Ok(report)
}

pub fn eval(args: &EvalArgs) -> Result<EvalReport> {
    if !args.checkpoint.is_file() {
        return Err(CliError::Config(format!("checkpoint {} does not exist", args.checkpoint.display())));
    }
    let ck = Checkpoint::load(&args.checkpoint)?;
    let section = eval_section(args, &ck)?;
    let out = args.out.clone().unwrap_or_else(|| args.checkpoint.with_extension("eval"));
    let report = evaluate(&ck, &section, args.controller, &out)?;
    print_report(&report);
    println!("{}", out.display());
    Ok(report)
}

fn print_report(report: &EvalReport) {
    println!("episode  steps    return  laps  spins  ctrl_beta[deg]  speed[m/s]  success  failure");
    for e in &report.episodes {
        println!(
            "{:>7}  {:>5}  {:>8.2}  {:>4}  {:>5}  {:>14.1}  {:>10.2}  {:>7}  {}",
            e.episode,
            e.steps,
            e.total_return,
            e.laps,
            e.spin_outs,
            e.max_controlled_beta.to_degrees(),
            e.mean_speed,
            e.success,
            e.failure.map_or("-", |f| f.name())
        );
    }
    let a = &report.aggregate;
    println!(
        "successes {}/{}  return {:.2} ± {:.2}  laps {:.2}  speed {:.2} m/s",
        a.successes, a.episodes, a.total_return.mean, a.total_return.std, a.laps.mean, a.mean_speed.mean
    );
}

pub fn gen_map(args: &GenMapArgs) -> Result<()> {
    let mut tree = match &args.config {
        Some(p) => config::load(p, &[])?,
        None => Table::new(),
    };
    if let Some(task) = args.task {
        let name = match task {
            MapTask::Visual => "visual",
            MapTask::Elevation => "elevation",
        };
        config::apply_override(&mut tree, &format!("env.task={name}"))?;
    }
    for o in &args.overrides {
        config::apply_override(&mut tree, o)?;
    }
    let env = config::resolve_env(&tree)?;
    match env.task {
        Task::Visual => {
            let v = env.visual.as_ref().expect("validated");
            let mut rng = EnvRng::from_seed(args.seed);
            let dims = |d: [usize; 2]| (d[0], d[1]);
            let (map, _) =
                generate_traversability_with(&mut rng, dims(v.env_dims), dims(v.cell_dims), v.walkers, v.tile_size)?;
            write_traversability(&args.out, &map)?;
        }
        Task::Elevation => {
            let field = build_elevation_scene(&env.elevation.as_ref().expect("validated").scene, args.seed)?;
            write_heightfield(&args.out, &field)?;
        }
        Task::Drift => return Err(CliError::field("env.task", "the drift task has no generated scene")),
    }
    println!("{}", args.out.display());
    Ok(())
}

/// Writes per-turn telemetry rows, `(episode, sample)`.
pub fn write_turn_series(out: &mut dyn Write, rows: &[(usize, TurnSample)]) -> std::io::Result<()> {
    writeln!(out, "#schema {TURN_SERIES_SCHEMA}")?;
    writeln!(out, "episode,turn,t[s],beta[deg],speed[m/s],steer[-],throttle[-]")?;
    for (ep, s) in rows {
        writeln!(out, "{ep},{},{},{},{},{},{}", s.turn, s.t, s.beta.to_degrees(), s.speed, s.steer, s.throttle)?;
    }
    Ok(())
}

pub fn replay(args: &ReplayArgs) -> Result<()> {
    let file = File::open(&args.trajectory).map_err(|e| CliError::io(&args.trajectory, e))?;
    let trajs = read_trajectories(&mut BufReader::new(file))?;
    let report = summarize(&trajs, &Default::default());
    print_report(&report);
    let rows: Vec<(usize, TurnSample)> = trajs
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.meta.track.as_ref().map(|track| (i, turn_series(t, track))))
        .flat_map(|(i, series)| series.into_iter().map(move |s| (i, s)))
        .collect();
    if trajs.iter().all(|t| t.meta.track.is_none()) {
        println!("no racing line in this file; per-turn table not written");
        return Ok(());
    }
    let out = args.out.clone().unwrap_or_else(|| args.trajectory.with_extension("turns.csv"));
    let file = File::create(&out).map_err(|e| CliError::io(&out, e))?;
    let mut w = BufWriter::new(file);
    write_turn_series(&mut w, &rows).and_then(|_| w.flush()).map_err(|e| CliError::io(&out, e))?;
    println!("{}", out.display());
    Ok(())
}
