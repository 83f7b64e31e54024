//! Experiment configuration: a TOML file with `run`, `agent`, `env` and
//! `eval` sections, dotted-key overrides and a fully materialized form.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};
use wheelsim_core::envs::{EnvConfig, Task};
use wheelsim_core::eval::EvalSettings;
use wheelsim_ppo::{NetConfig, PpoConfig};

use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming the default root for run directories.
pub const OUT_ROOT_VAR: &str = "WHEELSIM_OUT_ROOT";
pub const DEFAULT_OUT_ROOT: &str = "runs";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub name: String,
    pub seed: u64,
    /// Root under which timestamped run directories are created.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    /// Iterations between checkpoints; 0 keeps only the first and last.
    pub checkpoint_interval: usize,
    /// Iterations between progress lines on stderr; 0 disables them.
    pub log_interval: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub ppo: PpoConfig,
    pub net: NetConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub episodes: usize,
    pub seed: u64,
    pub settings: EvalSettings,
    /// Partial environment table merged over the training environment when
    /// evaluating, e.g. held-out randomization ranges or a render shift.
    #[serde(default)]
    pub env: Table,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { episodes: 5, seed: 1000, settings: EvalSettings::default(), env: Table::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// SHA-256 of the materialized configuration without this section.
    pub config_hash: String,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub agent: AgentSection,
    pub env: EnvConfig,
    pub eval: EvalSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl RunConfig {
    /// Every default for `task`, under the given run name.
    pub fn defaults(task: Task, name: &str) -> Self {
        Self {
            run: RunSection { name: name.into(), seed: 0, output_dir: None, checkpoint_interval: 50, log_interval: 10 },
            agent: AgentSection { ppo: PpoConfig::default(), net: NetConfig::default() },
            env: EnvConfig::preset(task),
            eval: EvalSection::default(),
            provenance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.name.trim().is_empty() {
            return Err(CliError::field("run.name", "must not be empty"));
        }
        for (path, seed) in [("run.seed", self.run.seed), ("eval.seed", self.eval.seed)] {
            if seed > i64::MAX as u64 {
                return Err(CliError::field(path, "must fit in a signed 64-bit integer"));
            }
        }
        self.agent.ppo.validate().map_err(|e| CliError::field("agent.ppo", e))?;
        let net = &self.agent.net;
        if net.actor_hidden.contains(&0) || net.critic_hidden.contains(&0) {
            return Err(CliError::field("agent.net", "hidden layer sizes must be >= 1"));
        }
        if !net.init_log_std.is_finite() {
            return Err(CliError::field("agent.net.init_log_std", "must be finite"));
        }
        self.env.validate().map_err(|e| CliError::field("env", e))?;
        self.eval_env()?;
        Ok(())
    }

    /// Hash of the configuration content, ignoring provenance.
    pub fn content_hash(&self) -> String {
        let mut bare = self.clone();
        bare.provenance = None;
        let text = toml::to_string(&bare).expect("configuration serializes to TOML");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Fills in the provenance section.
    pub fn materialize(mut self) -> Self {
        let config_hash = self.content_hash();
        self.provenance = Some(Provenance { config_hash, tool_version: TOOL_VERSION.into() });
        self
    }

    pub fn config_hash(&self) -> String {
        self.provenance.as_ref().map_or_else(|| self.content_hash(), |p| p.config_hash.clone())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// The environment used for evaluation: the training environment with
    /// `eval.env` merged over it.
    pub fn eval_env(&self) -> Result<EnvConfig> {
        eval_env(&self.env, &self.eval.env)
    }
}

/// Merges a partial environment table over `base` and validates the result.
pub fn eval_env(base: &EnvConfig, overrides: &Table) -> Result<EnvConfig> {
    let mut tree = to_table(base);
    merge(&mut tree, overrides.clone());
    let env: EnvConfig = from_table(tree, "eval.env")?;
    env.validate().map_err(|e| CliError::field("eval.env", e))?;
    Ok(env)
}

pub fn parse_toml(text: &str, origin: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

/// Applies `key.path=value`. The value is read as a TOML value when it
/// parses as one and as a plain string otherwise.
pub fn apply_override(tree: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let mut node = tree;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = node.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry.as_table_mut().ok_or_else(|| {
            CliError::field(parts[..=i].join("."), "is not a table, cannot set a key below it")
        })?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Recursive merge: tables merge key by key, everything else replaces.
pub fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn to_table<T: Serialize>(value: &T) -> Table {
    match Value::try_from(value).expect("configuration serializes to TOML") {
        Value::Table(t) => t,
        _ => unreachable!("configuration sections are tables"),
    }
}

fn from_table<T: DeserializeOwned>(tree: Table, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(Value::Table(tree)).map_err(|e| {
        let path = e.path().to_string();
        let path = match (prefix.is_empty(), path.as_str()) {
            (true, _) => path,
            (false, ".") => prefix.to_string(),
            (false, _) => format!("{prefix}.{path}"),
        };
        CliError::field(path, e.into_inner().to_string().trim())
    })
}

fn required_str<'a>(tree: &'a Table, section: &str, key: &str) -> Result<&'a str> {
    let path = format!("{section}.{key}");
    let value = tree
        .get(section)
        .and_then(|s| s.as_table())
        .and_then(|s| s.get(key))
        .ok_or_else(|| CliError::field(&path, "missing required field"))?;
    value.as_str().ok_or_else(|| CliError::field(&path, format!("expected a string, found {}", value.type_str())))
}

fn parse_task(tree: &Table) -> Result<Task> {
    let name = required_str(tree, "env", "task")?;
    Value::String(name.into()).try_into().map_err(|_| {
        CliError::field("env.task", format!("unknown task `{name}` (expected drift, elevation or visual)"))
    })
}

/// Resolves a user tree against the defaults of its task.
pub fn resolve(user: Table) -> Result<RunConfig> {
    let task = parse_task(&user)?;
    let name = required_str(&user, "run", "name")?.to_string();
    let mut tree = to_table(&RunConfig::defaults(task, &name));
    // Task sections other than the selected one are absent from the
    // defaults; a user table for them is rejected by validation.
    merge(&mut tree, user);
    tree.remove("provenance");
    let cfg: RunConfig = from_table(tree, "")?;
    cfg.validate()?;
    Ok(cfg.materialize())
}

/// Resolves only the `env` section of a user tree.
pub fn resolve_env(user: &Table) -> Result<EnvConfig> {
    let task = parse_task(user)?;
    let mut tree = to_table(&EnvConfig::preset(task));
    if let Some(Value::Table(env)) = user.get("env") {
        merge(&mut tree, env.clone());
    }
    let env: EnvConfig = from_table(tree, "env")?;
    env.validate().map_err(|e| CliError::field("env", e))?;
    Ok(env)
}

pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut tree = parse_toml(&text, &path.display().to_string())?;
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    Ok(tree)
}
