//! Service configuration: a TOML key/value file with `PREDLEARN_*`
//! environment overrides.

use std::path::{Path, PathBuf};

use predlearn::agent::AgentConfig;
use predlearn::pddl::Heuristic;
use predlearn::teacher::{Backend, Naming, TeacherBackendConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid value for {key}: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub heuristic: String,
    pub plan_probability: f64,
    pub max_episode_steps: u32,
    pub max_correction_iterations: u32,
    pub max_expansions: u64,
    pub endpoint: Option<String>,
    pub model: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub data_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        let agent = AgentConfig::default();
        let teacher = TeacherBackendConfig::default();
        Config {
            heuristic: agent.heuristic.as_str().to_string(),
            plan_probability: agent.plan_probability,
            max_episode_steps: agent.max_episode_steps,
            max_correction_iterations: agent.max_correction_iterations,
            max_expansions: agent.max_expansions,
            endpoint: None,
            model: teacher.model,
            timeout_secs: teacher.timeout_secs,
            retries: teacher.retries,
            data_dir: PathBuf::from("data"),
        }
    }
}

const ENV_PREFIX: &str = "PREDLEARN_";

impl Config {
    /// Reads `path` if given, then applies environment overrides from `env`.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Config, ConfigError> {
        let mut c = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|source| ConfigError::Read { path: p.display().to_string(), source })?;
                toml::from_str(&text)
                    .map_err(|e| ConfigError::Parse { path: p.display().to_string(), message: e.to_string() })?
            }
            None => Config::default(),
        };
        c.apply_env(env)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_env(path: Option<&Path>) -> Result<Config, ConfigError> {
        Config::load(path, |k| std::env::var(k).ok())
    }

    fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            v.trim().parse().map_err(|e: T::Err| ConfigError::Invalid { key: key.to_string(), message: e.to_string() })
        }
        let get = |k: &str| env(&format!("{ENV_PREFIX}{k}")).filter(|v| !v.is_empty());
        if let Some(v) = get("HEURISTIC") {
            self.heuristic = v;
        }
        if let Some(v) = get("PLAN_PROBABILITY") {
            self.plan_probability = parse("PLAN_PROBABILITY", &v)?;
        }
        if let Some(v) = get("MAX_EPISODE_STEPS") {
            self.max_episode_steps = parse("MAX_EPISODE_STEPS", &v)?;
        }
        if let Some(v) = get("MAX_CORRECTION_ITERATIONS") {
            self.max_correction_iterations = parse("MAX_CORRECTION_ITERATIONS", &v)?;
        }
        if let Some(v) = get("MAX_EXPANSIONS") {
            self.max_expansions = parse("MAX_EXPANSIONS", &v)?;
        }
        if let Some(v) = get("ENDPOINT") {
            self.endpoint = Some(v);
        }
        if let Some(v) = get("MODEL") {
            self.model = v;
        }
        if let Some(v) = get("TIMEOUT_SECS") {
            self.timeout_secs = parse("TIMEOUT_SECS", &v)?;
        }
        if let Some(v) = get("DATA_DIR") {
            self.data_dir = PathBuf::from(v);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid =
            |key: &str, message: &str| Err(ConfigError::Invalid { key: key.to_string(), message: message.to_string() });
        if let Err(e) = self.heuristic.parse::<Heuristic>() {
            return invalid("heuristic", &e);
        }
        if !(0.0..=1.0).contains(&self.plan_probability) {
            return invalid("plan_probability", "must be within [0, 1]");
        }
        if self.max_episode_steps == 0 {
            return invalid("max_episode_steps", "must be positive");
        }
        if self.max_expansions == 0 {
            return invalid("max_expansions", "must be positive");
        }
        if self.timeout_secs == 0 {
            return invalid("timeout_secs", "must be positive");
        }
        Ok(())
    }

    pub fn agent(&self) -> AgentConfig {
        AgentConfig {
            plan_probability: self.plan_probability,
            max_episode_steps: self.max_episode_steps,
            heuristic: self.heuristic.parse().expect("validated"),
            max_expansions: self.max_expansions,
            max_correction_iterations: self.max_correction_iterations,
        }
    }

    pub fn teacher(&self, backend: Backend, naming: Naming) -> TeacherBackendConfig {
        TeacherBackendConfig {
            backend,
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            max_correction_iterations: self.max_correction_iterations,
            timeout_secs: self.timeout_secs,
            retries: self.retries,
            naming,
            ..TeacherBackendConfig::default()
        }
    }
}
