use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actor::{initial_tree, Actor, EnvironmentSpec, RemoteActor, RuleBasedRepairActor, RuleSet, ScoreOnlyActor};
use crate::bt::BehaviorTree;
use crate::critic::{Critic, CriticProfile, NullCritic, OracleCritic, RemoteCritic};
use crate::dsl::{parse, validate, NodeLibrary};
use crate::remote::{EndpointConfig, HttpTransport, ACTOR_URL_ENV, CRITIC_URL_ENV};
use crate::scoring::ScoringRules;
use crate::sim::{load_field, shipped_fields, FaultModel, FieldConfig, SimError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed run config: {0}")]
    Parse(String),
    #[error("invalid run config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Field(#[from] SimError),
    #[error("initial tree: {0}")]
    Tree(String),
    #[error("no endpoint URL configured; set `url` or {0}")]
    MissingEndpoint(&'static str),
}

/// Either the name of a shipped profile or a full inline profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Named(String),
    Inline(Box<CriticProfile>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriticSpec {
    #[default]
    Null,
    Oracle { profile: ProfileRef },
    Remote(EndpointConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActorSpec {
    RuleBased {
        #[serde(default)]
        rules: RuleSet,
    },
    ScoreOnly,
    Remote(EndpointConfig),
}

impl Default for ActorSpec {
    fn default() -> Self {
        ActorSpec::RuleBased {
            rules: RuleSet::default(),
        }
    }
}

fn default_run_id() -> String {
    "run".into()
}

fn default_episodes() -> u32 {
    10
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

/// Campaign description, read from TOML.
///
/// `fields` entries are either shipped field labels (`field-1` to
/// `field-5`) or paths to field files, relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_run_id")]
    pub run_id: String,
    pub fields: Vec<String>,
    #[serde(default = "default_episodes")]
    pub episodes_per_config: u32,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub critic: CriticSpec,
    #[serde(default)]
    pub actor: ActorSpec,
    #[serde(default)]
    pub block_info_enabled: bool,
    #[serde(default)]
    pub fault_model: FaultModel,
    #[serde(default)]
    pub time_limit: Option<f64>,
    #[serde(default)]
    pub scoring: ScoringRules,
    /// Starting tree for every lineage; the built-in single-trip tree when
    /// absent.
    #[serde(default)]
    pub initial_bt: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// A config over the given shipped or file fields with every other
    /// setting at its default.
    pub fn new(fields: &[&str]) -> Self {
        RunConfig {
            run_id: default_run_id(),
            fields: fields.iter().map(|f| f.to_string()).collect(),
            episodes_per_config: default_episodes(),
            seeds: default_seeds(),
            critic: CriticSpec::default(),
            actor: ActorSpec::default(),
            block_info_enabled: false,
            fault_model: FaultModel::default(),
            time_limit: None,
            scoring: ScoringRules::default(),
            initial_bt: None,
            output_dir: default_output(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config; relative paths inside it resolve against its folder.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg = RunConfig::parse(&src)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.fields.is_empty() {
            return Err(ConfigError::Invalid("at least one field is required".into()));
        }
        if self.episodes_per_config == 0 {
            return Err(ConfigError::Invalid("episodes_per_config must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("at least one seed is required".into()));
        }
        let mut fields: Vec<&String> = self.fields.iter().collect();
        fields.sort();
        fields.dedup();
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if fields.len() != self.fields.len() || seeds.len() != self.seeds.len() {
            return Err(ConfigError::Invalid("fields and seeds must not repeat".into()));
        }
        if let Some(t) = self.time_limit {
            if t.is_nan() || t <= 0.0 {
                return Err(ConfigError::Invalid(format!("time_limit={t} must be positive")));
            }
        }
        self.fault_model.check()?;
        if let CriticSpec::Oracle { profile } = &self.critic {
            self.profile(profile)?.check().map_err(ConfigError::Invalid)?;
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Loads every field, applying the time-limit override.
    pub fn resolve_fields(&self) -> Result<Vec<FieldConfig>, ConfigError> {
        let shipped = shipped_fields();
        self.fields
            .iter()
            .map(|f| {
                let mut field = match shipped.iter().find(|s| s.field_seed_label == *f) {
                    Some(s) => s.clone(),
                    None => load_field(&self.resolve(Path::new(f)))?,
                };
                if let Some(t) = self.time_limit {
                    field.time_limit = t;
                }
                Ok(field)
            })
            .collect()
    }

    pub fn initial_tree(&self, field: &FieldConfig, library: &NodeLibrary) -> Result<BehaviorTree, ConfigError> {
        let Some(p) = &self.initial_bt else {
            return Ok(initial_tree(&EnvironmentSpec::from_field(field)));
        };
        let path = self.resolve(p);
        let src = std::fs::read_to_string(&path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let tree = parse(&src).map_err(|e| ConfigError::Tree(e.to_string()))?;
        let report = validate(&tree, library);
        if !report.is_valid() {
            return Err(ConfigError::Tree(report.to_string()));
        }
        Ok(tree)
    }

    fn profile(&self, r: &ProfileRef) -> Result<CriticProfile, ConfigError> {
        match r {
            ProfileRef::Named(n) => CriticProfile::named(n).ok_or_else(|| {
                ConfigError::Invalid(format!(
                    "unknown critic profile `{n}`; shipped: {}",
                    CriticProfile::SHIPPED.join(", ")
                ))
            }),
            ProfileRef::Inline(p) => Ok((**p).clone()),
        }
    }

    /// Whether block colours are given to critic and actor.
    pub fn block_info(&self) -> bool {
        self.block_info_enabled
            || matches!(&self.critic, CriticSpec::Oracle { profile } if self.profile(profile).is_ok_and(|p| p.block_info))
    }

    pub fn build_critic(&self) -> Result<Box<dyn Critic>, ConfigError> {
        Ok(match &self.critic {
            CriticSpec::Null => Box::new(NullCritic),
            CriticSpec::Oracle { profile } => Box::new(OracleCritic::new(self.profile(profile)?)),
            CriticSpec::Remote(ep) => {
                let url = ep.resolve_url(CRITIC_URL_ENV).ok_or(ConfigError::MissingEndpoint(CRITIC_URL_ENV))?;
                let t = HttpTransport::new(url, Duration::from_secs_f64(ep.timeout_secs));
                Box::new(RemoteCritic::new(Box::new(t), ep.max_attempts))
            }
        })
    }

    pub fn build_actor(&self) -> Result<Box<dyn Actor>, ConfigError> {
        Ok(match &self.actor {
            ActorSpec::RuleBased { rules } => Box::new(RuleBasedRepairActor { rules: *rules }),
            ActorSpec::ScoreOnly => Box::new(ScoreOnlyActor::default()),
            ActorSpec::Remote(ep) => {
                let url = ep.resolve_url(ACTOR_URL_ENV).ok_or(ConfigError::MissingEndpoint(ACTOR_URL_ENV))?;
                let t = HttpTransport::new(url, Duration::from_secs_f64(ep.timeout_secs));
                Box::new(RemoteActor::new(Box::new(t), ep.max_attempts))
            }
        })
    }
}
