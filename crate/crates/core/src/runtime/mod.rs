//! The closed refinement loop: episodes with critic checkpoints, actor
//! updates, campaigns over fields and seeds, persistence and replay.

mod campaign;
mod config;
mod episode;
mod replay;

use serde::{Deserialize, Serialize};

use crate::bt::{NodeId, TraceEvent};
use crate::critic::CriticFeedback;
use crate::dsl::TreeDiff;
use crate::scoring::{MetricsRecord, ScoreBreakdown};
use crate::sim::{GroundTruthIssue, IssueCategory, Observation, ObservationMode, WorldEvent};

pub use campaign::{lineage_seed, run_campaign, write_report, CampaignOutput, Lineage};
pub use config::{ActorSpec, ConfigError, CriticSpec, ProfileRef, RunConfig};
pub use episode::{execute, run_episode, EpisodeLabels, EpisodeSetup, Execution, Window};
pub use replay::{read_records, replay, ReplayDivergence};

/// Bumped whenever the layout of [`EpisodeRecord`] changes.
pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub mode: ObservationMode,
    /// Root child executed just before an Intermediate checkpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtree: Option<NodeId>,
    pub observation: Observation,
    pub feedback: Option<CriticFeedback>,
    pub alarm_fired: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorStage {
    Critic,
    Actor,
    Execution,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub stage: ErrorStage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<usize>,
    pub message: String,
    /// Failure of an external endpoint that persisted through all retries.
    pub remote: bool,
}

/// One-way message to the human operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub run_id: String,
    pub config_label: String,
    pub episode_index: u32,
    pub checkpoint: usize,
    pub mode: ObservationMode,
    /// Simulated time of the checkpoint, in seconds.
    pub sim_time: f64,
    pub alarm_score: f64,
    pub confidence: f64,
    pub issues: Vec<IssueCategory>,
    pub summary: String,
}

impl Notification {
    fn new(
        labels: &EpisodeLabels,
        checkpoint: usize,
        mode: ObservationMode,
        sim_time: f64,
        f: &CriticFeedback,
    ) -> Self {
        let issues: Vec<IssueCategory> = f.issues.iter().map(|i| i.category).collect();
        let summary = if issues.is_empty() {
            format!("{mode:?} check, low confidence")
        } else {
            let names: Vec<String> = issues.iter().map(|c| format!("{c:?}")).collect();
            format!("{mode:?} check: {}", names.join(", "))
        };
        Notification {
            run_id: labels.run_id.clone(),
            config_label: labels.config_label.clone(),
            episode_index: labels.episode_index,
            checkpoint,
            mode,
            sim_time,
            alarm_score: f.alarm_score,
            confidence: f.confidence,
            issues,
            summary,
        }
    }
}

/// Persisted outcome of one episode (one JSON line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub config_label: String,
    pub episode_index: u32,
    pub seed: u64,
    pub setup: EpisodeSetup,
    pub critic: String,
    pub actor: String,
    pub block_info: bool,
    pub bt_before: String,
    pub bt_after: String,
    pub bt_diff: TreeDiff,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<String>,
    pub checkpoints: Vec<CheckpointRecord>,
    pub full_trace: Vec<TraceEvent>,
    pub world_events: Vec<WorldEvent>,
    pub ground_truth_issues: Vec<GroundTruthIssue>,
    pub score: ScoreBreakdown,
    pub metrics: MetricsRecord,
    pub notifications: Vec<Notification>,
    pub degraded: bool,
    pub error_log: Vec<ErrorEntry>,
}

impl EpisodeRecord {
    /// Modes in invocation order.
    pub fn modes(&self) -> Vec<ObservationMode> {
        self.checkpoints.iter().map(|c| c.mode).collect()
    }

    pub fn remote_failure(&self) -> bool {
        self.error_log.iter().any(|e| e.remote)
    }
}
