//! Critics: turn observations and traces into structured feedback.
//!
//! Feedback carries an alarm score `s` (severity of the worst reported
//! issue) and a confidence `c`. A human operator is alarmed when
//! `s >= 0.5` or `c < 0.3`.

mod oracle;
mod profiles;
mod remote;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::{NodeId, TraceEvent};
use crate::sim::{GroundTruthIssue, IssueCategory, Observation, ObservationMode, PerceptionNoise, WorldEvent};

pub use oracle::{oracle_assess, OracleCritic};
pub use profiles::{CriticProfile, SeverityTolerance};
pub use remote::RemoteCritic;

pub const ALARM_SCORE_THRESHOLD: f64 = 0.5;
pub const ALARM_CONFIDENCE_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Clean,
    Minor,
    Borderline,
    Actionable,
    Severe,
}

impl Severity {
    /// Rubric class of an issue category.
    pub fn of(category: IssueCategory) -> Severity {
        use IssueCategory::*;
        match category {
            MisorientedPlacement | BlockOutsideZones | MisRotation | VacuousSuccess
            | TimeOverrun => Severity::Actionable,
            DropInTransit => Severity::Severe,
            BlockIncorrectlyPlaced | PickFailure | ShelfNotRelocated | SetupAnomaly => {
                Severity::Borderline
            }
            NavigationStall => Severity::Minor,
        }
    }

    /// Whether `s` lies in this class's alarm-score bin.
    pub fn bin_contains(self, s: f64) -> bool {
        match self {
            Severity::Clean => s == 0.0,
            Severity::Minor => (0.1..=0.3).contains(&s),
            Severity::Borderline => s > 0.3 && s < 0.5,
            Severity::Actionable => (0.5..=0.7).contains(&s),
            Severity::Severe => s > 0.7 && s <= 1.0,
        }
    }

    /// Maps `u` in `[0, 1)` into the bin.
    pub fn sample_bin(self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Severity::Clean => 0.0,
            Severity::Minor => (0.1 + 0.2 * u).min(0.3),
            Severity::Borderline => 0.3 + 0.2 * (0.001 + 0.998 * u),
            Severity::Actionable => (0.5 + 0.2 * u).min(0.7),
            Severity::Severe => 1.0 - 0.3 * u.min(0.999),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueReport {
    pub category: IssueCategory,
    #[serde(default)]
    pub node: Option<NodeId>,
    pub severity_class: Severity,
    pub evidence: String,
    /// Block the issue is about, when it concerns a single block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticFeedback {
    pub mode: ObservationMode,
    pub text: String,
    pub issues: Vec<IssueReport>,
    pub alarm_score: f64,
    pub confidence: f64,
}

impl CriticFeedback {
    pub fn categories(&self) -> BTreeSet<IssueCategory> {
        self.issues.iter().map(|i| i.category).collect()
    }

    /// Range checks every field that has one.
    pub fn check(&self) -> Result<(), String> {
        for (name, v) in [("alarm_score", self.alarm_score), ("confidence", self.confidence)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name}={v} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// `true` when a human operator must be notified. Absent feedback never
/// alarms.
pub fn alarm(feedback: Option<&CriticFeedback>) -> bool {
    feedback.is_some_and(|f| {
        f.alarm_score >= ALARM_SCORE_THRESHOLD || f.confidence < ALARM_CONFIDENCE_THRESHOLD
    })
}

/// Everything a critic may look at for one assessment. Ground truth and world
/// events are only read by the oracle critic.
#[derive(Debug, Clone, Copy)]
pub struct CriticRequest<'a> {
    pub mode: ObservationMode,
    pub observation: &'a Observation,
    pub trace: &'a [TraceEvent],
    pub ground_truth: &'a [GroundTruthIssue],
    pub events: &'a [WorldEvent],
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum CriticError {
    #[error("critic timed out: {0}")]
    Timeout(String),
    #[error("malformed critic reply: {0}")]
    MalformedReply(String),
    #[error("critic endpoint error: {0}")]
    EndpointError(String),
}

/// Per-episode memory of what a critic already said.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticMemory {
    pub feedback: Vec<CriticFeedback>,
    /// Ground-truth issue ids already reported this episode.
    pub reported: BTreeSet<String>,
}

pub trait Critic {
    fn name(&self) -> String;

    /// Perception noise applied when rendering observations for this critic.
    fn perception(&self) -> PerceptionNoise;

    /// Clears episodic memory; called at the start of every episode.
    fn reset_memory(&mut self, episode_seed: u64);

    /// `Ok(None)` means the critic gives no feedback at all.
    fn assess(&mut self, req: &CriticRequest<'_>) -> Result<Option<CriticFeedback>, CriticError>;
}

/// Baseline without a critic.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullCritic;

impl Critic for NullCritic {
    fn name(&self) -> String {
        "null".into()
    }

    fn perception(&self) -> PerceptionNoise {
        PerceptionNoise::EXACT
    }

    fn reset_memory(&mut self, _: u64) {}

    fn assess(&mut self, _: &CriticRequest<'_>) -> Result<Option<CriticFeedback>, CriticError> {
        Ok(None)
    }
}

/// Deterministic natural-language rendering of a set of issues.
pub fn render_text(mode: ObservationMode, issues: &[IssueReport]) -> String {
    if issues.is_empty() {
        return format!("{mode:?} check: no issues found.");
    }
    let mut out = format!("{mode:?} check: {} issue(s).", issues.len());
    for i in issues {
        let _ = write!(out, "\n- {:?} ({:?})", i.category, i.severity_class);
        if let Some(n) = &i.node {
            let _ = write!(out, " at {n}");
        }
        let _ = write!(out, ": {}", i.evidence);
    }
    out
}
