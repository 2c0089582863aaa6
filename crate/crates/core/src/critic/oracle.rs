use std::collections::BTreeSet;

use rand::Rng;

use super::{
    render_text, Critic, CriticError, CriticFeedback, CriticMemory, CriticProfile, CriticRequest,
    IssueReport, Severity, SeverityTolerance,
};
use crate::bt::{NodeId, TraceKind};
use crate::rng::{stream, SimRng, Stream};
use crate::sim::{
    ActionCall, ActionStatus, IssueCategory, ObservationMode, Orientation, PerceptionNoise,
    WorldEvent, ZoneKind,
};

/// Simulated critic that reads ground truth through a reliability profile.
#[derive(Debug, Clone)]
pub struct OracleCritic {
    pub profile: CriticProfile,
    pub memory: CriticMemory,
    rng: SimRng,
}

impl OracleCritic {
    pub fn new(profile: CriticProfile) -> Self {
        OracleCritic {
            profile,
            memory: CriticMemory::default(),
            rng: stream(0, Stream::Critic),
        }
    }
}

impl Critic for OracleCritic {
    fn name(&self) -> String {
        self.profile.name.clone()
    }

    fn perception(&self) -> PerceptionNoise {
        self.profile.perception()
    }

    fn reset_memory(&mut self, episode_seed: u64) {
        self.memory = CriticMemory::default();
        self.rng = stream(episode_seed, Stream::Critic);
    }

    fn assess(&mut self, req: &CriticRequest<'_>) -> Result<Option<CriticFeedback>, CriticError> {
        Ok(Some(oracle_assess(req, &self.profile, &mut self.memory, &mut self.rng)))
    }
}

fn last_placement<'a>(events: &'a [WorldEvent], block: &str) -> Option<&'a WorldEvent> {
    events.iter().rev().find(|e| {
        e.action == ActionCall::PlaceBlocks
            && e.status == ActionStatus::Success
            && e.blocks.iter().any(|b| b == block)
    })
}

/// One assessment. Already-reported issues are skipped in Intermediate mode
/// and repeated in Final mode; everything else is reported with the
/// profile's detection probability, seen through the observation's colours.
pub fn oracle_assess(
    req: &CriticRequest<'_>,
    profile: &CriticProfile,
    memory: &mut CriticMemory,
    rng: &mut SimRng,
) -> CriticFeedback {
    let mode = req.mode;
    let candidates: Vec<_> = req
        .ground_truth
        .iter()
        .filter(|g| mode != ObservationMode::Intermediate || !memory.reported.contains(&g.issue_id))
        .collect();
    let mut issues = Vec::new();

    for g in &candidates {
        let roll = rng.random::<f64>();
        let repeat = mode == ObservationMode::Final && memory.reported.contains(&g.issue_id);
        let visible = match (g.category, &g.block_id) {
            (IssueCategory::MisorientedPlacement, Some(id)) => req
                .observation
                .perceived(id)
                .is_some_and(|(_, b)| b.orientation == Orientation::OrangeUp),
            _ => true,
        };
        if repeat || (visible && roll < profile.detect(g.category)) {
            memory.reported.insert(g.issue_id.clone());
            issues.push(IssueReport {
                category: g.category,
                node: g.node.clone(),
                severity_class: Severity::of(g.category),
                evidence: g.description.clone(),
                block_id: g.block_id.clone(),
            });
        }
    }

    if mode != ObservationMode::Initial {
        spurious_from_perception(req, profile, memory, rng, &mut issues);
    }

    if rng.random::<f64>() < profile.p_false_positive {
        let category = IssueCategory::ALL[rng.random_range(0..IssueCategory::ALL.len())];
        let leaves: Vec<&NodeId> = req
            .trace
            .iter()
            .filter(|t| t.event == TraceKind::Entered)
            .map(|t| &t.node_id)
            .collect();
        let node = (!leaves.is_empty()).then(|| leaves[rng.random_range(0..leaves.len())].clone());
        let severity_class = if rng.random::<bool>() {
            Severity::Minor
        } else {
            Severity::Borderline
        };
        issues.push(IssueReport {
            category,
            node,
            severity_class,
            evidence: "unclear execution state in the image".into(),
            block_id: None,
        });
    }

    if profile.severity_tolerance == SeverityTolerance::Tolerant && mode != ObservationMode::Initial {
        for i in &mut issues {
            if i.severity_class == Severity::Minor && rng.random::<bool>() {
                i.severity_class = Severity::Clean;
            }
        }
    }

    let worst = issues
        .iter()
        .map(|i| i.severity_class)
        .max()
        .unwrap_or(Severity::Clean);
    let alarm_score = worst.sample_bin(rng.random::<f64>());

    let reported: BTreeSet<IssueCategory> = issues.iter().map(|i| i.category).collect();
    let real: BTreeSet<IssueCategory> = candidates.iter().map(|g| g.category).collect();
    let (mean, spread) = if reported == real {
        profile.confidence_when_correct
    } else {
        profile.confidence_when_wrong
    };
    let confidence = (mean + spread * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, 1.0);

    let feedback = CriticFeedback {
        mode,
        text: render_text(mode, &issues),
        issues,
        alarm_score,
        confidence,
    };
    memory.feedback.push(feedback.clone());
    feedback
}

/// Claims that follow from misperception rather than from anything that
/// happened: correct blocks seen orange side up, delivered blocks not seen.
fn spurious_from_perception(
    req: &CriticRequest<'_>,
    profile: &CriticProfile,
    memory: &mut CriticMemory,
    rng: &mut SimRng,
    issues: &mut Vec<IssueReport>,
) {
    let truly_misoriented: BTreeSet<&str> = req
        .ground_truth
        .iter()
        .filter(|g| g.category == IssueCategory::MisorientedPlacement)
        .filter_map(|g| g.block_id.as_deref())
        .collect();
    let final_pass = req.mode == ObservationMode::Final;

    for view in req.observation.zones.iter().filter(|z| z.kind == ZoneKind::Unload) {
        for b in &view.blocks {
            if b.orientation != Orientation::OrangeUp || truly_misoriented.contains(b.block_id.as_str()) {
                continue;
            }
            let key = format!("claim:misoriented:{}", b.block_id);
            if !final_pass && memory.reported.contains(&key) {
                continue;
            }
            let roll = rng.random::<f64>();
            if roll < profile.detect(IssueCategory::MisorientedPlacement) {
                memory.reported.insert(key);
                issues.push(IssueReport {
                    category: IssueCategory::MisorientedPlacement,
                    node: last_placement(req.events, &b.block_id).and_then(|e| e.node.clone()),
                    severity_class: Severity::of(IssueCategory::MisorientedPlacement),
                    evidence: format!("block {} appears orange side up in {}", b.block_id, view.zone),
                    block_id: Some(b.block_id.clone()),
                });
            }
        }
    }

    if !final_pass {
        return;
    }
    let mut placed: Vec<&str> = Vec::new();
    for e in req.events {
        if e.action == ActionCall::PlaceBlocks && e.status == ActionStatus::Success {
            placed.extend(e.blocks.iter().map(String::as_str));
        }
    }
    for id in placed {
        let seen = req.observation.perceived(id).is_some() || req.observation.outside.iter().any(|o| o == id);
        if seen {
            continue;
        }
        let roll = rng.random::<f64>();
        if roll < profile.detect(IssueCategory::BlockIncorrectlyPlaced) {
            issues.push(IssueReport {
                category: IssueCategory::BlockIncorrectlyPlaced,
                node: last_placement(req.events, id).and_then(|e| e.node.clone()),
                severity_class: Severity::of(IssueCategory::BlockIncorrectlyPlaced),
                evidence: format!("block {id} is not visible in any unload zone"),
                block_id: Some(id.to_string()),
            });
        }
    }
}
