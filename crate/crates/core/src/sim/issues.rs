use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    ActionCall, ActionStatus, BlockLocation, FaultKind, Orientation, WorldEvent, WorldState, ZoneKind,
};
use crate::bt::{CursorSpan, NodeId, TickStatus, TraceEvent, TraceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueCategory {
    /// Block resting in an unload zone orange side up.
    MisorientedPlacement,
    BlockOutsideZones,
    /// Block that never reached an unload zone by the end of the episode.
    BlockIncorrectlyPlaced,
    PickFailure,
    DropInTransit,
    MisRotation,
    NavigationStall,
    /// A completed `CursorSequence` re-entered and reporting success without
    /// doing anything.
    VacuousSuccess,
    ShelfNotRelocated,
    TimeOverrun,
    SetupAnomaly,
}

impl IssueCategory {
    pub const ALL: [IssueCategory; 11] = [
        IssueCategory::MisorientedPlacement,
        IssueCategory::BlockOutsideZones,
        IssueCategory::BlockIncorrectlyPlaced,
        IssueCategory::PickFailure,
        IssueCategory::DropInTransit,
        IssueCategory::MisRotation,
        IssueCategory::NavigationStall,
        IssueCategory::VacuousSuccess,
        IssueCategory::ShelfNotRelocated,
        IssueCategory::TimeOverrun,
        IssueCategory::SetupAnomaly,
    ];
}

/// An issue that really happened, as opposed to one a critic claims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthIssue {
    /// Stable across checkpoints of one episode.
    pub issue_id: String,
    pub category: IssueCategory,
    pub node: Option<NodeId>,
    pub sim_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_id: Option<String>,
    pub description: String,
}

fn issue(
    issue_id: String,
    category: IssueCategory,
    node: Option<NodeId>,
    sim_time: f64,
    block_id: Option<String>,
    description: String,
) -> GroundTruthIssue {
    GroundTruthIssue {
        issue_id,
        category,
        node,
        sim_time,
        block_id,
        description,
    }
}

/// Problems with the field before anything ran.
pub fn setup_issues(world: &WorldState) -> Vec<GroundTruthIssue> {
    let mut out = Vec::new();
    for b in &world.config.blocks {
        let kind = world.config.zone(&b.initial_zone).map(|z| z.kind);
        if kind != Some(ZoneKind::Load) {
            out.push(issue(
                format!("setup:{}", b.id),
                IssueCategory::SetupAnomaly,
                None,
                world.clock,
                Some(b.id.clone()),
                format!("block {} starts outside every load zone", b.id),
            ));
        }
    }
    if world.shelf_at_target() {
        out.push(issue(
            "setup:shelf".into(),
            IssueCategory::SetupAnomaly,
            None,
            world.clock,
            None,
            "shelf already sits in its target zone".into(),
        ));
    }
    out
}

/// Issues caused by the world events from index `events_from` on and by the
/// trace window `trace`, judged against the current world state.
pub fn checkpoint_issues(
    world: &WorldState,
    trace: &[TraceEvent],
    events_from: usize,
) -> Vec<GroundTruthIssue> {
    let events = &world.events[events_from.min(world.events.len())..];
    let mut out = Vec::new();
    let mut touched = BTreeSet::new();

    for e in events {
        touched.extend(e.blocks.iter().cloned());
        for f in &e.faults {
            let (category, what) = match f {
                FaultKind::PickFail => (IssueCategory::PickFailure, "grasp failed"),
                FaultKind::DropInTransit => (IssueCategory::DropInTransit, "block dropped while driving"),
                FaultKind::MisRotate => (IssueCategory::MisRotation, "rotated the wrong blocks"),
                FaultKind::NavStall => (IssueCategory::NavigationStall, "navigation stalled"),
                // the resulting block position is judged from the state below
                FaultKind::PlaceOffsetPartial | FaultKind::PlaceOffsetOutside => continue,
            };
            let block_id = (*f == FaultKind::DropInTransit)
                .then(|| e.blocks.first().cloned())
                .flatten();
            out.push(issue(
                format!("{f:?}:{}", e.index),
                category,
                e.node.clone(),
                e.sim_time,
                block_id,
                format!("{what} during {} in {}", e.action.name(), e.zone),
            ));
        }
        if matches!(e.action, ActionCall::PickBlocks { .. })
            && e.status == ActionStatus::Failure
            && e.faults.is_empty()
        {
            out.push(issue(
                format!("EmptyPick:{}", e.index),
                IssueCategory::PickFailure,
                e.node.clone(),
                e.sim_time,
                None,
                format!("nothing left to pick in {}", e.zone),
            ));
        }
        let limit = world.config.time_limit;
        if e.start_time <= limit && e.sim_time > limit {
            out.push(issue(
                "overtime".into(),
                IssueCategory::TimeOverrun,
                e.node.clone(),
                e.sim_time,
                None,
                format!("time limit of {limit} s exceeded"),
            ));
        }
    }

    for b in &world.blocks {
        if !touched.contains(&b.block_id) {
            continue;
        }
        let last = last_event_with(&world.events, &b.block_id);
        match &b.location {
            BlockLocation::OutsideAllZones => out.push(issue(
                format!("outside:{}", b.block_id),
                IssueCategory::BlockOutsideZones,
                last.and_then(|e| e.node.clone()),
                last.map_or(world.clock, |e| e.sim_time),
                Some(b.block_id.clone()),
                format!("block {} lies outside every zone", b.block_id),
            )),
            BlockLocation::InZone { zone, .. }
                if world.config.is_unload(zone) && b.orientation == Orientation::OrangeUp =>
            {
                out.push(issue(
                    format!("misoriented:{}", b.block_id),
                    IssueCategory::MisorientedPlacement,
                    last.and_then(|e| e.node.clone()),
                    last.map_or(world.clock, |e| e.sim_time),
                    Some(b.block_id.clone()),
                    format!("block {} placed orange side up in {zone}", b.block_id),
                ))
            }
            _ => {}
        }
    }

    for t in trace {
        if let (TraceKind::Returned(TickStatus::Success), Some(detail)) = (t.event, &t.detail) {
            if CursorSpan::parse(detail).is_some_and(|c| c.is_vacuous()) {
                out.push(issue(
                    format!("vacuous:{}:{}", t.node_id, t.sequence_no),
                    IssueCategory::VacuousSuccess,
                    Some(t.node_id.clone()),
                    t.sim_time,
                    None,
                    format!("{} reported success without running any step", t.node_id),
                ));
            }
        }
    }
    out
}

/// Every issue of the episode so far; with `final_scan` also the end state
/// problems (blocks left behind, shelf not moved).
pub fn ground_truth_issues(
    world: &WorldState,
    trace: &[TraceEvent],
    final_scan: bool,
) -> Vec<GroundTruthIssue> {
    let mut out = checkpoint_issues(world, trace, 0);
    if final_scan {
        for b in &world.blocks {
            let delivered = matches!(&b.location, BlockLocation::InZone { zone, .. } if world.config.is_unload(zone));
            if !delivered && b.location != BlockLocation::OutsideAllZones {
                out.push(issue(
                    format!("undelivered:{}", b.block_id),
                    IssueCategory::BlockIncorrectlyPlaced,
                    last_event_with(&world.events, &b.block_id).and_then(|e| e.node.clone()),
                    world.clock,
                    Some(b.block_id.clone()),
                    format!("block {} never reached an unload zone", b.block_id),
                ));
            }
        }
        if !world.shelf_at_target() {
            out.push(issue(
                "shelf".into(),
                IssueCategory::ShelfNotRelocated,
                None,
                world.clock,
                None,
                "shelf was not moved to its target zone".into(),
            ));
        }
    }
    out
}

/// Vacuous `CursorSequence` successes in a trace.
pub fn vacuous_cursor_issues(trace: &[TraceEvent]) -> Vec<NodeId> {
    trace
        .iter()
        .filter(|t| t.event == TraceKind::Returned(TickStatus::Success))
        .filter(|t| {
            t.detail
                .as_deref()
                .and_then(CursorSpan::parse)
                .is_some_and(|c| c.is_vacuous())
        })
        .map(|t| t.node_id.clone())
        .collect()
}

fn last_event_with<'a>(events: &'a [WorldEvent], block: &str) -> Option<&'a WorldEvent> {
    events.iter().rev().find(|e| e.blocks.iter().any(|b| b == block))
}
