//! Actors: rewrite the behavior tree between episodes.
//!
//! Every actor returns a tree that validates against the node library. When
//! no valid candidate can be produced the current tree is returned unchanged
//! together with [`ActorError::RefinementFailed`].

mod mutate;
mod remote;
mod rules;
mod treeops;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::{BTNode, BehaviorTree, NodeId, NodeKind, TickStatus, TraceEvent, TraceKind};
use crate::critic::CriticFeedback;
use crate::dsl::{validate, NodeLibrary, TreeDiff};
use crate::sim::{BlockInfoEntry, FieldConfig, ShelfSpec, ZoneKind};

pub use mutate::ScoreOnlyActor;
pub use remote::RemoteActor;
pub use rules::{rule_based_repair, Patch, RuleBasedRepairActor, RuleSet};
pub use treeops::zone_context;

pub const TASK_DEFINITION: &str = "\
Transport every block from the load zones to an unload zone, in batches of at most four. \
A block counts only if it ends up touching an unload zone with its blue face up; blocks \
lying orange face up must be flipped with RotateBlocks before placing. Relocate the movable \
shelf to its target zone. Finish by returning to the start/finish area before the time limit. \
Every second spent costs one point.";

/// Symbolic description of the field given to the actor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    /// Load zones with their block ids in pick order.
    pub load_zones: Vec<(String, Vec<String>)>,
    pub unload_zones: Vec<String>,
    pub start_zone: String,
    pub shelf: ShelfSpec,
    pub time_limit: f64,
}

impl EnvironmentSpec {
    pub fn from_field(field: &FieldConfig) -> Self {
        EnvironmentSpec {
            load_zones: field
                .zones_of(ZoneKind::Load)
                .map(|z| {
                    let ids = field.initial_blocks_in(&z.id).iter().map(|b| b.id.clone()).collect();
                    (z.id.clone(), ids)
                })
                .collect(),
            unload_zones: field.zones_of(ZoneKind::Unload).map(|z| z.id.clone()).collect(),
            start_zone: field.start_zone().id.clone(),
            shelf: field.shelf.clone(),
            time_limit: field.time_limit,
        }
    }

    pub fn is_load(&self, zone: &str) -> bool {
        self.load_zones.iter().any(|(z, _)| z == zone)
    }

    pub fn is_unload(&self, zone: &str) -> bool {
        self.unload_zones.iter().any(|z| z == zone)
    }

    /// Load zone, batch number and carry slot of a block.
    pub fn slot_of(&self, block: &str) -> Option<(&str, usize, usize)> {
        self.load_zones.iter().find_map(|(z, ids)| {
            ids.iter()
                .position(|b| b == block)
                .map(|i| (z.as_str(), i / 4, i % 4))
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (z, ids) in &self.load_zones {
            let _ = writeln!(out, "Load zone {z}: blocks {} (pick order)", ids.join(", "));
        }
        let _ = writeln!(out, "Unload zones: {}", self.unload_zones.join(", "));
        let _ = writeln!(out, "Start/finish zone: {}", self.start_zone);
        let _ = writeln!(
            out,
            "Shelf: in {}, must go to {}",
            self.shelf.initial_zone, self.shelf.target_zone
        );
        let _ = write!(out, "Time limit: {} s", self.time_limit);
        out
    }
}

/// What the robot itself knows about the last episode, read off the trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionSummary {
    /// Blocks the gripper released in unload zones, in order.
    pub placed: Vec<String>,
    pub elapsed: f64,
    pub returned_to_start: bool,
}

impl ExecutionSummary {
    pub fn from_trace(tree: &BehaviorTree, trace: &[TraceEvent]) -> Self {
        let mut s = ExecutionSummary {
            elapsed: trace.last().map_or(0.0, |t| t.sim_time),
            ..Default::default()
        };
        for t in trace {
            if t.event != TraceKind::Returned(TickStatus::Success) {
                continue;
            }
            let name = tree.node(&t.node_id).and_then(|n| n.kind.action_name());
            if name == Some("ReturnToStart") {
                s.returned_to_start = true;
            }
            if let Some(rest) = t.detail.as_deref().and_then(|d| d.split_once(" placed ")) {
                let ids = rest.1.split_whitespace().next().unwrap_or("");
                s.placed.extend(ids.split(',').filter(|x| !x.is_empty()).map(String::from));
            }
        }
        s
    }
}

/// Everything an actor is given besides feedback, score and memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorContext {
    pub task_definition: String,
    pub environment: EnvironmentSpec,
    pub library: NodeLibrary,
    pub current_bt: BehaviorTree,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_info: Option<Vec<BlockInfoEntry>>,
    pub trace: Vec<TraceEvent>,
    pub summary: ExecutionSummary,
}

impl ActorContext {
    pub fn new(
        field: &FieldConfig,
        library: NodeLibrary,
        current_bt: BehaviorTree,
        trace: Vec<TraceEvent>,
        block_info: Option<Vec<BlockInfoEntry>>,
    ) -> Self {
        let summary = ExecutionSummary::from_trace(&current_bt, &trace);
        ActorContext {
            task_definition: TASK_DEFINITION.to_string(),
            environment: EnvironmentSpec::from_field(field),
            library,
            current_bt,
            block_info,
            trace,
            summary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub episode_index: u32,
    pub final_feedback: Option<CriticFeedback>,
    pub real_score: i64,
    /// Source of the tree that was executed in that episode.
    pub executed_bt: String,
    pub summary: ExecutionSummary,
    pub bt_diff: TreeDiff,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActorMemory {
    pub entries: Vec<MemoryEntry>,
}

impl ActorMemory {
    pub fn best_score(&self) -> Option<i64> {
        self.entries.iter().map(|e| e.real_score).max()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ActorError {
    #[error("refinement failed: {0}")]
    RefinementFailed(String),
    #[error("actor timed out: {0}")]
    Timeout(String),
    #[error("malformed actor reply: {0}")]
    MalformedReply(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub tree: BehaviorTree,
    /// Short label of the change that was made, if any.
    pub patch: Option<String>,
    pub error: Option<ActorError>,
}

impl Refinement {
    pub fn identity(ctx: &ActorContext) -> Self {
        Refinement {
            tree: ctx.current_bt.clone(),
            patch: None,
            error: None,
        }
    }

    pub fn failed(ctx: &ActorContext, error: ActorError) -> Self {
        Refinement {
            error: Some(error),
            ..Refinement::identity(ctx)
        }
    }

    /// Accepts `candidate` only if it validates.
    pub fn checked(ctx: &ActorContext, mut candidate: BehaviorTree, patch: Option<String>) -> Self {
        let report = validate(&candidate, &ctx.library);
        if !report.is_valid() {
            return Refinement::failed(ctx, ActorError::RefinementFailed(report.to_string()));
        }
        candidate.reset();
        Refinement {
            tree: candidate,
            patch,
            error: None,
        }
    }
}

pub trait Actor {
    fn name(&self) -> String;

    /// Reseeds any randomness; called before each episode.
    fn begin_episode(&mut self, _episode_seed: u64) {}

    fn refine(
        &mut self,
        ctx: &ActorContext,
        feedback: Option<&CriticFeedback>,
        real_score: i64,
        memory: &ActorMemory,
    ) -> Refinement;
}

/// Strategy-free starting policy: one trip between the first load and
/// unload zones, then home.
pub fn initial_tree(env: &EnvironmentSpec) -> BehaviorTree {
    let load = env.load_zones.first().map_or("L1", |(z, _)| z.as_str());
    let unload = env.unload_zones.first().map_or("U1", String::as_str);
    let ids = ["goto_load", "pick", "goto_unload", "place", "home"];
    let mut nodes = vec![BTNode::new(
        "root",
        NodeKind::Sequence,
        ids.iter().map(|s| NodeId::new(*s)).collect(),
    )];
    nodes.push(BTNode::new("goto_load", NodeKind::action("NavigateTo", &[("zone", load)]), vec![]));
    nodes.push(BTNode::new("pick", NodeKind::action("PickBlocks", &[("count", "4")]), vec![]));
    nodes.push(BTNode::new(
        "goto_unload",
        NodeKind::action("NavigateTo", &[("zone", unload)]),
        vec![],
    ));
    nodes.push(BTNode::new("place", NodeKind::action("PlaceBlocks", &[]), vec![]));
    nodes.push(BTNode::new("home", NodeKind::action("ReturnToStart", &[]), vec![]));
    BehaviorTree::from_nodes(nodes)
}
