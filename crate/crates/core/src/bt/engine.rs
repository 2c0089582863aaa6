use thiserror::Error;

use super::{BehaviorTree, NodeId, NodeKind, TickStatus, TraceEvent, TraceKind};
use crate::exec::{ActionExecutor, LeafKind};

/// Upper bound on re-ticks of a `Running` checkpoint before giving up.
const MAX_RUNNING_TICKS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TickError {
    #[error("node {node}: executor does not know {leaf} `{name}`")]
    UnknownAction {
        node: NodeId,
        leaf: &'static str,
        name: String,
    },
    #[error("corrupt tree at {node}: {reason}")]
    CorruptTree { node: NodeId, reason: String },
    #[error("{0} is not a direct child of the root")]
    NotACheckpointNode(NodeId),
    #[error("{node} still running after {ticks} ticks")]
    StuckRunning { node: NodeId, ticks: usize },
}

/// Accumulates trace events with a monotone sequence number.
#[derive(Debug, Clone, Default)]
pub struct TraceRecorder {
    next_seq: u64,
    events: Vec<TraceEvent>,
}

impl TraceRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts numbering at `seq`, so several windows of one episode can be
    /// concatenated into a single strictly increasing trace.
    pub fn starting_at(seq: u64) -> Self {
        TraceRecorder {
            next_seq: seq,
            events: Vec::new(),
        }
    }

    fn push(&mut self, node: &NodeId, event: TraceKind, sim_time: f64, detail: Option<String>) {
        self.events.push(TraceEvent {
            sequence_no: self.next_seq,
            node_id: node.clone(),
            event,
            sim_time,
            detail,
        });
        self.next_seq += 1;
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }
}

/// Ticks the whole tree once from the root.
pub fn tick(
    tree: &mut BehaviorTree,
    exec: &mut dyn ActionExecutor,
) -> Result<(TickStatus, Vec<TraceEvent>), TickError> {
    let mut rec = TraceRecorder::new();
    let root = tree.root.clone();
    let status = tick_node(tree, &root, exec, &mut rec)?;
    Ok((status, rec.into_events()))
}

/// Runs one checkpoint window: ticks `subtree_root` until it returns a
/// terminal status. `subtree_root` must be a direct child of the root, or
/// the root itself when the root is a leaf.
pub fn execute_subtree(
    tree: &mut BehaviorTree,
    subtree_root: &NodeId,
    exec: &mut dyn ActionExecutor,
    rec: &mut TraceRecorder,
) -> Result<TickStatus, TickError> {
    let root = tree
        .root_node()
        .ok_or_else(|| corrupt(&tree.root, "root missing from node table"))?;
    let is_checkpoint = root.children.contains(subtree_root)
        || (root.children.is_empty() && *subtree_root == root.id);
    if !is_checkpoint {
        return Err(TickError::NotACheckpointNode(subtree_root.clone()));
    }
    for _ in 0..MAX_RUNNING_TICKS {
        let status = tick_node(tree, subtree_root, exec, rec)?;
        if status.is_terminal() {
            return Ok(status);
        }
    }
    Err(TickError::StuckRunning {
        node: subtree_root.clone(),
        ticks: MAX_RUNNING_TICKS,
    })
}

fn corrupt(node: &NodeId, reason: &str) -> TickError {
    TickError::CorruptTree {
        node: node.clone(),
        reason: reason.to_string(),
    }
}

/// Ticks a single node (and whatever it ticks below it).
///
/// Semantics:
/// - `Sequence` ticks children left to right and stops at the first
///   `Failure`/`Running`. When it returns `Success` it clears the runtime
///   state of its whole subtree.
/// - `Fallback` is the dual and stops at the first `Success`/`Running`.
/// - `CursorSequence` starts at its stored cursor, advances it on each child
///   `Success` and leaves it in place on `Failure`/`Running`. The cursor is
///   never rewound by the node itself, so a completed cursor (at the end)
///   returns `Success` without ticking any child until something resets it.
/// - `RetryUntilSuccessful` re-ticks its child after `Failure` until
///   `max_attempts` failures in total; the counter is cleared whenever the
///   decorator returns a terminal status.
pub fn tick_node(
    tree: &mut BehaviorTree,
    id: &NodeId,
    exec: &mut dyn ActionExecutor,
    rec: &mut TraceRecorder,
) -> Result<TickStatus, TickError> {
    let node = tree
        .nodes
        .get(id)
        .ok_or_else(|| corrupt(id, "dangling node reference"))?;
    let kind = node.kind.clone();
    let children = node.children.clone();
    for c in &children {
        if !tree.nodes.contains_key(c) {
            return Err(corrupt(id, &format!("child {c} does not exist")));
        }
    }

    match &kind {
        NodeKind::Action { .. } | NodeKind::Condition { .. } if !children.is_empty() => {
            return Err(corrupt(id, "leaf node has children"));
        }
        NodeKind::RetryUntilSuccessful { max_attempts } => {
            if children.len() != 1 {
                return Err(corrupt(id, "decorator must have exactly one child"));
            }
            if *max_attempts == 0 {
                return Err(corrupt(id, "max_attempts must be positive"));
            }
        }
        NodeKind::Sequence | NodeKind::Fallback | NodeKind::CursorSequence
            if children.is_empty() =>
        {
            return Err(corrupt(id, "composite node has no children"));
        }
        _ => {}
    }

    rec.push(id, TraceKind::Entered, exec.sim_time(), None);

    let (status, detail) = match kind {
        NodeKind::Action { name, params } => run_leaf(exec, id, LeafKind::Action, name, &params)?,
        NodeKind::Condition { name, params } => {
            run_leaf(exec, id, LeafKind::Condition, name, &params)?
        }
        NodeKind::Sequence => {
            let mut status = TickStatus::Success;
            for c in &children {
                let s = tick_node(tree, c, exec, rec)?;
                if s != TickStatus::Success {
                    status = s;
                    break;
                }
            }
            if status == TickStatus::Success {
                tree.reset_subtree(id);
            }
            (status, None)
        }
        NodeKind::Fallback => {
            let mut status = TickStatus::Failure;
            for c in &children {
                let s = tick_node(tree, c, exec, rec)?;
                if s != TickStatus::Failure {
                    status = s;
                    break;
                }
            }
            (status, None)
        }
        NodeKind::CursorSequence => {
            let mut cursor = tree.nodes[id].state.cursor;
            let start = cursor;
            if cursor > children.len() {
                return Err(corrupt(id, "cursor past the end of the child list"));
            }
            let mut status = TickStatus::Success;
            while cursor < children.len() {
                let s = tick_node(tree, &children[cursor], exec, rec)?;
                match s {
                    TickStatus::Success => cursor += 1,
                    other => {
                        status = other;
                        break;
                    }
                }
            }
            tree.nodes.get_mut(id).expect("node exists").state.cursor = cursor;
            let detail = CursorSpan {
                start,
                end: cursor,
                len: children.len(),
            };
            (status, Some(detail.to_string()))
        }
        NodeKind::RetryUntilSuccessful { max_attempts } => {
            let child = &children[0];
            let status = loop {
                let s = tick_node(tree, child, exec, rec)?;
                let state = &mut tree.nodes.get_mut(id).expect("node exists").state;
                match s {
                    TickStatus::Success => {
                        state.attempts = 0;
                        break TickStatus::Success;
                    }
                    TickStatus::Running => break TickStatus::Running,
                    TickStatus::Failure => {
                        state.attempts += 1;
                        if state.attempts >= max_attempts {
                            state.attempts = 0;
                            break TickStatus::Failure;
                        }
                    }
                }
            };
            (status, None)
        }
    };

    rec.push(id, TraceKind::Returned(status), exec.sim_time(), detail);
    Ok(status)
}

/// Cursor movement of one `CursorSequence` tick, recorded as the detail of
/// its `Returned` trace event as `cursor <start>-><end>/<len>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CursorSpan {
    pub start: usize,
    pub end: usize,
    pub len: usize,
}

impl CursorSpan {
    pub fn parse(detail: &str) -> Option<Self> {
        let rest = detail.strip_prefix("cursor ")?;
        let (start, rest) = rest.split_once("->")?;
        let (end, len) = rest.split_once('/')?;
        Some(CursorSpan {
            start: start.parse().ok()?,
            end: end.parse().ok()?,
            len: len.parse().ok()?,
        })
    }

    /// Returned `Success` without ticking a single child.
    pub fn is_vacuous(&self) -> bool {
        self.start == self.len
    }
}

impl std::fmt::Display for CursorSpan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cursor {}->{}/{}", self.start, self.end, self.len)
    }
}

fn run_leaf(
    exec: &mut dyn ActionExecutor,
    id: &NodeId,
    leaf: LeafKind,
    name: String,
    params: &super::Params,
) -> Result<(TickStatus, Option<String>), TickError> {
    if !exec.supports(leaf, &name) {
        return Err(TickError::UnknownAction {
            node: id.clone(),
            leaf: leaf.label(),
            name,
        });
    }
    let outcome = exec.run_leaf(id, leaf, &name, params);
    Ok((outcome.status, outcome.detail))
}
