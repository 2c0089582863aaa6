//! Behavior tree data model and tick engine.
//!
//! A [`BehaviorTree`] is a flat node table keyed by [`NodeId`] with a single
//! root. Composite nodes keep small pieces of runtime state (the cursor of a
//! `CursorSequence`, the attempt counter of a `RetryUntilSuccessful`) inside
//! the node so the state survives between ticks and between checkpoint
//! windows of one episode.

mod engine;
pub mod scripted;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use engine::{execute_subtree, tick, tick_node, CursorSpan, TickError, TraceRecorder};

/// Result of ticking a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TickStatus {
    Success,
    Failure,
    Running,
}

impl TickStatus {
    pub fn is_terminal(self) -> bool {
        !matches!(self, TickStatus::Running)
    }
}

impl fmt::Display for TickStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TickStatus::Success => "Success",
            TickStatus::Failure => "Failure",
            TickStatus::Running => "Running",
        };
        f.write_str(s)
    }
}

/// Identifier of a node, unique within one tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

/// Leaf parameters. Values stay textual; the node library decides how each
/// one is typed.
pub type Params = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum NodeKind {
    Sequence,
    Fallback,
    CursorSequence,
    RetryUntilSuccessful { max_attempts: u32 },
    Action { name: String, params: Params },
    Condition { name: String, params: Params },
}

impl NodeKind {
    pub fn action(name: &str, params: &[(&str, &str)]) -> Self {
        NodeKind::Action {
            name: name.to_string(),
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn condition(name: &str, params: &[(&str, &str)]) -> Self {
        NodeKind::Condition {
            name: name.to_string(),
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, NodeKind::Action { .. } | NodeKind::Condition { .. })
    }

    /// Keyword used by the textual form.
    pub fn keyword(&self) -> &'static str {
        match self {
            NodeKind::Sequence => "Sequence",
            NodeKind::Fallback => "Fallback",
            NodeKind::CursorSequence => "CursorSequence",
            NodeKind::RetryUntilSuccessful { .. } => "RetryUntilSuccessful",
            NodeKind::Action { .. } => "Action",
            NodeKind::Condition { .. } => "Condition",
        }
    }

    pub fn action_name(&self) -> Option<&str> {
        match self {
            NodeKind::Action { name, .. } => Some(name),
            _ => None,
        }
    }
}

/// Per-node runtime state. Only `CursorSequence` uses `cursor` and only
/// `RetryUntilSuccessful` uses `attempts`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeState {
    pub cursor: usize,
    pub attempts: u32,
}

impl RuntimeState {
    fn is_clear(&self) -> bool {
        *self == RuntimeState::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BTNode {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default)]
    pub children: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "RuntimeState::is_clear")]
    pub state: RuntimeState,
}

impl BTNode {
    pub fn new(id: impl Into<NodeId>, kind: NodeKind, children: Vec<NodeId>) -> Self {
        BTNode {
            id: id.into(),
            kind,
            children,
            state: RuntimeState::default(),
        }
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorTree {
    pub root: NodeId,
    pub nodes: BTreeMap<NodeId, BTNode>,
    #[serde(default)]
    pub metadata: String,
}

/// One entry of an execution trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub sequence_no: u64,
    pub node_id: NodeId,
    pub event: TraceKind,
    pub sim_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceKind {
    Entered,
    Returned(TickStatus),
}

impl BehaviorTree {
    /// Builds a tree from a node list; the first node is the root.
    pub fn from_nodes(nodes: Vec<BTNode>) -> Self {
        let root = nodes
            .first()
            .map(|n| n.id.clone())
            .unwrap_or_else(|| NodeId::new("root"));
        BehaviorTree {
            root,
            nodes: nodes.into_iter().map(|n| (n.id.clone(), n)).collect(),
            metadata: String::new(),
        }
    }

    pub fn node(&self, id: &NodeId) -> Option<&BTNode> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: &NodeId) -> Option<&mut BTNode> {
        self.nodes.get_mut(id)
    }

    pub fn root_node(&self) -> Option<&BTNode> {
        self.nodes.get(&self.root)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clears every cursor and attempt counter. Structure is untouched.
    pub fn reset(&mut self) {
        for node in self.nodes.values_mut() {
            node.state = RuntimeState::default();
        }
    }

    pub fn reset_subtree(&mut self, id: &NodeId) {
        for d in self.descendants(id) {
            if let Some(n) = self.nodes.get_mut(&d) {
                n.state = RuntimeState::default();
            }
        }
    }

    /// Equality of root, ids, kinds and child lists; runtime state and
    /// metadata are ignored.
    pub fn same_structure(&self, other: &BehaviorTree) -> bool {
        self.root == other.root
            && self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(other.nodes.iter()).all(|((ka, a), (kb, b))| {
                ka == kb && a.id == b.id && a.kind == b.kind && a.children == b.children
            })
    }

    pub fn parent_of(&self, id: &NodeId) -> Option<&NodeId> {
        self.nodes
            .values()
            .find(|n| n.children.contains(id))
            .map(|n| &n.id)
    }

    /// Pre-order walk starting at `id` (inclusive). Dangling references and
    /// repeated visits are skipped, so this terminates on malformed tables.
    pub fn descendants(&self, id: &NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![id.clone()];
        while let Some(cur) = stack.pop() {
            if !seen.insert(cur.clone()) {
                continue;
            }
            if let Some(node) = self.nodes.get(&cur) {
                for c in node.children.iter().rev() {
                    stack.push(c.clone());
                }
                out.push(cur);
            }
        }
        out
    }

    /// Node ids in pre-order from the root.
    pub fn preorder(&self) -> Vec<NodeId> {
        self.descendants(&self.root)
    }

    /// Ids of all `Action` nodes with the given action name.
    pub fn actions_named(&self, name: &str) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|id| self.nodes[id].kind.action_name() == Some(name))
            .collect()
    }

    /// Returns a fresh id derived from `base` that is not used in the tree.
    pub fn fresh_id(&self, base: &str) -> NodeId {
        let candidate = NodeId::new(base);
        if !self.nodes.contains_key(&candidate) {
            return candidate;
        }
        (1..)
            .map(|i| NodeId::new(format!("{base}_{i}")))
            .find(|c| !self.nodes.contains_key(c))
            .expect("unbounded id space")
    }

    /// Removes `id` and all of its descendants, detaching it from its
    /// parent. Removing the root is not allowed and returns false.
    pub fn remove_subtree(&mut self, id: &NodeId) -> bool {
        if *id == self.root || !self.nodes.contains_key(id) {
            return false;
        }
        if let Some(parent) = self.parent_of(id).cloned() {
            if let Some(p) = self.nodes.get_mut(&parent) {
                p.children.retain(|c| c != id);
            }
        }
        for d in self.descendants(id) {
            self.nodes.remove(&d);
        }
        true
    }

    /// Puts a new node `wrapper` where `id` used to be and makes `id` its
    /// only child.
    pub fn wrap(&mut self, id: &NodeId, wrapper: BTNode) {
        debug_assert!(wrapper.children.is_empty());
        let wid = wrapper.id.clone();
        match self.parent_of(id).cloned() {
            Some(parent) => {
                let p = self.nodes.get_mut(&parent).expect("parent exists");
                for c in p.children.iter_mut() {
                    if c == id {
                        *c = wid.clone();
                    }
                }
            }
            None => self.root = wid.clone(),
        }
        let mut wrapper = wrapper;
        wrapper.children = vec![id.clone()];
        self.nodes.insert(wid, wrapper);
    }
}
