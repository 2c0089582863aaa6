//! Structural edit lists between two trees.
//!
//! Nodes are matched by id first. An unmatched new node that sits at the
//! same position (same matched parent, same child index) as an unmatched old
//! node of the same kind is treated as a rename of it. Everything else is
//! expressed as deletes, inserts, kind/parameter changes and moves.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::{BTNode, BehaviorTree, NodeId, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum Edit {
    /// New childless node; `parent: None` makes it the root.
    InsertNode {
        target: NodeId,
        kind: NodeKind,
        parent: Option<NodeId>,
        index: usize,
    },
    /// Removes one node. Its children stay in the table, detached, until a
    /// later edit moves or deletes them.
    DeleteNode { target: NodeId },
    /// Changes the kind of a node and optionally its id.
    ReplaceNode {
        target: NodeId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        new_id: Option<NodeId>,
        kind: NodeKind,
    },
    /// Moves a node to `index` under `parent` (`None` = becomes the root).
    ReparentNode {
        target: NodeId,
        parent: Option<NodeId>,
        index: usize,
    },
    /// Sets (`Some`) or removes (`None`) one parameter. `max_attempts` of a
    /// retry decorator is addressed the same way.
    ChangeParam {
        target: NodeId,
        key: String,
        value: Option<String>,
    },
}

impl Edit {
    pub fn target(&self) -> &NodeId {
        match self {
            Edit::InsertNode { target, .. }
            | Edit::DeleteNode { target }
            | Edit::ReplaceNode { target, .. }
            | Edit::ReparentNode { target, .. }
            | Edit::ChangeParam { target, .. } => target,
        }
    }

    pub fn op_name(&self) -> &'static str {
        match self {
            Edit::InsertNode { .. } => "InsertNode",
            Edit::DeleteNode { .. } => "DeleteNode",
            Edit::ReplaceNode { .. } => "ReplaceNode",
            Edit::ReparentNode { .. } => "ReparentNode",
            Edit::ChangeParam { .. } => "ChangeParam",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeDiff {
    pub edits: Vec<Edit>,
}

impl TreeDiff {
    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn count(&self, op: &str) -> usize {
        self.edits.iter().filter(|e| e.op_name() == op).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("edit {index} ({op}) targets missing node {node}")]
    MissingNode {
        index: usize,
        op: &'static str,
        node: NodeId,
    },
    #[error("edit {index} inserts {node}, which already exists")]
    AlreadyExists { index: usize, node: NodeId },
    #[error("edit {index}: cannot set `{key}` on {node}")]
    BadParam {
        index: usize,
        node: NodeId,
        key: String,
    },
    #[error("edits leave the tree without a root")]
    NoRoot,
}

struct Work {
    root: Option<NodeId>,
    nodes: BTreeMap<NodeId, BTNode>,
}

impl Work {
    fn from_tree(t: &BehaviorTree) -> Self {
        Work {
            root: Some(t.root.clone()),
            nodes: t.nodes.clone(),
        }
    }

    fn position(&self, id: &NodeId) -> Option<(Option<NodeId>, usize)> {
        if self.root.as_ref() == Some(id) {
            return Some((None, 0));
        }
        self.nodes.values().find_map(|n| {
            n.children
                .iter()
                .position(|c| c == id)
                .map(|i| (Some(n.id.clone()), i))
        })
    }

    fn detach(&mut self, id: &NodeId) {
        if self.root.as_ref() == Some(id) {
            self.root = None;
        }
        for n in self.nodes.values_mut() {
            n.children.retain(|c| c != id);
        }
    }

    fn attach(&mut self, id: &NodeId, parent: &Option<NodeId>, index: usize) -> bool {
        match parent {
            None => {
                self.root = Some(id.clone());
                true
            }
            Some(p) => match self.nodes.get_mut(p) {
                Some(pn) => {
                    let at = index.min(pn.children.len());
                    pn.children.insert(at, id.clone());
                    true
                }
                None => false,
            },
        }
    }

    fn apply(&mut self, index: usize, edit: &Edit) -> Result<(), DiffError> {
        let missing = |node: &NodeId| DiffError::MissingNode {
            index,
            op: edit.op_name(),
            node: node.clone(),
        };
        match edit {
            Edit::InsertNode {
                target,
                kind,
                parent,
                index: at,
            } => {
                if self.nodes.contains_key(target) {
                    return Err(DiffError::AlreadyExists {
                        index,
                        node: target.clone(),
                    });
                }
                self.nodes
                    .insert(target.clone(), BTNode::new(target.clone(), kind.clone(), vec![]));
                if !self.attach(target, parent, *at) {
                    return Err(missing(parent.as_ref().expect("attach fails only with a parent")));
                }
            }
            Edit::DeleteNode { target } => {
                if self.nodes.remove(target).is_none() {
                    return Err(missing(target));
                }
                self.detach(target);
            }
            Edit::ReplaceNode {
                target,
                new_id,
                kind,
            } => {
                let mut node = self.nodes.remove(target).ok_or_else(|| missing(target))?;
                node.kind = kind.clone();
                if let Some(new_id) = new_id {
                    if self.nodes.contains_key(new_id) {
                        return Err(DiffError::AlreadyExists {
                            index,
                            node: new_id.clone(),
                        });
                    }
                    node.id = new_id.clone();
                    if self.root.as_ref() == Some(target) {
                        self.root = Some(new_id.clone());
                    }
                    for n in self.nodes.values_mut() {
                        for c in n.children.iter_mut() {
                            if c == target {
                                *c = new_id.clone();
                            }
                        }
                    }
                }
                self.nodes.insert(node.id.clone(), node);
            }
            Edit::ReparentNode {
                target,
                parent,
                index: at,
            } => {
                if !self.nodes.contains_key(target) {
                    return Err(missing(target));
                }
                self.detach(target);
                if !self.attach(target, parent, *at) {
                    return Err(missing(parent.as_ref().expect("attach fails only with a parent")));
                }
            }
            Edit::ChangeParam { target, key, value } => {
                let node = self.nodes.get_mut(target).ok_or_else(|| missing(target))?;
                let bad = || DiffError::BadParam {
                    index,
                    node: target.clone(),
                    key: key.clone(),
                };
                match &mut node.kind {
                    NodeKind::Action { params, .. } | NodeKind::Condition { params, .. } => {
                        match value {
                            Some(v) => params.insert(key.clone(), v.clone()),
                            None => params.remove(key),
                        };
                    }
                    NodeKind::RetryUntilSuccessful { max_attempts } if key == "max_attempts" => {
                        *max_attempts = value
                            .as_deref()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(bad)?;
                    }
                    _ => return Err(bad()),
                }
            }
        }
        Ok(())
    }

    fn into_tree(self, metadata: String) -> Result<BehaviorTree, DiffError> {
        Ok(BehaviorTree {
            root: self.root.ok_or(DiffError::NoRoot)?,
            nodes: self.nodes,
            metadata,
        })
    }
}

/// Applies `diff` to `old`. The metadata of `old` is kept.
pub fn apply(old: &BehaviorTree, diff: &TreeDiff) -> Result<BehaviorTree, DiffError> {
    let mut work = Work::from_tree(old);
    for (i, e) in diff.edits.iter().enumerate() {
        work.apply(i, e)?;
    }
    work.into_tree(old.metadata.clone())
}

fn same_kind_class(a: &NodeKind, b: &NodeKind) -> bool {
    match (a, b) {
        (NodeKind::Action { name: x, .. }, NodeKind::Action { name: y, .. })
        | (NodeKind::Condition { name: x, .. }, NodeKind::Condition { name: y, .. }) => x == y,
        (NodeKind::RetryUntilSuccessful { .. }, NodeKind::RetryUntilSuccessful { .. }) => true,
        _ => std::mem::discriminant(a) == std::mem::discriminant(b),
    }
}

fn param_edits(target: &NodeId, old: &NodeKind, new: &NodeKind) -> Vec<Edit> {
    let change = |key: &str, value: Option<String>| Edit::ChangeParam {
        target: target.clone(),
        key: key.to_string(),
        value,
    };
    match (old, new) {
        (NodeKind::Action { params: a, .. }, NodeKind::Action { params: b, .. })
        | (NodeKind::Condition { params: a, .. }, NodeKind::Condition { params: b, .. }) => {
            let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
            keys.into_iter()
                .filter(|k| a.get(*k) != b.get(*k))
                .map(|k| change(k, b.get(k).cloned()))
                .collect()
        }
        (
            NodeKind::RetryUntilSuccessful { max_attempts: a },
            NodeKind::RetryUntilSuccessful { max_attempts: b },
        ) if a != b => vec![change("max_attempts", Some(b.to_string()))],
        _ => Vec::new(),
    }
}

/// Ordered edit list turning `old` into `new`.
pub fn diff(old: &BehaviorTree, new: &BehaviorTree) -> TreeDiff {
    let new_parent: BTreeMap<&NodeId, (&NodeId, usize)> = new
        .nodes
        .values()
        .flat_map(|n| n.children.iter().enumerate().map(move |(i, c)| (c, (&n.id, i))))
        .collect();
    let new_order = new.preorder();

    // rename pairs (old id -> new id), found top-down
    let mut renames: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut claimed: BTreeSet<NodeId> = BTreeSet::new();
    let to_old = |id: &NodeId, renames: &BTreeMap<NodeId, NodeId>| -> Option<NodeId> {
        if old.nodes.contains_key(id) {
            Some(id.clone())
        } else {
            renames
                .iter()
                .find(|(_, n)| *n == id)
                .map(|(o, _)| o.clone())
        }
    };
    for id in &new_order {
        if old.nodes.contains_key(id) {
            continue;
        }
        let candidate = match new_parent.get(id) {
            None => Some(old.root.clone()),
            Some((p, i)) => to_old(p, &renames)
                .and_then(|op| old.nodes.get(&op))
                .and_then(|op| op.children.get(*i).cloned()),
        };
        if let Some(o) = candidate {
            if !new.nodes.contains_key(&o)
                && !claimed.contains(&o)
                && old
                    .nodes
                    .get(&o)
                    .is_some_and(|on| same_kind_class(&on.kind, &new.nodes[id].kind))
            {
                claimed.insert(o.clone());
                renames.insert(o, id.clone());
            }
        }
    }

    let mut work = Work::from_tree(old);
    let mut edits = Vec::new();
    let mut emit = |work: &mut Work, e: Edit| {
        work.apply(0, &e).expect("generated edits are applicable");
        edits.push(e);
    };

    for (o, n) in &renames {
        emit(
            &mut work,
            Edit::ReplaceNode {
                target: o.clone(),
                new_id: Some(n.clone()),
                kind: new.nodes[n].kind.clone(),
            },
        );
    }

    for id in old.preorder().into_iter().chain(old.nodes.keys().cloned()) {
        if !new.nodes.contains_key(&id) && !renames.contains_key(&id) && work.nodes.contains_key(&id)
        {
            emit(&mut work, Edit::DeleteNode { target: id });
        }
    }

    for id in &new_order {
        let target = &new.nodes[id];
        let desired = new_parent.get(id).map(|(p, i)| ((*p).clone(), *i));
        let (dparent, dindex) = match desired {
            Some((p, i)) => (Some(p), i),
            None => (None, 0),
        };
        match work.nodes.get(id) {
            None => emit(
                &mut work,
                Edit::InsertNode {
                    target: id.clone(),
                    kind: target.kind.clone(),
                    parent: dparent,
                    index: dindex,
                },
            ),
            Some(cur) => {
                if !same_kind_class(&cur.kind, &target.kind) {
                    emit(
                        &mut work,
                        Edit::ReplaceNode {
                            target: id.clone(),
                            new_id: None,
                            kind: target.kind.clone(),
                        },
                    );
                } else {
                    for e in param_edits(id, &cur.kind.clone(), &target.kind) {
                        emit(&mut work, e);
                    }
                }
                if work.position(id) != Some((dparent.clone(), dindex)) {
                    emit(
                        &mut work,
                        Edit::ReparentNode {
                            target: id.clone(),
                            parent: dparent,
                            index: dindex,
                        },
                    );
                }
            }
        }
    }

    TreeDiff { edits }
}
