use std::collections::BTreeMap;

use super::EnvironmentSpec;
use crate::bt::{BTNode, BehaviorTree, NodeId, NodeKind};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ZoneContext {
    /// Load zone most recently driven to before (or by) this node.
    pub load: Option<String>,
    /// Zone most recently driven to before (or by) this node.
    pub at: Option<String>,
}

/// Zone context of every node, following pre-order as a proxy for execution
/// order.
pub fn zone_context(tree: &BehaviorTree, env: &EnvironmentSpec) -> BTreeMap<NodeId, ZoneContext> {
    let mut ctx = ZoneContext::default();
    let mut out = BTreeMap::new();
    for id in tree.preorder() {
        let node = &tree.nodes[&id];
        if let NodeKind::Action { name, params } = &node.kind {
            if name == "NavigateTo" {
                if let Some(z) = params.get("zone") {
                    ctx.at = Some(z.clone());
                    if env.is_load(z) {
                        ctx.load = Some(z.clone());
                    }
                }
            } else if name == "ReturnToStart" {
                ctx.at = Some(env.start_zone.clone());
            }
        }
        out.insert(id, ctx.clone());
    }
    out
}

pub fn param<'a>(tree: &'a BehaviorTree, id: &NodeId, key: &str) -> Option<&'a str> {
    match &tree.node(id)?.kind {
        NodeKind::Action { params, .. } | NodeKind::Condition { params, .. } => {
            params.get(key).map(String::as_str)
        }
        _ => None,
    }
}

pub fn set_param(tree: &mut BehaviorTree, id: &NodeId, key: &str, value: &str) {
    if let Some(n) = tree.node_mut(id) {
        if let NodeKind::Action { params, .. } | NodeKind::Condition { params, .. } = &mut n.kind {
            params.insert(key.to_string(), value.to_string());
        }
    }
}

/// `PickBlocks` nodes executed in `zone`, in pre-order.
pub fn picks_in(tree: &BehaviorTree, env: &EnvironmentSpec, zone: &str) -> Vec<NodeId> {
    let ctx = zone_context(tree, env);
    tree.actions_named("PickBlocks")
        .into_iter()
        .filter(|id| ctx[id].at.as_deref() == Some(zone))
        .collect()
}

pub fn next_sibling(tree: &BehaviorTree, id: &NodeId) -> Option<NodeId> {
    let parent = tree.parent_of(id)?;
    let children = &tree.nodes[parent].children;
    let i = children.iter().position(|c| c == id)?;
    children.get(i + 1).cloned()
}

/// The `RotateBlocks` node directly following `pick`, if any.
pub fn rotate_after(tree: &BehaviorTree, pick: &NodeId) -> Option<NodeId> {
    next_sibling(tree, pick)
        .filter(|n| tree.nodes[n].kind.action_name() == Some("RotateBlocks"))
}

/// Removes `id`; composites left without children are removed as well.
pub fn delete_node(tree: &mut BehaviorTree, id: &NodeId) {
    let parent = tree.parent_of(id).cloned();
    if !tree.remove_subtree(id) {
        return;
    }
    if let Some(p) = parent {
        if tree.nodes[&p].children.is_empty() && p != tree.root {
            delete_node(tree, &p);
        }
    }
}

pub fn insert_after(tree: &mut BehaviorTree, anchor: &NodeId, node: BTNode) {
    let Some(parent) = tree.parent_of(anchor).cloned() else {
        return;
    };
    let id = node.id.clone();
    tree.nodes.insert(id.clone(), node);
    let children = &mut tree.nodes.get_mut(&parent).expect("parent exists").children;
    let i = children.iter().position(|c| c == anchor).expect("anchor is a child");
    children.insert(i + 1, id);
}

pub fn leaf(id: NodeId, kind: NodeKind) -> BTNode {
    BTNode::new(id, kind, vec![])
}
