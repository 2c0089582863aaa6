use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::treeops::{
    delete_node, insert_after, leaf, param, picks_in, rotate_after, set_param, zone_context,
};
use super::{Actor, ActorContext, ActorMemory, EnvironmentSpec, ExecutionSummary, Refinement};
use crate::bt::{BTNode, BehaviorTree, NodeId, NodeKind};
use crate::critic::CriticFeedback;
use crate::dsl::parse;
use crate::scoring::{
    BATCH_BONUS_POINTS, BATCH_SIZE, CORRECT_BLOCK_POINTS, FINAL_POSITION_POINTS,
    MISORIENTED_BLOCK_POINTS, OVERTIME_POINTS,
};
use crate::sim::{format_mask, parse_mask, IssueCategory, Orientation};

/// Feedback confidence below which the critic's colour judgement is not
/// trusted.
pub const LOW_CONFIDENCE: f64 = 0.4;
const BLIND_MASK: &str = "1111";
const TRANSACTION_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Patch {
    /// Put a stale-prone `CursorSequence` inside a `Sequence`.
    WrapCursor,
    /// Remove rotations the critic's colour reports cannot justify.
    DropRotations,
    /// One `RetryUntilSuccessful(Sequence(load, carry, unload))` per batch.
    Transactional,
    /// Set rotation masks for blocks reported orange side up.
    TargetedRotation,
    /// Drop optional work after running out of time.
    TrimOnOvertime,
}

impl Patch {
    pub fn label(self) -> &'static str {
        match self {
            Patch::WrapCursor => "wrap-cursor",
            Patch::DropRotations => "drop-rotations",
            Patch::Transactional => "transactional",
            Patch::TargetedRotation => "targeted-rotation",
            Patch::TrimOnOvertime => "trim-on-overtime",
        }
    }
}

/// Switches for the individual repair rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleSet {
    pub wrap_cursor: bool,
    pub drop_rotations: bool,
    pub transactional: bool,
    pub targeted_rotation: bool,
    pub trim_on_overtime: bool,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            wrap_cursor: true,
            drop_rotations: true,
            transactional: true,
            targeted_rotation: true,
            trim_on_overtime: true,
        }
    }
}

/// Applies the first rule, in priority order, that changes the tree.
pub fn rule_based_repair(
    ctx: &ActorContext,
    feedback: &CriticFeedback,
    real_score: i64,
    memory: &ActorMemory,
    rules: RuleSet,
) -> Option<(BehaviorTree, Patch)> {
    let order = [
        (rules.wrap_cursor, Patch::WrapCursor),
        (rules.drop_rotations, Patch::DropRotations),
        (rules.transactional, Patch::Transactional),
        (rules.targeted_rotation, Patch::TargetedRotation),
        (rules.trim_on_overtime, Patch::TrimOnOvertime),
    ];
    order
        .into_iter()
        .filter(|(on, _)| *on)
        .find_map(|(_, patch)| {
            let candidate = match patch {
                Patch::WrapCursor => wrap_cursor(ctx, feedback),
                Patch::DropRotations => drop_rotations(ctx, feedback, real_score),
                Patch::Transactional => transactional(ctx, feedback, memory),
                Patch::TargetedRotation => targeted_rotation(ctx, feedback, real_score, memory),
                Patch::TrimOnOvertime => trim_on_overtime(ctx, feedback),
            };
            candidate
                .filter(|t| !t.same_structure(&ctx.current_bt))
                .map(|t| (t, patch))
        })
}

fn reports(feedback: &CriticFeedback, category: IssueCategory) -> impl Iterator<Item = &crate::critic::IssueReport> {
    feedback.issues.iter().filter(move |i| i.category == category)
}

fn wrap_cursor(ctx: &ActorContext, feedback: &CriticFeedback) -> Option<BehaviorTree> {
    let mut tree = ctx.current_bt.clone();
    for r in reports(feedback, IssueCategory::VacuousSuccess) {
        let Some(id) = &r.node else { continue };
        if tree.node(id).map(|n| &n.kind) != Some(&NodeKind::CursorSequence) {
            continue;
        }
        let scoped = tree.parent_of(id).is_some_and(|p| {
            let p = &tree.nodes[p];
            p.kind == NodeKind::Sequence && p.children.len() == 1
        });
        if !scoped {
            let wrapper = tree.fresh_id(&format!("{id}_scope"));
            tree.wrap(id, BTNode::new(wrapper, NodeKind::Sequence, vec![]));
        }
    }
    Some(tree)
}

/// The critic's placement claims imply a lower score than the one actually
/// obtained, so at least some of them must be wrong.
pub(super) fn contradicts_score(
    s: &ExecutionSummary,
    time_limit: f64,
    feedback: &CriticFeedback,
    real_score: i64,
) -> bool {
    let placed: BTreeSet<&str> = s.placed.iter().map(String::as_str).collect();
    let mut claimed = BTreeSet::new();
    let mut misoriented = BTreeSet::new();
    for r in &feedback.issues {
        let Some(b) = r.block_id.as_deref().filter(|b| placed.contains(b)) else {
            continue;
        };
        match r.category {
            IssueCategory::MisorientedPlacement => {
                claimed.insert(b);
                misoriented.insert(b);
            }
            IssueCategory::BlockIncorrectlyPlaced | IssueCategory::BlockOutsideZones => {
                claimed.insert(b);
            }
            _ => {}
        }
    }
    let correct = (placed.len() - claimed.len()) as i64;
    let mut bound = correct * CORRECT_BLOCK_POINTS
        + (correct / BATCH_SIZE as i64) * BATCH_BONUS_POINTS
        + misoriented.len() as i64 * MISORIENTED_BLOCK_POINTS
        - s.elapsed.floor() as i64;
    if s.returned_to_start {
        bound += FINAL_POSITION_POINTS;
    }
    if s.elapsed > time_limit {
        bound += OVERTIME_POINTS;
    }
    real_score > bound
}

fn drop_rotations(ctx: &ActorContext, feedback: &CriticFeedback, real_score: i64) -> Option<BehaviorTree> {
    let tree = &ctx.current_bt;
    let rotations = tree.actions_named("RotateBlocks");
    if rotations.is_empty() {
        return None;
    }
    let misrotation = reports(feedback, IssueCategory::MisRotation).next().is_some();
    let blind: Vec<NodeId> = rotations
        .iter()
        .filter(|id| param(tree, id, "mask") == Some(BLIND_MASK))
        .cloned()
        .collect();
    let targets = if misrotation && feedback.confidence < LOW_CONFIDENCE {
        rotations
    } else if misrotation
        || contradicts_score(&ctx.summary, ctx.environment.time_limit, feedback, real_score)
    {
        blind
    } else {
        return None;
    };
    let mut out = tree.clone();
    for id in &targets {
        delete_node(&mut out, id);
    }
    Some(out)
}

fn transport_zones(ctx: &ActorContext, feedback: Option<&CriticFeedback>) -> BTreeSet<String> {
    let zones = zone_context(&ctx.current_bt, &ctx.environment);
    feedback
        .into_iter()
        .flat_map(|f| f.issues.iter())
        .filter(|i| matches!(i.category, IssueCategory::PickFailure | IssueCategory::DropInTransit))
        .filter_map(|i| i.node.as_ref())
        .filter_map(|n| zones.get(n).and_then(|c| c.load.clone()))
        .collect()
}

fn transactional(ctx: &ActorContext, feedback: &CriticFeedback, memory: &ActorMemory) -> Option<BehaviorTree> {
    let current = transport_zones(ctx, Some(feedback));
    let history: Vec<BTreeSet<String>> = memory
        .entries
        .iter()
        .rev()
        .take(2)
        .map(|e| transport_zones(ctx, e.final_feedback.as_ref()))
        .collect();
    let spans_pairs = |a: &BTreeSet<String>, b: &BTreeSet<String>| {
        !a.is_empty() && !b.is_empty() && a.union(b).count() >= 2
    };
    let repeated = current.len() >= 2
        || history.first().is_some_and(|prev| spans_pairs(&current, prev))
        || (history.len() == 2 && spans_pairs(&history[0], &history[1]));
    let uncovered = ctx
        .environment
        .load_zones
        .iter()
        .any(|(z, ids)| !ids.is_empty() && picks_in(&ctx.current_bt, &ctx.environment, z).is_empty());
    let left_behind = reports(feedback, IssueCategory::BlockIncorrectlyPlaced).next().is_some();
    if repeated || (left_behind && uncovered) {
        Some(restructure(ctx))
    } else {
        None
    }
}

fn block_info_mask(ctx: &ActorContext, ids: &[String]) -> Option<[bool; 4]> {
    let info = ctx.block_info.as_ref()?;
    let mut mask = [false; 4];
    for (slot, id) in ids.iter().take(4).enumerate() {
        mask[slot] = info
            .iter()
            .any(|b| &b.block_id == id && b.orientation == Orientation::OrangeUp);
    }
    Some(mask)
}

/// One transactional subtree per batch of at most four blocks, covering every
/// load zone, then the shelf (if the current tree moves it) and home.
pub(super) fn restructure(ctx: &ActorContext) -> BehaviorTree {
    let tree = &ctx.current_bt;
    let env = &ctx.environment;
    let zones = zone_context(tree, env);
    let mut nodes: Vec<BTNode> = vec![BTNode::new(tree.root.clone(), NodeKind::Sequence, vec![])];
    let mut top = Vec::new();

    for (i, (zone, ids)) in env.load_zones.iter().enumerate() {
        if ids.is_empty() || env.unload_zones.is_empty() {
            continue;
        }
        let unload = tree
            .actions_named("PlaceBlocks")
            .iter()
            .filter_map(|p| zones.get(p))
            .find(|c| c.load.as_deref() == Some(zone) && c.at.as_deref().is_some_and(|a| env.is_unload(a)))
            .and_then(|c| c.at.clone())
            .unwrap_or_else(|| env.unload_zones[i % env.unload_zones.len()].clone());
        let picks = picks_in(tree, env, zone);
        for (k, batch) in ids.chunks(4).enumerate() {
            let sfx = if k == 0 { String::new() } else { format!("_{}", k + 1) };
            let id = |base: &str| NodeId::new(format!("{base}_{zone}{sfx}"));
            let mask = block_info_mask(ctx, batch).or_else(|| {
                let rot = rotate_after(tree, picks.get(k)?)?;
                parse_mask(param(tree, &rot, "mask")?).ok()
            });
            let mut steps = vec![
                leaf(id("goto"), NodeKind::action("NavigateTo", &[("zone", zone)])),
                leaf(
                    id("pick"),
                    NodeKind::action("PickBlocks", &[("count", &batch.len().to_string())]),
                ),
            ];
            if let Some(m) = mask.filter(|m| m.iter().any(|&b| b)) {
                steps.push(leaf(
                    id("rotate"),
                    NodeKind::action("RotateBlocks", &[("mask", &format_mask(m))]),
                ));
            }
            steps.push(leaf(id("carry"), NodeKind::action("NavigateTo", &[("zone", &unload)])));
            steps.push(leaf(id("place"), NodeKind::action("PlaceBlocks", &[])));
            nodes.push(BTNode::new(
                id("batch"),
                NodeKind::RetryUntilSuccessful {
                    max_attempts: TRANSACTION_ATTEMPTS,
                },
                vec![id("load")],
            ));
            nodes.push(BTNode::new(
                id("load"),
                NodeKind::Sequence,
                steps.iter().map(|s| s.id.clone()).collect(),
            ));
            nodes.extend(steps);
            top.push(id("batch"));
        }
    }

    if !tree.actions_named("MoveShelf").is_empty() {
        let shelf = &env.shelf.initial_zone;
        nodes.push(BTNode::new(
            "shelf",
            NodeKind::Sequence,
            vec![NodeId::new("goto_shelf"), NodeId::new("move_shelf")],
        ));
        nodes.push(leaf(NodeId::new("goto_shelf"), NodeKind::action("NavigateTo", &[("zone", shelf)])));
        nodes.push(leaf(NodeId::new("move_shelf"), NodeKind::action("MoveShelf", &[])));
        top.push(NodeId::new("shelf"));
    }
    nodes.push(leaf(NodeId::new("home"), NodeKind::action("ReturnToStart", &[])));
    top.push(NodeId::new("home"));
    nodes[0].children = top;
    let mut out = BehaviorTree::from_nodes(nodes);
    out.metadata = tree.metadata.clone();
    out
}

/// Mask bit `tree` applies to `block` after picking it.
fn applied_bit(tree: &BehaviorTree, env: &EnvironmentSpec, block: &str) -> bool {
    let Some((zone, batch, slot)) = env.slot_of(block) else {
        return false;
    };
    picks_in(tree, env, zone)
        .get(batch)
        .and_then(|p| rotate_after(tree, p))
        .and_then(|r| param(tree, &r, "mask").and_then(|m| parse_mask(m).ok()))
        .is_some_and(|m| m[slot])
}

/// Initial orientation of every block the critic ever called orange side up.
/// A claim under an applied flip means the block started blue; the majority
/// of claims decides and a tie goes to the latest one. Episodes whose claims
/// the score rules out are ignored.
fn believed_orange(ctx: &ActorContext, feedback: &CriticFeedback, memory: &ActorMemory) -> BTreeMap<String, bool> {
    let env = &ctx.environment;
    let past = memory
        .entries
        .iter()
        .filter(|e| {
            e.final_feedback.as_ref().is_some_and(|f| {
                !contradicts_score(&e.summary, env.time_limit, f, e.real_score)
            })
        })
        .filter_map(|e| Some((parse(&e.executed_bt).ok()?, e.final_feedback.as_ref()?)));
    let mut votes: BTreeMap<String, (i32, bool)> = BTreeMap::new();
    for (tree, fb) in past.chain(std::iter::once((ctx.current_bt.clone(), feedback))) {
        for r in reports(fb, IssueCategory::MisorientedPlacement) {
            let Some(b) = &r.block_id else { continue };
            let orange = !applied_bit(&tree, env, b);
            let v = votes.entry(b.clone()).or_default();
            v.0 += if orange { 1 } else { -1 };
            v.1 = orange;
        }
    }
    votes
        .into_iter()
        .map(|(b, (balance, latest))| (b, if balance == 0 { latest } else { balance > 0 }))
        .collect()
}

fn targeted_rotation(
    ctx: &ActorContext,
    feedback: &CriticFeedback,
    real_score: i64,
    memory: &ActorMemory,
) -> Option<BehaviorTree> {
    let env = &ctx.environment;
    if contradicts_score(&ctx.summary, env.time_limit, feedback, real_score) {
        return None;
    }
    let misrotated: BTreeSet<&NodeId> = reports(feedback, IssueCategory::MisRotation)
        .filter_map(|r| r.node.as_ref())
        .collect();
    let batches: BTreeSet<(String, usize)> = reports(feedback, IssueCategory::MisorientedPlacement)
        .filter_map(|r| r.block_id.as_deref().and_then(|b| env.slot_of(b)))
        .map(|(zone, batch, _)| (zone.to_string(), batch))
        .collect();
    if batches.is_empty() {
        return None;
    }
    let belief = believed_orange(ctx, feedback, memory);
    let mut tree = ctx.current_bt.clone();
    for (zone, batch) in batches {
        let Some(pick) = picks_in(&tree, env, &zone).get(batch).cloned() else {
            continue;
        };
        let rot = rotate_after(&tree, &pick);
        if rot.as_ref().is_some_and(|r| misrotated.contains(r)) {
            continue;
        }
        let current = rot
            .as_ref()
            .and_then(|r| param(&tree, r, "mask"))
            .and_then(|m| parse_mask(m).ok())
            .unwrap_or([false; 4]);
        let ids = env
            .load_zones
            .iter()
            .find(|(z, _)| *z == zone)
            .map(|(_, ids)| ids.chunks(4).nth(batch).unwrap_or(&[]).to_vec())
            .unwrap_or_default();
        let mask = block_info_mask(ctx, &ids).unwrap_or_else(|| {
            let mut m = current;
            for (slot, id) in ids.iter().enumerate().take(4) {
                if let Some(&orange) = belief.get(id) {
                    m[slot] = orange;
                }
            }
            m
        });
        match (rot, mask.iter().any(|&b| b)) {
            (Some(r), false) => delete_node(&mut tree, &r),
            (Some(r), true) => set_param(&mut tree, &r, "mask", &format_mask(mask)),
            (None, true) => {
                let id = tree.fresh_id(&format!("rotate_{zone}"));
                insert_after(
                    &mut tree,
                    &pick,
                    leaf(id, NodeKind::action("RotateBlocks", &[("mask", &format_mask(mask))])),
                );
            }
            (None, false) => {}
        }
    }
    Some(tree)
}

fn trim_on_overtime(ctx: &ActorContext, feedback: &CriticFeedback) -> Option<BehaviorTree> {
    reports(feedback, IssueCategory::TimeOverrun).next()?;
    let mut tree = ctx.current_bt.clone();
    let rotations = tree.actions_named("RotateBlocks");
    if !rotations.is_empty() {
        for r in &rotations {
            delete_node(&mut tree, r);
        }
        return Some(tree);
    }
    for m in tree.actions_named("MoveShelf") {
        let target = match tree.parent_of(&m) {
            Some(p) if *p != tree.root && tree.nodes[p].kind == NodeKind::Sequence => p.clone(),
            _ => m.clone(),
        };
        delete_node(&mut tree, &target);
    }
    Some(tree)
}

/// Deterministic repair actor built from the rules above.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedRepairActor {
    pub rules: RuleSet,
}

impl Actor for RuleBasedRepairActor {
    fn name(&self) -> String {
        "rule-based".into()
    }

    fn refine(
        &mut self,
        ctx: &ActorContext,
        feedback: Option<&CriticFeedback>,
        real_score: i64,
        memory: &ActorMemory,
    ) -> Refinement {
        let Some(feedback) = feedback else {
            return Refinement::identity(ctx);
        };
        match rule_based_repair(ctx, feedback, real_score, memory, self.rules) {
            Some((tree, patch)) => Refinement::checked(ctx, tree, Some(patch.label().to_string())),
            None => Refinement::identity(ctx),
        }
    }
}
