//! Random behavior trees and an independent reference interpreter.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vrl_core::bt::{tick_node, BTNode, TraceRecorder, BehaviorTree, NodeId, NodeKind, TickStatus, TraceKind};
use vrl_core::bt::scripted::ScriptedExecutor;

const ZONES: [&str; 8] = ["L1", "L2", "L3", "U1", "U2", "S", "SH1", "SH2"];

/// How node names are drawn.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Names {
    Plain,
    /// Names that need quoting: spaces, quotes, backslashes, punctuation, non-ASCII.
    Exotic,
}

pub struct TreeGen<'a> {
    rng: &'a mut ChaCha8Rng,
    names: Names,
    budget: usize,
    nodes: Vec<BTNode>,
}

fn random_leaf(rng: &mut ChaCha8Rng) -> NodeKind {
    let zone = ZONES[rng.random_range(0..ZONES.len())];
    match rng.random_range(0..9) {
        0 => NodeKind::action("NavigateTo", &[("zone", zone)]),
        1 => NodeKind::action("PickBlocks", &[("count", &rng.random_range(1..=4).to_string())]),
        2 => {
            let mask: String = (0..4).map(|_| if rng.random() { '1' } else { '0' }).collect();
            NodeKind::action("RotateBlocks", &[("mask", &mask)])
        }
        3 => NodeKind::action("PlaceBlocks", &[]),
        4 => NodeKind::action("MoveShelf", &[]),
        5 => NodeKind::action("ReturnToStart", &[]),
        6 => NodeKind::condition("ZoneHasBlocks", &[("zone", zone)]),
        7 => NodeKind::condition("IsCarrying", &[]),
        _ => NodeKind::condition("ShelfAtTarget", &[]),
    }
}

const EXOTIC: [&str; 10] = [
    "pick up", "say \"hi\"", "back\\slash", "a(b)", "x:y", "k=v", "# not a comment", "größe",
    "tab\there", "-dash",
];

impl<'a> TreeGen<'a> {
    pub fn new(rng: &'a mut ChaCha8Rng, names: Names, budget: usize) -> Self {
        TreeGen {
            rng,
            names,
            budget,
            nodes: Vec::new(),
        }
    }

    fn name(&mut self) -> NodeId {
        let k = self.nodes.len();
        match self.names {
            Names::Exotic if self.rng.random_bool(0.4) => {
                NodeId::new(format!("{} {k}", EXOTIC[self.rng.random_range(0..EXOTIC.len())]))
            }
            _ => NodeId::new(format!("n{k}")),
        }
    }

    fn node(&mut self, depth: usize) -> NodeId {
        let id = self.name();
        let slot = self.nodes.len();
        self.nodes.push(BTNode::new(id.clone(), NodeKind::Sequence, vec![]));
        self.budget = self.budget.saturating_sub(1);
        let leaf = depth >= 5 || self.budget == 0 || self.rng.random_bool(0.4);
        let (kind, children) = if leaf {
            (random_leaf(self.rng), vec![])
        } else {
            match self.rng.random_range(0..4) {
                0 => {
                    let max_attempts = self.rng.random_range(1..=4);
                    (NodeKind::RetryUntilSuccessful { max_attempts }, vec![self.node(depth + 1)])
                }
                k => {
                    let n = self.rng.random_range(1..=4);
                    let children = (0..n).map(|_| self.node(depth + 1)).collect();
                    let kind = [NodeKind::Sequence, NodeKind::Fallback, NodeKind::CursorSequence]
                        [k - 1]
                        .clone();
                    (kind, children)
                }
            }
        };
        self.nodes[slot].kind = kind;
        self.nodes[slot].children = children;
        id
    }

    /// A tree whose root is a `Sequence` of up to four subtrees.
    pub fn tree(mut self) -> BehaviorTree {
        let root = NodeId::new("root");
        self.nodes.push(BTNode::new(root, NodeKind::Sequence, vec![]));
        let n = self.rng.random_range(1..=4);
        let children = (0..n).map(|_| self.node(1)).collect();
        self.nodes[0].children = children;
        BehaviorTree::from_nodes(self.nodes)
    }
}

pub type Scripts = BTreeMap<NodeId, Vec<TickStatus>>;

pub fn random_scripts(rng: &mut ChaCha8Rng, tree: &BehaviorTree) -> Scripts {
    let mut out = Scripts::new();
    for n in tree.nodes.values().filter(|n| n.kind.is_leaf()) {
        let len = rng.random_range(0..5);
        let s = (0..len)
            .map(|_| match rng.random_range(0..20) {
                0..10 => TickStatus::Success,
                10..17 => TickStatus::Failure,
                _ => TickStatus::Running,
            })
            .collect();
        out.insert(n.id.clone(), s);
    }
    out
}

pub fn scripted(scripts: &Scripts) -> ScriptedExecutor {
    scripts
        .iter()
        .fold(ScriptedExecutor::new(), |e, (id, s)| e.script(id.as_str(), s.iter().copied()))
}

// ---- reference interpreter -------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefEvent {
    Enter,
    Exit(TickStatus),
}

/// Tick semantics written out directly from the definitions, with its own
/// cursor and attempt tables.
pub struct Reference<'t> {
    tree: &'t BehaviorTree,
    scripts: BTreeMap<NodeId, VecDeque<TickStatus>>,
    cursor: BTreeMap<NodeId, usize>,
    attempts: BTreeMap<NodeId, u32>,
    pub log: Vec<(NodeId, RefEvent)>,
}

impl<'t> Reference<'t> {
    pub fn new(tree: &'t BehaviorTree, scripts: &Scripts) -> Self {
        Reference {
            tree,
            scripts: scripts
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().copied().collect()))
                .collect(),
            cursor: BTreeMap::new(),
            attempts: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    pub fn tick(&mut self) -> TickStatus {
        let root = self.tree.root.clone();
        self.run(&root)
    }

    fn clear_below(&mut self, id: &NodeId) {
        self.cursor.remove(id);
        self.attempts.remove(id);
        let children = self.tree.nodes[id].children.clone();
        for c in &children {
            self.clear_below(c);
        }
    }

    fn run(&mut self, id: &NodeId) -> TickStatus {
        self.log.push((id.clone(), RefEvent::Enter));
        let node = &self.tree.nodes[id];
        let children = node.children.clone();
        let status = match &node.kind {
            NodeKind::Action { .. } | NodeKind::Condition { .. } => self
                .scripts
                .get_mut(id)
                .and_then(|q| q.pop_front())
                .unwrap_or(TickStatus::Success),
            NodeKind::Sequence => {
                let mut result = TickStatus::Success;
                for c in &children {
                    let s = self.run(c);
                    if s != TickStatus::Success {
                        result = s;
                        break;
                    }
                }
                if result == TickStatus::Success {
                    self.clear_below(id);
                }
                result
            }
            NodeKind::Fallback => {
                let mut result = TickStatus::Failure;
                for c in &children {
                    let s = self.run(c);
                    if s != TickStatus::Failure {
                        result = s;
                        break;
                    }
                }
                result
            }
            NodeKind::CursorSequence => {
                let mut at = self.cursor.get(id).copied().unwrap_or(0);
                let mut result = TickStatus::Success;
                while at < children.len() {
                    let s = self.run(&children[at]);
                    if s == TickStatus::Success {
                        at += 1;
                    } else {
                        result = s;
                        break;
                    }
                }
                self.cursor.insert(id.clone(), at);
                result
            }
            NodeKind::RetryUntilSuccessful { max_attempts } => {
                let max = *max_attempts;
                loop {
                    match self.run(&children[0]) {
                        TickStatus::Success => {
                            self.attempts.insert(id.clone(), 0);
                            break TickStatus::Success;
                        }
                        TickStatus::Running => break TickStatus::Running,
                        TickStatus::Failure => {
                            let a = self.attempts.entry(id.clone()).or_insert(0);
                            *a += 1;
                            if *a >= max {
                                *a = 0;
                                break TickStatus::Failure;
                            }
                        }
                    }
                }
            }
        };
        self.log.push((id.clone(), RefEvent::Exit(status)));
        status
    }
}

// ---- property checks -------------------------------------------------------

/// One node activation reconstructed from a trace.
#[derive(Debug)]
struct Activation {
    node: NodeId,
    status: TickStatus,
    detail: Option<String>,
    children: Vec<Activation>,
}

fn nest(
    events: &[(NodeId, TraceKind, Option<String>)],
    pos: &mut usize,
) -> Result<Activation, String> {
    let (node, kind, _) = &events[*pos];
    if *kind != TraceKind::Entered {
        return Err(format!("event {pos} for {node} is not an entry"));
    }
    *pos += 1;
    let mut children = Vec::new();
    loop {
        let Some((n, k, d)) = events.get(*pos) else {
            return Err(format!("{node} entered but never returned"));
        };
        match k {
            TraceKind::Entered => children.push(nest(events, pos)?),
            TraceKind::Returned(s) => {
                if n != node {
                    return Err(format!("{n} returned while {node} was open"));
                }
                *pos += 1;
                return Ok(Activation {
                    node: node.clone(),
                    status: *s,
                    detail: d.clone(),
                    children,
                });
            }
        }
    }
}

fn child_index(tree: &BehaviorTree, parent: &NodeId, child: &NodeId) -> Result<usize, String> {
    tree.nodes[parent]
        .children
        .iter()
        .position(|c| c == child)
        .ok_or_else(|| format!("{child} activated inside {parent} but is not its child"))
}

/// Cursor and attempt bookkeeping implied by the trace so far.
#[derive(Default)]
struct Expect {
    cursor: BTreeMap<NodeId, usize>,
    failures: BTreeMap<NodeId, u32>,
}

fn check_activation(tree: &BehaviorTree, a: &Activation, ex: &mut Expect) -> Result<(), String> {
    let node = &tree.nodes[&a.node];
    let idx: Vec<usize> = a
        .children
        .iter()
        .map(|c| child_index(tree, &a.node, &c.node))
        .collect::<Result<_, _>>()?;
    let statuses: Vec<TickStatus> = a.children.iter().map(|c| c.status).collect();
    for c in &a.children {
        check_activation(tree, c, ex)?;
    }
    let n = node.children.len();
    let fail = |m: &str| Err(format!("{}: {m}", a.node));
    match &node.kind {
        NodeKind::Action { .. } | NodeKind::Condition { .. } => {
            if !a.children.is_empty() {
                return fail("leaf activation has nested activations");
            }
        }
        NodeKind::Sequence | NodeKind::Fallback => {
            let stop = if matches!(node.kind, NodeKind::Sequence) {
                TickStatus::Success
            } else {
                TickStatus::Failure
            };
            if idx != (0..idx.len()).collect::<Vec<_>>() {
                return fail("children not ticked in order from the first");
            }
            let (last, init) = statuses.split_last().ok_or("composite ticked no child")?;
            if init.iter().any(|s| *s != stop) {
                return fail("did not stop at the first deciding child");
            }
            if *last == stop {
                if idx.len() != n || a.status != stop {
                    return fail("stopped early or wrong status after all children passed");
                }
            } else if a.status != *last {
                return fail("status differs from the deciding child");
            }
            if a.status == TickStatus::Success && matches!(node.kind, NodeKind::Sequence) {
                for d in tree.descendants(&a.node) {
                    ex.cursor.remove(&d);
                    ex.failures.remove(&d);
                }
            }
        }
        NodeKind::CursorSequence => {
            let start = ex.cursor.get(&a.node).copied().unwrap_or(0);
            if idx != (start..start + idx.len()).collect::<Vec<_>>() {
                return fail(&format!("did not resume at cursor {start}: {idx:?}"));
            }
            let advanced = statuses.iter().take_while(|s| **s == TickStatus::Success).count();
            if advanced + 1 < statuses.len() {
                return fail("ticked past a non-success child");
            }
            let end = start + advanced;
            let want = if advanced == statuses.len() {
                if end != n {
                    return fail("stopped before the end with only successes");
                }
                TickStatus::Success
            } else {
                statuses[advanced]
            };
            if a.status != want {
                return fail("wrong cursor status");
            }
            let detail = format!("cursor {start}->{end}/{n}");
            if a.detail.as_deref() != Some(detail.as_str()) {
                return fail(&format!("detail {:?}, expected {detail}", a.detail));
            }
            ex.cursor.insert(a.node.clone(), end);
        }
        NodeKind::RetryUntilSuccessful { max_attempts } => {
            let mut failures = ex.failures.get(&a.node).copied().unwrap_or(0);
            for (k, s) in statuses.iter().enumerate() {
                let last = k + 1 == statuses.len();
                match s {
                    TickStatus::Failure => {
                        failures += 1;
                        if failures > *max_attempts {
                            return fail("more failed attempts than max_attempts");
                        }
                        if last != (failures == *max_attempts) {
                            return fail("retry stopped before the bound or went past it");
                        }
                    }
                    _ if !last => return fail("re-ticked child after a non-failure"),
                    _ => {}
                }
            }
            let want = *statuses.last().ok_or("retry ticked nothing")?;
            if a.status != want {
                return fail("status differs from the last attempt");
            }
            if a.status == TickStatus::Running {
                ex.failures.insert(a.node.clone(), failures);
            } else {
                ex.failures.remove(&a.node);
            }
        }
    }
    Ok(())
}

/// Ticks `tree` `ticks` times under `scripts` and checks the engine against
/// the reference interpreter and against the trace properties.
pub fn check_tree(tree: &BehaviorTree, scripts: &Scripts, ticks: usize) -> Result<(), String> {
    let mut engine_tree = tree.clone();
    let mut exec = scripted(scripts);
    let mut reference = Reference::new(tree, scripts);
    let mut expect = Expect::default();
    let mut rec = TraceRecorder::new();
    let mut last_seq = None;
    for t in 0..ticks {
        let from = rec.events().len();
        let status = tick_node(&mut engine_tree, &tree.root, &mut exec, &mut rec)
            .map_err(|e| e.to_string())?;
        let trace = &rec.events()[from..];
        reference.log.clear();
        let want = reference.tick();
        if status != want {
            return Err(format!("tick {t}: engine {status:?}, reference {want:?}"));
        }
        let got: Vec<(NodeId, RefEvent)> = trace
            .iter()
            .map(|e| {
                let ev = match e.event {
                    TraceKind::Entered => RefEvent::Enter,
                    TraceKind::Returned(s) => RefEvent::Exit(s),
                };
                (e.node_id.clone(), ev)
            })
            .collect();
        if got != reference.log {
            return Err(format!("tick {t}: trace differs from the reference"));
        }
        for w in trace.windows(2) {
            if w[1].sequence_no <= w[0].sequence_no || w[1].sim_time < w[0].sim_time {
                return Err(format!("tick {t}: sequence or clock not monotone"));
            }
        }
        if let (Some(prev), Some(first)) = (last_seq, trace.first()) {
            if first.sequence_no <= prev {
                return Err("sequence numbers restarted between ticks".into());
            }
        }
        let flat: Vec<_> = trace
            .iter()
            .map(|e| (e.node_id.clone(), e.event, e.detail.clone()))
            .collect();
        let mut pos = 0;
        let top = nest(&flat, &mut pos)?;
        if pos != flat.len() || top.node != tree.root || top.status != status {
            return Err(format!("tick {t}: trace is not a single root activation"));
        }
        check_activation(tree, &top, &mut expect)?;
        last_seq = trace.last().map(|e| e.sequence_no);
    }
    Ok(())
}
