//! An executor that replays per-node status scripts. Used by tests and by
//! property checks of the tick semantics.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{NodeId, Params, TickStatus};
use crate::exec::{ActionExecutor, LeafKind, LeafOutcome};

#[derive(Debug, Clone)]
pub struct ScriptedExecutor {
    scripts: BTreeMap<NodeId, VecDeque<TickStatus>>,
    default: TickStatus,
    known: Option<BTreeSet<String>>,
    clock: f64,
    step: f64,
}

impl Default for ScriptedExecutor {
    fn default() -> Self {
        Self::new()
    }
}

impl ScriptedExecutor {
    pub fn new() -> Self {
        ScriptedExecutor {
            scripts: BTreeMap::new(),
            default: TickStatus::Success,
            known: None,
            clock: 0.0,
            step: 1.0,
        }
    }

    /// Statuses returned by successive ticks of `node`; once exhausted the
    /// default status is used.
    pub fn script(mut self, node: &str, statuses: impl IntoIterator<Item = TickStatus>) -> Self {
        self.scripts
            .entry(NodeId::new(node))
            .or_default()
            .extend(statuses);
        self
    }

    pub fn default_status(mut self, status: TickStatus) -> Self {
        self.default = status;
        self
    }

    /// Restricts the leaf names this executor accepts.
    pub fn only(mut self, names: &[&str]) -> Self {
        self.known = Some(names.iter().map(|s| s.to_string()).collect());
        self
    }
}

impl ActionExecutor for ScriptedExecutor {
    fn supports(&self, _leaf: LeafKind, name: &str) -> bool {
        self.known.as_ref().is_none_or(|k| k.contains(name))
    }

    fn run_leaf(&mut self, node: &NodeId, _leaf: LeafKind, _name: &str, _params: &Params) -> LeafOutcome {
        self.clock += self.step;
        let status = self
            .scripts
            .get_mut(node)
            .and_then(|q| q.pop_front())
            .unwrap_or(self.default);
        LeafOutcome::new(status)
    }

    fn sim_time(&self) -> f64 {
        self.clock
    }
}
