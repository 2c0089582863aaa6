//! Boundary between the tick engine and whatever carries out leaf nodes.

use crate::bt::{NodeId, Params, TickStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    Action,
    Condition,
}

impl LeafKind {
    pub fn label(self) -> &'static str {
        match self {
            LeafKind::Action => "action",
            LeafKind::Condition => "condition",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafOutcome {
    pub status: TickStatus,
    pub detail: Option<String>,
}

impl LeafOutcome {
    pub fn new(status: TickStatus) -> Self {
        LeafOutcome {
            status,
            detail: None,
        }
    }

    pub fn with_detail(status: TickStatus, detail: impl Into<String>) -> Self {
        LeafOutcome {
            status,
            detail: Some(detail.into()),
        }
    }
}

/// Carries out leaf nodes on behalf of the tick engine.
pub trait ActionExecutor {
    fn supports(&self, leaf: LeafKind, name: &str) -> bool;

    fn run_leaf(&mut self, node: &NodeId, leaf: LeafKind, name: &str, params: &Params)
        -> LeafOutcome;

    /// Current simulated time in seconds; stamped on trace events.
    fn sim_time(&self) -> f64;
}
