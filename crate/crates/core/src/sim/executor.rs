use serde::{Deserialize, Serialize};

use super::{execute_action, ActionCall, ActionStatus, FaultModel, SimError, WorldState};
use crate::bt::{NodeId, Params, TickStatus};
use crate::exec::{ActionExecutor, LeafKind, LeafOutcome};

const CONDITIONS: [&str; 3] = ["ZoneHasBlocks", "IsCarrying", "ShelfAtTarget"];

/// A leaf that could not be executed at all (bad parameters or violated
/// preconditions). The leaf reports `Failure`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedCall {
    pub node: NodeId,
    pub sim_time: f64,
    pub error: SimError,
}

/// Runs behavior-tree leaves against a [`WorldState`].
#[derive(Debug, Clone)]
pub struct WorldExecutor {
    pub world: WorldState,
    pub faults: FaultModel,
    pub rejected: Vec<RejectedCall>,
}

impl WorldExecutor {
    pub fn new(world: WorldState, faults: FaultModel) -> Self {
        WorldExecutor {
            world,
            faults,
            rejected: Vec::new(),
        }
    }

    fn reject(&mut self, node: &NodeId, error: SimError) -> LeafOutcome {
        let detail = error.to_string();
        self.rejected.push(RejectedCall {
            node: node.clone(),
            sim_time: self.world.clock,
            error,
        });
        LeafOutcome::with_detail(TickStatus::Failure, detail)
    }
}

fn status(ok: bool) -> TickStatus {
    if ok {
        TickStatus::Success
    } else {
        TickStatus::Failure
    }
}

impl ActionExecutor for WorldExecutor {
    fn supports(&self, leaf: LeafKind, name: &str) -> bool {
        match leaf {
            LeafKind::Action => ActionCall::NAMES.contains(&name),
            LeafKind::Condition => CONDITIONS.contains(&name),
        }
    }

    fn run_leaf(&mut self, node: &NodeId, leaf: LeafKind, name: &str, params: &Params) -> LeafOutcome {
        if leaf == LeafKind::Condition {
            let w = &self.world;
            return match name {
                "ZoneHasBlocks" => match params.get("zone") {
                    Some(z) => LeafOutcome::new(status(w.blocks_in(z).next().is_some())),
                    None => self.reject(node, SimError::BadAction("ZoneHasBlocks needs `zone`".into())),
                },
                "IsCarrying" => LeafOutcome::new(status(!w.carried.is_empty())),
                _ => LeafOutcome::new(status(w.shelf_at_target())),
            };
        }
        let call = match ActionCall::from_params(name, params) {
            Ok(c) => c,
            Err(e) => return self.reject(node, e),
        };
        match execute_action(&mut self.world, Some(node), &call, &self.faults) {
            Ok(out) => {
                let index = self.world.events.len() - 1;
                let mut detail = format!("event {index}");
                let verb = match call {
                    ActionCall::PickBlocks { .. } => Some("picked"),
                    ActionCall::PlaceBlocks => Some("placed"),
                    _ => None,
                };
                if let (Some(verb), false) = (verb, out.blocks.is_empty()) {
                    if out.status == ActionStatus::Success {
                        detail.push_str(&format!(" {verb} {}", out.blocks.join(",")));
                    }
                }
                for f in &out.faults {
                    detail.push_str(&format!(" {f:?}"));
                }
                LeafOutcome::with_detail(status(out.status == ActionStatus::Success), detail)
            }
            Err(e) => self.reject(node, e),
        }
    }

    fn sim_time(&self) -> f64 {
        self.world.clock
    }
}
