use rand::seq::IndexedRandom;
use rand::Rng;

use super::treeops::delete_node;
use super::{Actor, ActorContext, ActorError, ActorMemory, Refinement};
use crate::bt::{BehaviorTree, NodeId, NodeKind};
use crate::critic::CriticFeedback;
use crate::dsl::validate;
use crate::rng::{stream, SimRng, Stream};

const OPTIONAL_ACTIONS: [&str; 2] = ["RotateBlocks", "MoveShelf"];
const MAX_TRIES: usize = 16;

/// Baseline actor that only sees the score: keeps the tree after an
/// improvement, otherwise applies one random structural mutation.
#[derive(Debug, Clone)]
pub struct ScoreOnlyActor {
    rng: SimRng,
}

impl Default for ScoreOnlyActor {
    fn default() -> Self {
        ScoreOnlyActor {
            rng: stream(0, Stream::Actor),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mutation {
    DeleteOptionalLeaf,
    ChangeMaxAttempts,
    ReorderSiblings,
}

impl ScoreOnlyActor {
    fn mutate(&mut self, tree: &BehaviorTree) -> Option<(BehaviorTree, Mutation)> {
        let optional: Vec<NodeId> = tree
            .preorder()
            .into_iter()
            .filter(|id| match &tree.nodes[id].kind {
                NodeKind::Action { name, .. } => OPTIONAL_ACTIONS.contains(&name.as_str()),
                NodeKind::Condition { .. } => true,
                _ => false,
            })
            .collect();
        let retries: Vec<NodeId> = tree
            .preorder()
            .into_iter()
            .filter(|id| matches!(tree.nodes[id].kind, NodeKind::RetryUntilSuccessful { .. }))
            .collect();
        let parents: Vec<NodeId> = tree
            .preorder()
            .into_iter()
            .filter(|id| tree.nodes[id].children.len() >= 2)
            .collect();
        let mut kinds = Vec::new();
        if !optional.is_empty() {
            kinds.push(Mutation::DeleteOptionalLeaf);
        }
        if !retries.is_empty() {
            kinds.push(Mutation::ChangeMaxAttempts);
        }
        if !parents.is_empty() {
            kinds.push(Mutation::ReorderSiblings);
        }
        let kind = *kinds.choose(&mut self.rng)?;
        let mut out = tree.clone();
        match kind {
            Mutation::DeleteOptionalLeaf => {
                let id = optional.choose(&mut self.rng).expect("non-empty");
                delete_node(&mut out, id);
            }
            Mutation::ChangeMaxAttempts => {
                let id = retries.choose(&mut self.rng).expect("non-empty");
                if let Some(NodeKind::RetryUntilSuccessful { max_attempts }) =
                    out.node_mut(id).map(|n| &mut n.kind)
                {
                    let old = *max_attempts;
                    let mut new = self.rng.random_range(1..=4);
                    if new == old {
                        new = old % 4 + 1;
                    }
                    *max_attempts = new;
                }
            }
            Mutation::ReorderSiblings => {
                let id = parents.choose(&mut self.rng).expect("non-empty");
                let children = &mut out.node_mut(id).expect("exists").children;
                let n = children.len();
                let a = self.rng.random_range(0..n);
                let mut b = self.rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                children.swap(a, b);
            }
        }
        Some((out, kind))
    }
}

impl Actor for ScoreOnlyActor {
    fn name(&self) -> String {
        "score-only".into()
    }

    fn begin_episode(&mut self, episode_seed: u64) {
        self.rng = stream(episode_seed, Stream::Actor);
    }

    fn refine(
        &mut self,
        ctx: &ActorContext,
        _feedback: Option<&CriticFeedback>,
        real_score: i64,
        memory: &ActorMemory,
    ) -> Refinement {
        if memory.best_score().is_none_or(|best| real_score > best) {
            return Refinement::identity(ctx);
        }
        for _ in 0..MAX_TRIES {
            let Some((candidate, kind)) = self.mutate(&ctx.current_bt) else {
                break;
            };
            if validate(&candidate, &ctx.library).is_valid() {
                return Refinement::checked(ctx, candidate, Some(format!("mutation:{kind:?}")));
            }
        }
        Refinement::failed(
            ctx,
            ActorError::RefinementFailed("no valid mutation found".into()),
        )
    }
}
