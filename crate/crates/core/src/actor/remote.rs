use serde::Deserialize;
use serde_json::json;

use super::{Actor, ActorContext, ActorError, ActorMemory, Refinement};
use crate::critic::CriticFeedback;
use crate::dsl::{parse, serialize, validate};
use crate::remote::{Transport, TransportError, SCHEMA_VERSION};

#[derive(Deserialize)]
struct Reply {
    bt_source: String,
}

/// Actor backed by an external language model.
///
/// Request: `{schema_version, task_definition, environment_spec,
/// node_library, authoring_rules, block_info, bt_source, execution_summary,
/// feedback, real_score, memory, validation_report}`; `validation_report` is
/// set when re-prompting after an invalid reply. Reply: `{bt_source}`.
pub struct RemoteActor {
    transport: Box<dyn Transport>,
    max_attempts: u32,
}

impl RemoteActor {
    pub fn new(transport: Box<dyn Transport>, max_attempts: u32) -> Self {
        RemoteActor {
            transport,
            max_attempts: max_attempts.max(1),
        }
    }
}

impl Actor for RemoteActor {
    fn name(&self) -> String {
        "remote".into()
    }

    fn refine(
        &mut self,
        ctx: &ActorContext,
        feedback: Option<&CriticFeedback>,
        real_score: i64,
        memory: &ActorMemory,
    ) -> Refinement {
        let mut body = json!({
            "schema_version": SCHEMA_VERSION,
            "task_definition": ctx.task_definition,
            "environment_spec": ctx.environment.render(),
            "node_library": ctx.library.describe(),
            "authoring_rules": ctx.library.authoring_rules,
            "block_info": ctx.block_info,
            "bt_source": serialize(&ctx.current_bt),
            "execution_summary": ctx.summary,
            "feedback": feedback,
            "real_score": real_score,
            "memory": memory.entries,
            "validation_report": null,
        });
        let mut last = ActorError::Timeout("no attempt made".into());
        for _ in 0..self.max_attempts {
            let raw = match self.transport.post(&body) {
                Ok(raw) => raw,
                Err(TransportError::Unreachable(e)) => {
                    last = ActorError::Timeout(e);
                    continue;
                }
                Err(e @ TransportError::Status { .. }) => {
                    last = ActorError::MalformedReply(e.to_string());
                    continue;
                }
            };
            let reply: Reply = match serde_json::from_str(&raw) {
                Ok(r) => r,
                Err(e) => {
                    last = ActorError::MalformedReply(e.to_string());
                    continue;
                }
            };
            let tree = match parse(&reply.bt_source) {
                Ok(t) => t,
                Err(e) => {
                    body["validation_report"] = json!(e.to_string());
                    last = ActorError::RefinementFailed(e.to_string());
                    continue;
                }
            };
            let report = validate(&tree, &ctx.library);
            if !report.is_valid() {
                body["validation_report"] = json!(report.to_string());
                last = ActorError::RefinementFailed(report.to_string());
                continue;
            }
            let patch = (!tree.same_structure(&ctx.current_bt)).then(|| "remote".to_string());
            return Refinement::checked(ctx, tree, patch);
        }
        Refinement::failed(ctx, last)
    }
}
