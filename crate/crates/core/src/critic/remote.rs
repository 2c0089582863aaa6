use serde::Deserialize;
use serde_json::json;

use super::{Critic, CriticError, CriticFeedback, CriticRequest, IssueReport};
use crate::remote::{Transport, TransportError, SCHEMA_VERSION};
use crate::sim::PerceptionNoise;

#[derive(Deserialize)]
struct Reply {
    text: String,
    issues: Vec<IssueReport>,
    alarm_score: f64,
    confidence: f64,
}

/// Critic backed by an external model reached over a [`Transport`].
///
/// Request: `{schema_version, mode, observation, trace, memory}` where
/// `memory` lists this episode's earlier feedback. Reply: `{text, issues,
/// alarm_score, confidence}`.
pub struct RemoteCritic {
    transport: Box<dyn Transport>,
    max_attempts: u32,
    memory: Vec<CriticFeedback>,
}

impl RemoteCritic {
    pub fn new(transport: Box<dyn Transport>, max_attempts: u32) -> Self {
        RemoteCritic {
            transport,
            max_attempts: max_attempts.max(1),
            memory: Vec::new(),
        }
    }
}

impl Critic for RemoteCritic {
    fn name(&self) -> String {
        "remote".into()
    }

    fn perception(&self) -> PerceptionNoise {
        PerceptionNoise::EXACT
    }

    fn reset_memory(&mut self, _: u64) {
        self.memory.clear();
    }

    fn assess(&mut self, req: &CriticRequest<'_>) -> Result<Option<CriticFeedback>, CriticError> {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "mode": req.mode,
            "observation": req.observation,
            "trace": req.trace,
            "memory": self.memory,
        });
        let mut last = CriticError::Timeout("no attempt made".into());
        for _ in 0..self.max_attempts {
            let raw = match self.transport.post(&body) {
                Ok(raw) => raw,
                Err(TransportError::Unreachable(e)) => {
                    last = CriticError::Timeout(e);
                    continue;
                }
                Err(e @ TransportError::Status { .. }) => {
                    last = CriticError::EndpointError(e.to_string());
                    continue;
                }
            };
            let reply: Reply = match serde_json::from_str(&raw) {
                Ok(r) => r,
                Err(e) => {
                    last = CriticError::MalformedReply(e.to_string());
                    continue;
                }
            };
            let feedback = CriticFeedback {
                mode: req.mode,
                text: reply.text,
                issues: reply.issues,
                alarm_score: reply.alarm_score,
                confidence: reply.confidence,
            };
            if let Err(e) = feedback.check() {
                last = CriticError::MalformedReply(e);
                continue;
            }
            self.memory.push(feedback.clone());
            return Ok(Some(feedback));
        }
        Err(last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::remote::StubTransport;
    use crate::sim::{init_world, shipped_fields, Camera, IssueCategory, ObservationMode};

    fn run(replies: Vec<Result<String, TransportError>>) -> Result<Option<CriticFeedback>, CriticError> {
        let w = init_world(&shipped_fields()[0], 1).unwrap();
        let obs = Camera::new(PerceptionNoise::EXACT, 1).observe(&w, ObservationMode::Initial, false);
        let mut critic = RemoteCritic::new(Box::new(StubTransport::new(replies)), 2);
        critic.assess(&CriticRequest {
            mode: ObservationMode::Initial,
            observation: &obs,
            trace: &[],
            ground_truth: &[],
            events: &[],
        })
    }

    const VALID: &str = r#"{"text":"one block looks flipped","issues":[{"category":"MisorientedPlacement","node":"place","severity_class":"Actionable","evidence":"orange face in U1"}],"alarm_score":0.6,"confidence":0.8}"#;

    #[test]
    fn parses_a_valid_reply() {
        let f = run(vec![Ok(VALID.into())]).unwrap().unwrap();
        assert_eq!(f.issues[0].category, IssueCategory::MisorientedPlacement);
        assert_eq!(f.alarm_score, 0.6);
        assert_eq!(f.text, "one block looks flipped");
    }

    #[test]
    fn out_of_range_score_is_malformed() {
        let bad = VALID.replace("0.6", "1.5");
        assert!(matches!(run(vec![Ok(bad)]), Err(CriticError::MalformedReply(_))));
    }

    #[test]
    fn retries_then_recovers_or_times_out() {
        let ok = run(vec![Ok("{oops".into()), Ok(VALID.into())]);
        assert!(ok.unwrap().is_some());
        let down = run(vec![Err(TransportError::Unreachable("refused".into()))]);
        assert!(matches!(down, Err(CriticError::Timeout(_))));
        let status = run(vec![Err(TransportError::Status { status: 500, body: String::new() })]);
        assert!(matches!(status, Err(CriticError::EndpointError(_))));
    }
}
