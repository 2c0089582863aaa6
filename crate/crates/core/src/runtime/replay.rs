use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use super::{execute, EpisodeRecord};
use crate::dsl::parse;
use crate::scoring::score_episode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayDivergence {
    #[error("stored bt_before does not parse: {0}")]
    BadTree(String),
    #[error("stored setup is unusable: {0}")]
    BadSetup(String),
    #[error("{what} #{index} differs: recorded {recorded}, replayed {replayed}")]
    Event {
        what: &'static str,
        index: usize,
        recorded: String,
        replayed: String,
    },
    #[error("score differs: recorded {recorded}, replayed {replayed}")]
    Score { recorded: String, replayed: String },
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_else(|e| format!("<{e}>"))
}

fn first_difference<T: Serialize>(
    what: &'static str,
    recorded: &[T],
    replayed: &[T],
) -> Result<(), ReplayDivergence> {
    let n = recorded.len().max(replayed.len());
    for index in 0..n {
        let a = recorded.get(index).map_or_else(|| "<missing>".to_string(), json);
        let b = replayed.get(index).map_or_else(|| "<missing>".to_string(), json);
        if a != b {
            return Err(ReplayDivergence::Event {
                what,
                index,
                recorded: a,
                replayed: b,
            });
        }
    }
    Ok(())
}

/// Re-executes the record's tree on its stored setup and compares world
/// events, trace and score byte for byte (as JSON).
pub fn replay(record: &EpisodeRecord) -> Result<(), ReplayDivergence> {
    let mut tree = parse(&record.bt_before).map_err(|e| ReplayDivergence::BadTree(e.to_string()))?;
    tree.reset();
    let out = execute(&mut tree, &record.setup, |_, _, _| {})
        .map_err(|e| ReplayDivergence::BadSetup(e.to_string()))?;
    first_difference("world event", &record.world_events, &out.world.events)?;
    first_difference("trace event", &record.full_trace, &out.trace)?;
    let score = score_episode(&out.world, &record.setup.scoring);
    let (a, b) = (json(&record.score), json(&score));
    if a != b {
        return Err(ReplayDivergence::Score {
            recorded: a,
            replayed: b,
        });
    }
    Ok(())
}

/// Reads a JSONL file of episode records.
pub fn read_records(path: &Path) -> Result<Vec<EpisodeRecord>, String> {
    let src = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1)))
        .collect()
}
