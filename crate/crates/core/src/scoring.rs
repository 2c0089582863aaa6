//! Episode scoring and evaluation metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::NodeId;
use crate::sim::{
    ActionCall, BlockLocation, BlockState, GroundTruthIssue, IssueCategory, Orientation,
    WorldState,
};

pub const CORRECT_BLOCK_POINTS: i64 = 10;
pub const BATCH_BONUS_POINTS: i64 = 10;
pub const BATCH_SIZE: usize = 4;
pub const MISORIENTED_BLOCK_POINTS: i64 = -5;
pub const OUTSIDE_BLOCK_POINTS: i64 = -10;
pub const OVERTIME_POINTS: i64 = -20;
pub const FINAL_POSITION_POINTS: i64 = 20;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringRules {
    /// Points for ending with the shelf in its target zone.
    pub shelf_bonus: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub time_penalty: i64,
    pub overtime_penalty: i64,
    pub correct_boxes: i64,
    pub batch_bonuses: i64,
    pub incorrect_boxes: i64,
    pub outside_boxes: i64,
    pub final_position_bonus: i64,
    pub shelf_bonus: i64,
    pub total: i64,
}

impl ScoreBreakdown {
    pub fn component_sum(&self) -> i64 {
        self.time_penalty
            + self.overtime_penalty
            + self.correct_boxes
            + self.batch_bonuses
            + self.incorrect_boxes
            + self.outside_boxes
            + self.final_position_bonus
            + self.shelf_bonus
    }
}

/// Touching an unload zone counts as being in it.
fn in_unload(world: &WorldState, b: &BlockState) -> bool {
    matches!(&b.location, BlockLocation::InZone { zone, .. } if world.config.is_unload(zone))
}

fn correct(world: &WorldState, b: &BlockState) -> bool {
    in_unload(world, b) && b.orientation == Orientation::BlueUp
}

/// Real score of a finished episode.
pub fn score_episode(world: &WorldState, rules: &ScoringRules) -> ScoreBreakdown {
    let mut s = ScoreBreakdown {
        time_penalty: -(world.clock.floor() as i64),
        ..ScoreBreakdown::default()
    };
    if world.clock > world.config.time_limit {
        s.overtime_penalty = OVERTIME_POINTS;
    }
    for b in &world.blocks {
        if in_unload(world, b) {
            if b.orientation == Orientation::BlueUp {
                s.correct_boxes += CORRECT_BLOCK_POINTS;
            } else {
                s.incorrect_boxes += MISORIENTED_BLOCK_POINTS;
            }
        } else if b.location == BlockLocation::OutsideAllZones {
            s.outside_boxes += OUTSIDE_BLOCK_POINTS;
        }
    }
    for e in &world.events {
        if e.action == ActionCall::PlaceBlocks
            && e.blocks.len() == BATCH_SIZE
            && e.blocks
                .iter()
                .all(|id| world.block(id).is_some_and(|b| correct(world, b)))
        {
            s.batch_bonuses += BATCH_BONUS_POINTS;
        }
    }
    if world.at_start() {
        s.final_position_bonus = FINAL_POSITION_POINTS;
    }
    if world.shelf_at_target() {
        s.shelf_bonus = rules.shelf_bonus;
    }
    s.total = s.component_sum();
    s
}

/// Issue detection rate; an episode without real issues counts as fully
/// detected.
pub fn idr(detected: usize, real: usize) -> f64 {
    if real == 0 {
        1.0
    } else {
        detected.min(real) as f64 / real as f64
    }
}

/// Number of real issues matched by at least one claim of the same category
/// and, when both sides name a node, the same node.
pub fn count_detected<'a>(
    real: &[GroundTruthIssue],
    claims: impl IntoIterator<Item = (IssueCategory, Option<&'a NodeId>)>,
) -> usize {
    let claims: Vec<_> = claims.into_iter().collect();
    real.iter()
        .filter(|gt| {
            claims.iter().any(|(cat, node)| {
                *cat == gt.category
                    && match (node, &gt.node) {
                        (Some(a), Some(b)) => *a == b,
                        _ => true,
                    }
            })
        })
        .count()
}

/// Per-episode metrics. Critic-derived fields are `None` when no critic ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub episode_index: u32,
    pub score: i64,
    pub idr: Option<f64>,
    pub mean_confidence: Option<f64>,
    pub alarm_count: u32,
    pub alarm_rate: Option<f64>,
    pub detected_issue_count: usize,
    pub real_issue_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Score,
    Idr,
    MeanConfidence,
    AlarmCount,
    AlarmRate,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Score,
        Metric::Idr,
        Metric::MeanConfidence,
        Metric::AlarmCount,
        Metric::AlarmRate,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            Metric::Score => "score",
            Metric::Idr => "idr",
            Metric::MeanConfidence => "mean_confidence",
            Metric::AlarmCount => "alarm_count",
            Metric::AlarmRate => "alarm_rate",
        }
    }

    pub fn value(self, r: &MetricsRecord) -> Option<f64> {
        match self {
            Metric::Score => Some(r.score as f64),
            Metric::Idr => r.idr,
            Metric::MeanConfidence => r.mean_confidence,
            Metric::AlarmCount => Some(f64::from(r.alarm_count)),
            Metric::AlarmRate => r.alarm_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("config `{config}` has {found} episodes, expected {expected}")]
    RaggedInput {
        config: String,
        expected: usize,
        found: usize,
    },
}

/// One metric as a table: a row per config plus the mean row, a column per
/// episode index. Missing values are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub metric: Metric,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
    pub mean: Vec<Option<f64>>,
}

fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Averages each metric per episode index across configs. Records of one
/// config must be ordered by episode index.
pub fn aggregate(
    records: &BTreeMap<String, Vec<MetricsRecord>>,
) -> Result<Vec<MetricTable>, AggregateError> {
    let expected = records.values().next().map_or(0, Vec::len);
    for (config, r) in records {
        if r.len() != expected {
            return Err(AggregateError::RaggedInput {
                config: config.clone(),
                expected,
                found: r.len(),
            });
        }
    }
    Ok(Metric::ALL
        .iter()
        .map(|&metric| {
            let rows: Vec<(String, Vec<Option<f64>>)> = records
                .iter()
                .map(|(c, r)| (c.clone(), r.iter().map(|x| metric.value(x)).collect()))
                .collect();
            let mean = (0..expected)
                .map(|i| mean(rows.iter().map(|(_, v)| v[i])))
                .collect();
            MetricTable { metric, rows, mean }
        })
        .collect())
}

impl MetricTable {
    /// `config,1,2,...,N` header, one row per config, then a `mean` row.
    pub fn to_csv(&self) -> String {
        let cell = |v: &Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let mut out = String::from("config");
        for i in 1..=self.mean.len() {
            let _ = write!(out, ",{i}");
        }
        out.push('\n');
        for (name, values) in self.rows.iter().map(|(n, v)| (n.as_str(), v)).chain([("mean", &self.mean)]) {
            out.push_str(name);
            for v in values {
                out.push(',');
                out.push_str(&cell(v));
            }
            out.push('\n');
        }
        out
    }
}
