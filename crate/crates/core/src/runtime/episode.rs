use serde::{Deserialize, Serialize};

use super::{CheckpointRecord, EpisodeRecord, ErrorEntry, ErrorStage, Notification};
use crate::actor::{Actor, ActorContext, ActorError, ActorMemory, MemoryEntry};
use crate::bt::{execute_subtree, BehaviorTree, NodeId, TickError, TickStatus, TraceEvent, TraceKind, TraceRecorder};
use crate::critic::{alarm, Critic, CriticError, CriticRequest};
use crate::dsl::{diff, serialize, NodeLibrary};
use crate::scoring::{count_detected, idr, score_episode, MetricsRecord, ScoringRules};
use crate::sim::{
    checkpoint_issues, ground_truth_issues, init_world, setup_issues, BlockInfoEntry, Camera,
    FaultModel, FieldConfig, GroundTruthIssue, ObservationMode, SimError, WorldExecutor, WorldState,
};

/// Everything that determines what the robot does in one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSetup {
    pub field: FieldConfig,
    pub faults: FaultModel,
    pub scoring: ScoringRules,
    pub seed: u64,
}

/// Where a checkpoint window ended.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub subtree: NodeId,
    pub status: TickStatus,
    pub trace_from: usize,
    pub events_from: usize,
}

/// Result of running the tree without any critic or actor.
#[derive(Debug)]
pub struct Execution {
    pub world: WorldState,
    pub trace: Vec<TraceEvent>,
    pub error: Option<TickError>,
}

/// Ticks the root's children one checkpoint window at a time, calling
/// `on_window` after each. Stops early once the clock passes the time limit
/// or after `ReturnToStart` succeeded.
pub fn execute(
    tree: &mut BehaviorTree,
    setup: &EpisodeSetup,
    mut on_window: impl FnMut(&WorldState, &[TraceEvent], &Window),
) -> Result<Execution, SimError> {
    let world = init_world(&setup.field, setup.seed)?;
    setup.faults.check()?;
    let mut exec = WorldExecutor::new(world, setup.faults.clone());
    let mut rec = TraceRecorder::new();
    let root = tree.root_node().map(|r| (r.id.clone(), r.children.clone()));
    let windows = match root {
        Some((id, children)) if children.is_empty() => vec![id],
        Some((_, children)) => children,
        None => vec![],
    };
    let mut error = None;
    for subtree in windows {
        let trace_from = rec.events().len();
        let events_from = exec.world.events.len();
        let status = match execute_subtree(tree, &subtree, &mut exec, &mut rec) {
            Ok(s) => s,
            Err(e) => {
                error = Some(e);
                break;
            }
        };
        let window = Window {
            subtree,
            status,
            trace_from,
            events_from,
        };
        on_window(&exec.world, rec.events(), &window);
        let went_home = rec.events()[trace_from..].iter().any(|t| {
            t.event == TraceKind::Returned(TickStatus::Success)
                && tree.node(&t.node_id).and_then(|n| n.kind.action_name()) == Some("ReturnToStart")
        });
        if went_home || exec.world.clock > setup.field.time_limit {
            break;
        }
    }
    Ok(Execution {
        world: exec.world,
        trace: rec.into_events(),
        error,
    })
}

/// Run-level labels copied into the record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLabels {
    pub run_id: String,
    pub config_label: String,
    pub episode_index: u32,
}

/// One iteration of the refinement loop: execute with critic checkpoints,
/// score, let the actor refine, remember. Returns the record and the tree
/// for the next episode.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    tree: &BehaviorTree,
    setup: &EpisodeSetup,
    labels: &EpisodeLabels,
    library: &NodeLibrary,
    critic: &mut dyn Critic,
    actor: &mut dyn Actor,
    memory: &mut ActorMemory,
    block_info: bool,
) -> Result<(EpisodeRecord, BehaviorTree), SimError> {
    let mut tree = tree.clone();
    tree.reset();
    let bt_before = serialize(&tree);
    critic.reset_memory(setup.seed);
    actor.begin_episode(setup.seed);
    let mut camera = Camera::new(critic.perception(), setup.seed);
    let mut checkpoints = Vec::new();
    let mut errors = Vec::new();
    let mut notifications = Vec::new();
    let mut real: Vec<GroundTruthIssue> = Vec::new();

    let mut assess = |world: &WorldState,
                      mode: ObservationMode,
                      trace: &[TraceEvent],
                      issues: Vec<GroundTruthIssue>,
                      window: Option<NodeId>,
                      checkpoints: &mut Vec<CheckpointRecord>| {
        let observation = camera.observe(world, mode, block_info);
        let req = CriticRequest {
            mode,
            observation: &observation,
            trace,
            ground_truth: &issues,
            events: &world.events,
        };
        let feedback = match critic.assess(&req) {
            Ok(f) => f,
            Err(e) => {
                errors.push(ErrorEntry::critic(checkpoints.len(), &e));
                None
            }
        };
        let alarm_fired = alarm(feedback.as_ref());
        if let (true, Some(f)) = (alarm_fired, &feedback) {
            let n = Notification::new(labels, checkpoints.len(), mode, world.clock, f);
            tracing::warn!(
                run = %labels.run_id,
                episode = labels.episode_index,
                checkpoint = n.checkpoint,
                s = f.alarm_score,
                c = f.confidence,
                "operator alarm: {}",
                n.summary
            );
            notifications.push(n);
        }
        for g in issues {
            if !real.iter().any(|r| r.issue_id == g.issue_id) {
                real.push(g);
            }
        }
        checkpoints.push(CheckpointRecord {
            mode,
            subtree: window,
            observation,
            feedback,
            alarm_fired,
        });
    };

    let start = init_world(&setup.field, setup.seed)?;
    assess(&start, ObservationMode::Initial, &[], setup_issues(&start), None, &mut checkpoints);

    let execution = execute(&mut tree, setup, |world, trace, w| {
        let window = &trace[w.trace_from..];
        let issues = checkpoint_issues(world, window, w.events_from);
        assess(
            world,
            ObservationMode::Intermediate,
            window,
            issues,
            Some(w.subtree.clone()),
            &mut checkpoints,
        );
    })?;
    let world = &execution.world;
    let final_issues = ground_truth_issues(world, &execution.trace, true);
    assess(
        world,
        ObservationMode::Final,
        &execution.trace,
        final_issues,
        None,
        &mut checkpoints,
    );
    if let Some(e) = &execution.error {
        errors.push(ErrorEntry::new(ErrorStage::Execution, e.to_string()));
    }

    let score = score_episode(world, &setup.scoring);
    let final_feedback = checkpoints.last().and_then(|c| c.feedback.clone());
    let info = block_info.then(|| {
        setup
            .field
            .blocks
            .iter()
            .map(|b| BlockInfoEntry {
                block_id: b.id.clone(),
                initial_zone: b.initial_zone.clone(),
                orientation: b.orientation,
            })
            .collect()
    });
    let ctx = ActorContext::new(&setup.field, library.clone(), tree.clone(), execution.trace.clone(), info);
    let refinement = actor.refine(&ctx, final_feedback.as_ref(), score.total, memory);
    if let Some(e) = &refinement.error {
        errors.push(ErrorEntry::actor(e));
    }
    let bt_diff = diff(&tree, &refinement.tree);
    memory.entries.push(MemoryEntry {
        episode_index: labels.episode_index,
        final_feedback,
        real_score: score.total,
        executed_bt: bt_before.clone(),
        summary: ctx.summary.clone(),
        bt_diff: bt_diff.clone(),
    });

    let metrics = metrics(labels.episode_index, score.total, &real, &checkpoints);
    let record = EpisodeRecord {
        schema_version: super::RECORD_SCHEMA_VERSION,
        run_id: labels.run_id.clone(),
        config_label: labels.config_label.clone(),
        episode_index: labels.episode_index,
        seed: setup.seed,
        setup: setup.clone(),
        critic: critic.name(),
        actor: actor.name(),
        block_info,
        bt_before,
        bt_after: serialize(&refinement.tree),
        bt_diff,
        patch: refinement.patch.clone(),
        checkpoints,
        full_trace: execution.trace,
        world_events: execution.world.events.clone(),
        ground_truth_issues: real,
        score,
        metrics,
        notifications,
        degraded: !errors.is_empty(),
        error_log: errors,
    };
    Ok((record, refinement.tree))
}

fn metrics(
    episode_index: u32,
    score: i64,
    real: &[GroundTruthIssue],
    checkpoints: &[CheckpointRecord],
) -> MetricsRecord {
    let feedback: Vec<_> = checkpoints.iter().filter_map(|c| c.feedback.as_ref()).collect();
    let alarm_count = checkpoints.iter().filter(|c| c.alarm_fired).count() as u32;
    let claims = feedback
        .iter()
        .flat_map(|f| f.issues.iter().map(|i| (i.category, i.node.as_ref())));
    let detected = count_detected(real, claims);
    let any = !feedback.is_empty();
    MetricsRecord {
        episode_index,
        score,
        idr: any.then(|| idr(detected, real.len())),
        mean_confidence: any
            .then(|| feedback.iter().map(|f| f.confidence).sum::<f64>() / feedback.len() as f64),
        alarm_count,
        alarm_rate: any.then(|| f64::from(alarm_count) / checkpoints.len() as f64),
        detected_issue_count: if any { detected } else { 0 },
        real_issue_count: real.len(),
    }
}

impl ErrorEntry {
    pub fn new(stage: ErrorStage, message: String) -> Self {
        ErrorEntry {
            stage,
            checkpoint: None,
            message,
            remote: false,
        }
    }

    fn critic(checkpoint: usize, e: &CriticError) -> Self {
        ErrorEntry {
            stage: ErrorStage::Critic,
            checkpoint: Some(checkpoint),
            message: e.to_string(),
            remote: true,
        }
    }

    fn actor(e: &ActorError) -> Self {
        ErrorEntry {
            stage: ErrorStage::Actor,
            checkpoint: None,
            message: e.to_string(),
            remote: matches!(e, ActorError::Timeout(_) | ActorError::MalformedReply(_)),
        }
    }
}
