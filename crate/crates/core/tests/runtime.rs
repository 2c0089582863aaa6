use std::collections::BTreeSet;

use vrl_core::actor::{ActorMemory, RuleBasedRepairActor, ScoreOnlyActor};
use vrl_core::bt::BehaviorTree;
use vrl_core::critic::{Critic, CriticProfile, NullCritic, OracleCritic, RemoteCritic};
use vrl_core::dsl::{parse, NodeLibrary};
use vrl_core::remote::{StubTransport, TransportError};
use vrl_core::runtime::{
    replay, run_campaign, run_episode, ActorSpec, CriticSpec, EpisodeLabels, EpisodeRecord,
    EpisodeSetup, ErrorStage, ProfileRef, ReplayDivergence, RunConfig,
};
use vrl_core::scoring::ScoringRules;
use vrl_core::sim::{shipped_fields, FaultKind, FaultModel, ObservationMode, ScriptedFault};

/// Field 1: L1-3 and L2-2 lie orange side up.
const OPTIMAL: &str = "(root: Sequence
  (batch_l1: Sequence
    (goto_l1: Action NavigateTo zone=L1)
    (pick_l1: Action PickBlocks count=4)
    (flip_l1: Action RotateBlocks mask=0010)
    (carry_l1: Action NavigateTo zone=U1)
    (place_l1: Action PlaceBlocks))
  (batch_l2: Sequence
    (goto_l2: Action NavigateTo zone=L2)
    (pick_l2: Action PickBlocks count=4)
    (flip_l2: Action RotateBlocks mask=0100)
    (carry_l2: Action NavigateTo zone=U2)
    (place_l2: Action PlaceBlocks))
  (batch_l3: Sequence
    (goto_l3: Action NavigateTo zone=L3)
    (pick_l3: Action PickBlocks count=4)
    (carry_l3: Action NavigateTo zone=U1)
    (place_l3: Action PlaceBlocks))
  (shelf: Sequence
    (goto_shelf: Action NavigateTo zone=SH0)
    (push: Action MoveShelf))
  (home: Action ReturnToStart))";

fn setup(faults: FaultModel, seed: u64) -> EpisodeSetup {
    EpisodeSetup {
        field: shipped_fields()[0].clone(),
        faults,
        scoring: ScoringRules::default(),
        seed,
    }
}

fn labels(k: u32) -> EpisodeLabels {
    EpisodeLabels {
        run_id: "test".into(),
        config_label: "field-1".into(),
        episode_index: k,
    }
}

fn episode(tree: &BehaviorTree, setup: &EpisodeSetup, critic: &mut dyn Critic) -> EpisodeRecord {
    let mut actor = RuleBasedRepairActor::default();
    run_episode(
        tree,
        setup,
        &labels(1),
        &NodeLibrary::warehouse(),
        critic,
        &mut actor,
        &mut ActorMemory::default(),
        false,
    )
    .unwrap()
    .0
}

fn perfect() -> OracleCritic {
    OracleCritic::new(CriticProfile::perfect())
}

#[test]
fn optimal_tree_without_faults_is_clean() {
    let tree = parse(OPTIMAL).unwrap();
    let r = episode(&tree, &setup(FaultModel::none(), 3), &mut perfect());
    assert!(r.ground_truth_issues.is_empty(), "{:?}", r.ground_truth_issues);
    assert_eq!(r.metrics.alarm_count, 0);
    assert!(r.notifications.is_empty());
    assert_eq!(r.metrics.idr, Some(1.0));
    assert!(!r.degraded);
    // 12 blocks * 10 + 3 full batches * 10 + home 20, minus the seconds spent
    assert_eq!(r.score.total, 170 - r.full_trace.last().unwrap().sim_time.floor() as i64);
    assert!(r.score.total > 0);
    assert_eq!(r.patch, None);
}

#[test]
fn checkpoints_follow_the_root_children() {
    let tree = parse(OPTIMAL).unwrap();
    let r = episode(&tree, &setup(FaultModel::default(), 4), &mut perfect());
    let modes = r.modes();
    assert_eq!(modes.first(), Some(&ObservationMode::Initial));
    assert_eq!(modes.last(), Some(&ObservationMode::Final));
    assert!(modes[1..modes.len() - 1].iter().all(|m| *m == ObservationMode::Intermediate));
    let windows: Vec<&str> = r.checkpoints.iter().filter_map(|c| c.subtree.as_ref()).map(|s| s.as_str()).collect();
    let root: Vec<&str> = tree.root_node().unwrap().children.iter().map(|c| c.as_str()).collect();
    assert_eq!(windows, root[..windows.len()]);
}

#[test]
fn one_drop_raises_one_intermediate_alarm() {
    let mut faults = FaultModel::none();
    faults.scripted.push(ScriptedFault {
        action: "NavigateTo".into(),
        zone: Some("L1".into()),
        occurrence: 1,
        fault: FaultKind::DropInTransit,
    });
    let tree = parse(OPTIMAL).unwrap();
    let r = episode(&tree, &setup(faults, 5), &mut perfect());
    let alarmed: Vec<_> = r
        .checkpoints
        .iter()
        .filter(|c| c.alarm_fired && c.mode == ObservationMode::Intermediate)
        .collect();
    assert_eq!(alarmed.len(), 1);
    assert_eq!(alarmed[0].subtree.as_ref().unwrap().as_str(), "batch_l1");
    assert_eq!(r.metrics.alarm_count as usize, r.notifications.len());
    for n in &r.notifications {
        let c = &r.checkpoints[n.checkpoint];
        assert!(c.alarm_fired);
        assert_eq!(Some(n.alarm_score), c.feedback.as_ref().map(|f| f.alarm_score));
        assert_eq!((n.run_id.as_str(), n.episode_index), ("test", 1));
    }
}

#[test]
fn null_critic_gives_no_feedback() {
    let tree = parse(OPTIMAL).unwrap();
    let mut actor = ScoreOnlyActor::default();
    let (r, _) = run_episode(
        &tree,
        &setup(FaultModel::default(), 6),
        &labels(1),
        &NodeLibrary::warehouse(),
        &mut NullCritic,
        &mut actor,
        &mut ActorMemory::default(),
        false,
    )
    .unwrap();
    assert!(r.checkpoints.iter().all(|c| c.feedback.is_none() && !c.alarm_fired));
    assert_eq!(r.metrics.alarm_count, 0);
    assert_eq!((r.metrics.idr, r.metrics.alarm_rate, r.metrics.mean_confidence), (None, None, None));
}

#[test]
fn memory_grows_by_one_per_episode() {
    let mut tree = parse(OPTIMAL).unwrap();
    let mut memory = ActorMemory::default();
    let mut critic = OracleCritic::new(CriticProfile::ft_3b());
    let mut actor = RuleBasedRepairActor::default();
    for k in 1..=4 {
        let (r, next) = run_episode(
            &tree,
            &setup(FaultModel::default(), 100 + u64::from(k)),
            &labels(k),
            &NodeLibrary::warehouse(),
            &mut critic,
            &mut actor,
            &mut memory,
            false,
        )
        .unwrap();
        assert_eq!(memory.entries.len(), k as usize);
        assert_eq!(memory.entries.last().unwrap().real_score, r.score.total);
        tree = next;
    }
}

#[test]
fn unreachable_remote_critic_degrades_but_finishes() {
    let stub = StubTransport::new(vec![Err(TransportError::Unreachable("down".into()))]);
    let mut critic = RemoteCritic::new(Box::new(stub), 2);
    let tree = parse(OPTIMAL).unwrap();
    let r = episode(&tree, &setup(FaultModel::none(), 7), &mut critic);
    assert!(r.degraded && r.remote_failure());
    assert_eq!(r.error_log.len(), r.checkpoints.len());
    assert!(r.error_log.iter().all(|e| e.stage == ErrorStage::Critic && e.remote));
    assert!(r.score.total > 0, "execution should not depend on the critic");
}

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::new(&["field-2", "field-4"]);
    cfg.episodes_per_config = 3;
    cfg.seeds = vec![1, 2];
    cfg.critic = CriticSpec::Oracle {
        profile: ProfileRef::Named("ft-3b".into()),
    };
    cfg.actor = ActorSpec::RuleBased {
        rules: Default::default(),
    };
    cfg
}

#[test]
fn campaign_layout_and_rerun() {
    let cfg = small_config();
    let a = run_campaign(&cfg).unwrap();
    let labels: Vec<&str> = a.lineages.iter().map(|l| l.config_label.as_str()).collect();
    assert_eq!(labels, ["field-2/seed-1", "field-2/seed-2", "field-4/seed-1", "field-4/seed-2"]);
    for l in &a.lineages {
        let idx: Vec<u32> = l.records.iter().map(|r| r.episode_index).collect();
        assert_eq!(idx, [1, 2, 3]);
        let seeds: BTreeSet<u64> = l.records.iter().map(|r| r.seed).collect();
        assert_eq!(seeds.len(), 3);
        for w in l.records.windows(2) {
            assert_eq!(w[0].bt_after, w[1].bt_before);
        }
    }
    let b = run_campaign(&cfg).unwrap();
    let dump = |o: &vrl_core::runtime::CampaignOutput| {
        o.records().map(|r| serde_json::to_string(r).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(dump(&a), dump(&b));
}

#[test]
fn single_episode_campaign_aggregates_to_itself() {
    let mut cfg = RunConfig::new(&["field-3"]);
    cfg.episodes_per_config = 1;
    let out = run_campaign(&cfg).unwrap();
    let r = out.records().next().unwrap();
    let score = out.tables.iter().find(|t| t.metric.file_stem() == "score").unwrap();
    assert_eq!(score.mean, vec![Some(r.score.total as f64)]);
    assert_eq!(score.rows.len(), 1);
}

#[test]
fn replay_detects_tampering() {
    let out = run_campaign(&small_config()).unwrap();
    let records: Vec<&EpisodeRecord> = out.records().collect();
    for r in &records {
        replay(r).unwrap();
    }

    let mut tampered = records[0].clone();
    tampered.score.total += 1;
    assert!(matches!(replay(&tampered), Err(ReplayDivergence::Score { .. })));

    let mut other = records[1].clone();
    other.setup.faults = FaultModel::none();
    other.setup.faults.scripted.push(ScriptedFault {
        action: "PickBlocks".into(),
        zone: None,
        occurrence: 1,
        fault: FaultKind::PickFail,
    });
    assert!(matches!(replay(&other), Err(ReplayDivergence::Event { .. })));
}

#[test]
fn config_parsing_and_checks() {
    let cfg = RunConfig::parse(
        r#"
        fields = ["field-1", "field-2"]
        episodes_per_config = 2
        seeds = [3]
        [critic]
        kind = "oracle"
        profile = "gemini"
        [actor]
        kind = "score_only"
        "#,
    )
    .unwrap();
    assert_eq!(cfg.run_id, "run");
    assert!(matches!(cfg.actor, ActorSpec::ScoreOnly));
    assert_eq!(cfg.build_critic().unwrap().name(), "gemini");

    for bad in [
        "fields = [\"field-1\"]\nbogus = 1",
        "fields = []",
        "fields = [\"field-1\", \"field-1\"]",
        "fields = [\"field-1\"]\nseeds = [1, 1]",
        "fields = [\"field-1\"]\nepisodes_per_config = 0",
        "fields = [\"field-1\"]\n[critic]\nkind = \"oracle\"\nprofile = \"clairvoyant\"",
    ] {
        assert!(RunConfig::parse(bad).is_err(), "accepted: {bad}");
    }
}
