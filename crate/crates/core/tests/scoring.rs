mod common;

use common::scoring_oracle::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vrl_core::scoring::{score_episode, ScoringRules};
use vrl_core::sim::{shipped_fields, BlockLocation, Orientation};

#[test]
fn matches_rule_by_rule_oracle_on_random_states() {
    check_random_states(10_000, 2024).unwrap();
}

#[test]
fn worked_examples() {
    check_worked_examples().unwrap();
    let mut w = example_world();
    w.clock = 200.0;
    let s = score_episode(&w, &ScoringRules::default());
    assert_eq!((s.time_penalty, s.overtime_penalty), (-200, -20));
}

#[test]
fn shelf_bonus_is_opt_in() {
    let mut w = example_world();
    w.shelf_zone = w.config.shelf.target_zone.clone();
    assert_eq!(score_episode(&w, &ScoringRules::default()).shelf_bonus, 0);
    let rules = ScoringRules { shelf_bonus: 15 };
    assert_eq!(score_episode(&w, &rules).total, 35);
}

#[test]
fn monotone_in_block_outcomes() {
    let fields = shipped_fields();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rules = ScoringRules::default();
    for i in 0..2_000 {
        let w = random_state(&mut rng, &fields[i % 5]);
        let base = score_episode(&w, &rules).total;
        let Some(idx) = w.blocks.iter().position(|b| {
            !matches!(&b.location, BlockLocation::InZone { zone, .. } if w.config.is_unload(zone))
                && b.location != BlockLocation::OutsideAllZones
        }) else {
            continue;
        };
        let mut better = w.clone();
        better.blocks[idx].location = in_u1();
        better.blocks[idx].orientation = Orientation::BlueUp;
        assert!(score_episode(&better, &rules).total >= base);
        let mut worse = w.clone();
        worse.blocks[idx].location = BlockLocation::OutsideAllZones;
        assert!(score_episode(&worse, &rules).total <= base);
    }
}
