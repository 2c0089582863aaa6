//! Rule-by-rule scoring oracle and random final states.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrl_core::bt::NodeId;
use vrl_core::scoring::{score_episode, ScoringRules};
use vrl_core::sim::{
    init_world, shipped_fields, ActionCall, ActionStatus, BlockLocation, FieldConfig, Orientation,
    Placement, RobotLocation, WorldEvent, WorldState, ZoneKind,
};

// Rule-by-rule oracle: every table row evaluated separately, then summed.

fn zone_kind(cfg: &FieldConfig, id: &str) -> ZoneKind {
    cfg.zones.iter().find(|z| z.id == id).unwrap().kind
}

fn row_time(w: &WorldState) -> i64 {
    let mut whole = 0i64;
    while (whole + 1) as f64 <= w.clock {
        whole += 1;
    }
    -whole
}

fn row_overtime(w: &WorldState) -> i64 {
    if w.clock > w.config.time_limit {
        -20
    } else {
        0
    }
}

fn block_in_unload(w: &WorldState, id: &str) -> Option<Orientation> {
    let b = w.blocks.iter().find(|b| b.block_id == id)?;
    match &b.location {
        BlockLocation::InZone { zone, .. } if zone_kind(&w.config, zone) == ZoneKind::Unload => {
            Some(b.orientation)
        }
        _ => None,
    }
}

fn row_correct(w: &WorldState) -> i64 {
    w.blocks
        .iter()
        .filter(|b| block_in_unload(w, &b.block_id) == Some(Orientation::BlueUp))
        .count() as i64
        * 10
}

fn row_incorrect(w: &WorldState) -> i64 {
    w.blocks
        .iter()
        .filter(|b| block_in_unload(w, &b.block_id) == Some(Orientation::OrangeUp))
        .count() as i64
        * -5
}

fn row_outside(w: &WorldState) -> i64 {
    let mut n = 0;
    for b in &w.blocks {
        if let BlockLocation::OutsideAllZones = b.location {
            n += 1;
        }
    }
    n * -10
}

fn row_batches(w: &WorldState) -> i64 {
    let mut n = 0;
    for e in &w.events {
        if let ActionCall::PlaceBlocks = e.action {
            let good = e
                .blocks
                .iter()
                .filter(|id| block_in_unload(w, id) == Some(Orientation::BlueUp))
                .count();
            if e.blocks.len() == 4 && good == 4 {
                n += 1;
            }
        }
    }
    n * 10
}

fn row_final_position(w: &WorldState) -> i64 {
    match &w.robot {
        RobotLocation::Zone(z) if zone_kind(&w.config, z) == ZoneKind::StartFinish => 20,
        _ => 0,
    }
}

pub fn oracle(w: &WorldState) -> i64 {
    row_time(w)
        + row_overtime(w)
        + row_correct(w)
        + row_incorrect(w)
        + row_outside(w)
        + row_batches(w)
        + row_final_position(w)
}

pub fn random_state(rng: &mut ChaCha8Rng, field: &FieldConfig) -> WorldState {
    let mut w = init_world(field, rng.random()).unwrap();
    let zones: Vec<String> = field.zones.iter().map(|z| z.id.clone()).collect();
    let placements = [Placement::FullyInside, Placement::PartiallyInside, Placement::Adjacent];
    for b in &mut w.blocks {
        b.orientation = if rng.random() {
            Orientation::BlueUp
        } else {
            Orientation::OrangeUp
        };
        b.location = match rng.random_range(0..6) {
            0 => BlockLocation::OutsideAllZones,
            1 => BlockLocation::Carried,
            _ => BlockLocation::InZone {
                zone: zones[rng.random_range(0..zones.len())].clone(),
                placement: placements[rng.random_range(0..3)],
            },
        };
    }
    w.robot = RobotLocation::Zone(zones[rng.random_range(0..zones.len())].clone());
    w.clock = rng.random_range(0.0..260.0);
    let mut ids: Vec<String> = w.blocks.iter().map(|b| b.block_id.clone()).collect();
    ids.shuffle(rng);
    let mut rest = ids.as_slice();
    let mut index = 0;
    while !rest.is_empty() && rng.random_bool(0.8) {
        let n = rng.random_range(1..=4).min(rest.len());
        let (batch, tail) = rest.split_at(n);
        rest = tail;
        w.events.push(WorldEvent {
            index,
            start_time: 0.0,
            sim_time: 0.0,
            node: Some(NodeId::new(format!("place{index}"))),
            action: if rng.random_bool(0.9) {
                ActionCall::PlaceBlocks
            } else {
                ActionCall::PickBlocks { count: n }
            },
            status: ActionStatus::Success,
            faults: vec![],
            blocks: batch.to_vec(),
            zone: "U1".into(),
        });
        index += 1;
    }
    w
}

pub fn example_world() -> WorldState {
    let mut w = init_world(&shipped_fields()[0], 0).unwrap();
    for b in &mut w.blocks {
        b.orientation = Orientation::BlueUp;
    }
    w
}

pub fn put(w: &mut WorldState, id: &str, location: BlockLocation, o: Orientation) {
    let b = w.blocks.iter_mut().find(|b| b.block_id == id).unwrap();
    b.location = location;
    b.orientation = o;
}

pub fn in_u1() -> BlockLocation {
    BlockLocation::InZone {
        zone: "U1".into(),
        placement: Placement::FullyInside,
    }
}

pub fn place_event(blocks: &[&str]) -> WorldEvent {
    WorldEvent {
        index: 0,
        start_time: 0.0,
        sim_time: 0.0,
        node: None,
        action: ActionCall::PlaceBlocks,
        status: ActionStatus::Success,
        faults: vec![],
        blocks: blocks.iter().map(|s| s.to_string()).collect(),
        zone: "U1".into(),
    }
}


pub fn check_random_states(n: usize, seed: u64) -> Result<(), String> {
    let fields = shipped_fields();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        let w = random_state(&mut rng, &fields[i % fields.len()]);
        let s = score_episode(&w, &ScoringRules::default());
        if s.total != oracle(&w) || s.total != s.component_sum() {
            return Err(format!("state {i}: scored {s:?}, oracle {}", oracle(&w)));
        }
    }
    Ok(())
}

/// The three worked examples: a full correct batch (+10), a mixed batch left
/// away from the start area (-75) and an idle robot at the start (+20).
pub fn check_worked_examples() -> Result<(), String> {
    let ids = ["L1-1", "L1-2", "L1-3", "L1-4"];
    let rules = ScoringRules::default();

    let mut full = example_world();
    for id in ids {
        put(&mut full, id, in_u1(), Orientation::BlueUp);
    }
    full.events.push(place_event(&ids));
    full.clock = 60.0;

    let mut mixed = example_world();
    put(&mut mixed, ids[0], in_u1(), Orientation::BlueUp);
    put(&mut mixed, ids[1], in_u1(), Orientation::BlueUp);
    put(&mut mixed, ids[2], in_u1(), Orientation::OrangeUp);
    put(&mut mixed, ids[3], BlockLocation::OutsideAllZones, Orientation::BlueUp);
    mixed.events.push(place_event(&ids));
    mixed.robot = RobotLocation::Zone("U1".into());
    mixed.clock = 80.0;

    let idle = example_world();

    for (w, want) in [(&full, 10), (&mixed, -75), (&idle, 20)] {
        let got = score_episode(w, &rules).total;
        if got != want || oracle(w) != want {
            return Err(format!("expected {want}, scored {got}, oracle {}", oracle(w)));
        }
    }
    Ok(())
}
