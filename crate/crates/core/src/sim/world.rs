use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    ActionCall, ActionStatus, BlockLocation, BlockState, FaultKind, FaultModel, FieldConfig,
    Placement, Rect, RobotLocation, SimError, WorldEvent, WorldState, ZoneKind, BLOCK_SIZE_MM,
    CARRY_CAPACITY,
};
use crate::bt::NodeId;
use crate::rng::{stream, SimRng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub status: ActionStatus,
    pub duration: f64,
    pub faults: Vec<FaultKind>,
    pub blocks: Vec<String>,
}

/// Fresh world: every block in its initial zone, robot and shelf at their
/// start positions, clock at zero.
pub fn init_world(config: &FieldConfig, seed: u64) -> Result<WorldState, SimError> {
    config.check()?;
    let blocks = config
        .blocks
        .iter()
        .map(|b| BlockState {
            block_id: b.id.clone(),
            location: BlockLocation::InZone {
                zone: b.initial_zone.clone(),
                placement: Placement::FullyInside,
            },
            orientation: b.orientation,
        })
        .collect();
    Ok(WorldState {
        config: config.clone(),
        blocks,
        robot: RobotLocation::Zone(config.start_zone().id.clone()),
        carried: Vec::new(),
        shelf_zone: config.shelf.initial_zone.clone(),
        clock: 0.0,
        rng: stream(seed, Stream::World),
        events: Vec::new(),
    })
}

/// Where a block footprint sits relative to a zone, if it touches it at all.
pub fn classify_placement(block: Rect, zone: Rect) -> Option<Placement> {
    const EPS: f64 = 1e-9;
    let ox = block.right().min(zone.right()) - block.x.max(zone.x);
    let oy = block.top().min(zone.top()) - block.y.max(zone.y);
    if ox > EPS && oy > EPS {
        let inside = block.x >= zone.x - EPS
            && block.y >= zone.y - EPS
            && block.right() <= zone.right() + EPS
            && block.top() <= zone.top() + EPS;
        return Some(if inside {
            Placement::FullyInside
        } else {
            Placement::PartiallyInside
        });
    }
    if ox >= -EPS && oy >= -EPS {
        return Some(Placement::Adjacent);
    }
    None
}

/// Draws one uniform number so the stream advances identically whether or
/// not the fault fires.
fn chance(rng: &mut SimRng, p: f64) -> bool {
    rng.random::<f64>() < p
}

struct Ctx<'a> {
    faults: &'a FaultModel,
    action: &'static str,
    zone: String,
    occurrence_any: u32,
    occurrence_zone: u32,
}

impl Ctx<'_> {
    fn scripted(&self, kind: FaultKind) -> bool {
        self.faults.scripted.iter().any(|s| {
            s.fault == kind
                && s.action == self.action
                && match &s.zone {
                    Some(z) => *z == self.zone && s.occurrence == self.occurrence_zone,
                    None => s.occurrence == self.occurrence_any,
                }
        })
    }

    /// Random draw combined with any scripted override.
    fn fires(&self, rng: &mut SimRng, kind: FaultKind, p: f64) -> bool {
        let random = chance(rng, p);
        random || self.scripted(kind)
    }
}

/// Executes one action call to completion and records a [`WorldEvent`].
///
/// Calls whose preconditions do not hold return an error and leave the world
/// untouched; physical failures (missed grasp, empty zone, blocked shelf
/// target) are reported as [`ActionStatus::Failure`] and still cost time.
pub fn execute_action(
    world: &mut WorldState,
    node: Option<&NodeId>,
    call: &ActionCall,
    faults: &FaultModel,
) -> Result<ActionOutcome, SimError> {
    let zone = match &world.robot {
        RobotLocation::Zone(z) => z.clone(),
        RobotLocation::InTransit => {
            return Err(SimError::PreconditionViolation("robot is in transit".into()))
        }
    };
    precheck(world, &zone, call)?;

    let action = call.name();
    let occurrence_any = 1 + world.events.iter().filter(|e| e.action.name() == action).count() as u32;
    let occurrence_zone = 1 + world
        .events
        .iter()
        .filter(|e| e.action.name() == action && e.zone == zone)
        .count() as u32;
    let ctx = Ctx {
        faults,
        action,
        zone: zone.clone(),
        occurrence_any,
        occurrence_zone,
    };

    let d = &faults.durations;
    let outcome = match call {
        ActionCall::NavigateTo { zone: target } => travel(world, &ctx, target, d.navigate),
        ActionCall::ReturnToStart => {
            let start = world.config.start_zone().id.clone();
            travel(world, &ctx, &start, d.return_to_start)
        }
        ActionCall::PickBlocks { count } => pick(world, &ctx, &zone, *count),
        ActionCall::RotateBlocks { mask } => rotate(world, &ctx, *mask),
        ActionCall::PlaceBlocks => place(world, &ctx, &zone),
        ActionCall::MoveShelf => move_shelf(world, &ctx),
    };

    let start_time = world.clock;
    world.clock += outcome.duration;
    let index = world.events.len() as u32;
    world.events.push(WorldEvent {
        index,
        start_time,
        sim_time: world.clock,
        node: node.cloned(),
        action: call.clone(),
        status: outcome.status,
        faults: outcome.faults.clone(),
        blocks: outcome.blocks.clone(),
        zone,
    });
    Ok(outcome)
}

fn precheck(world: &WorldState, zone: &str, call: &ActionCall) -> Result<(), SimError> {
    let kind = world.config.zone(zone).map(|z| z.kind);
    match call {
        ActionCall::NavigateTo { zone: target } => {
            if world.config.zone(target).is_none() {
                return Err(SimError::PreconditionViolation(format!("no zone `{target}`")));
            }
        }
        ActionCall::PickBlocks { count } => {
            if kind != Some(ZoneKind::Load) {
                return Err(SimError::NotInRequiredZone(format!(
                    "PickBlocks needs a load zone, robot is in `{zone}`"
                )));
            }
            if *count == 0 || world.carried.len() + count > CARRY_CAPACITY {
                return Err(SimError::PreconditionViolation(format!(
                    "cannot pick {count} while carrying {}",
                    world.carried.len()
                )));
            }
        }
        ActionCall::RotateBlocks { .. } => {
            if world.carried.is_empty() {
                return Err(SimError::PreconditionViolation("nothing to rotate".into()));
            }
        }
        ActionCall::PlaceBlocks => {
            if kind != Some(ZoneKind::Unload) {
                return Err(SimError::NotInRequiredZone(format!(
                    "PlaceBlocks needs an unload zone, robot is in `{zone}`"
                )));
            }
            if world.carried.is_empty() {
                return Err(SimError::PreconditionViolation("nothing to place".into()));
            }
        }
        ActionCall::MoveShelf => {
            if zone != world.shelf_zone {
                return Err(SimError::NotInRequiredZone(format!(
                    "shelf is in `{}`, robot is in `{zone}`",
                    world.shelf_zone
                )));
            }
        }
        ActionCall::ReturnToStart => {}
    }
    Ok(())
}

fn success(duration: f64) -> ActionOutcome {
    ActionOutcome {
        status: ActionStatus::Success,
        duration,
        faults: Vec::new(),
        blocks: Vec::new(),
    }
}

fn travel(world: &mut WorldState, ctx: &Ctx, target: &str, base: f64) -> ActionOutcome {
    let stall = ctx.fires(&mut world.rng, FaultKind::NavStall, ctx.faults.p_nav_stall);
    let drop = ctx.fires(&mut world.rng, FaultKind::DropInTransit, ctx.faults.p_drop_in_transit);
    let pick: f64 = world.rng.random();
    if ctx.zone == target {
        return success(0.0);
    }
    let mut out = success(base);
    if stall {
        out.duration += ctx.faults.nav_stall_extra;
        out.faults.push(FaultKind::NavStall);
    }
    if drop && !world.carried.is_empty() {
        let i = ((pick * world.carried.len() as f64) as usize).min(world.carried.len() - 1);
        let id = world.carried.remove(i);
        set_location(world, &id, BlockLocation::OutsideAllZones);
        out.faults.push(FaultKind::DropInTransit);
        out.blocks.push(id);
    }
    world.robot = RobotLocation::Zone(target.to_string());
    out
}

fn pick(world: &mut WorldState, ctx: &Ctx, zone: &str, count: usize) -> ActionOutcome {
    let fail = ctx.fires(&mut world.rng, FaultKind::PickFail, ctx.faults.p_pick_fail);
    let available: Vec<String> = world
        .blocks_in(zone)
        .map(|b| b.block_id.clone())
        .take(count)
        .collect();
    let duration = ctx.faults.durations.pick_per_block * count as f64;
    if available.is_empty() {
        return ActionOutcome {
            status: ActionStatus::Failure,
            ..success(duration)
        };
    }
    if fail {
        return ActionOutcome {
            status: ActionStatus::Failure,
            faults: vec![FaultKind::PickFail],
            ..success(duration)
        };
    }
    for id in &available {
        set_location(world, id, BlockLocation::Carried);
        world.carried.push(id.clone());
    }
    ActionOutcome {
        blocks: available,
        ..success(duration)
    }
}

fn rotate(world: &mut WorldState, ctx: &Ctx, mask: [bool; 4]) -> ActionOutcome {
    let n = world.carried.len();
    let intended: Vec<bool> = (0..n).map(|i| mask[i]).collect();
    let mis = ctx.fires(&mut world.rng, FaultKind::MisRotate, ctx.faults.p_misrotate);
    // one candidate subset is drawn regardless, keeping draw counts fixed
    let mut actual: Vec<bool> = (0..n).map(|_| world.rng.random::<bool>()).collect();
    let mut faults = Vec::new();
    if mis {
        if actual == intended {
            let j = world.rng.random_range(0..n);
            actual[j] = !actual[j];
        }
        faults.push(FaultKind::MisRotate);
    } else {
        actual = intended.clone();
    }
    let rotated: Vec<String> = world
        .carried
        .iter()
        .zip(&actual)
        .filter(|(_, &r)| r)
        .map(|(id, _)| id.clone())
        .collect();
    for id in &rotated {
        if let Some(b) = world.blocks.iter_mut().find(|b| &b.block_id == id) {
            b.orientation = b.orientation.flipped();
        }
    }
    let flips = intended.iter().filter(|&&b| b).count();
    ActionOutcome {
        faults,
        blocks: rotated,
        ..success(ctx.faults.durations.rotate_per_block * flips as f64)
    }
}

fn place(world: &mut WorldState, ctx: &Ctx, zone: &str) -> ActionOutcome {
    let offset = ctx.fires(&mut world.rng, FaultKind::PlaceOffsetPartial, ctx.faults.p_place_offset);
    let outside_roll = chance(&mut world.rng, ctx.faults.p_offset_outside);
    let victim_roll: f64 = world.rng.random();
    let gap = world.rng.random_range(0..=100u32) as f64;
    let scripted_outside = ctx.scripted(FaultKind::PlaceOffsetOutside);

    let extent = world.config.zone(zone).expect("prechecked").extent;
    let carried = std::mem::take(&mut world.carried);
    let already = world.blocks_in(zone).count();
    let victim = ((victim_roll * carried.len() as f64) as usize).min(carried.len() - 1);
    let fault = if scripted_outside || (offset && outside_roll) {
        Some(FaultKind::PlaceOffsetOutside)
    } else if offset {
        Some(FaultKind::PlaceOffsetPartial)
    } else {
        None
    };

    let (bw, bh, _) = BLOCK_SIZE_MM;
    for (i, id) in carried.iter().enumerate() {
        let (cx, cy) = slot_center(extent, already + i);
        let cx = match fault {
            Some(FaultKind::PlaceOffsetPartial) if i == victim => extent.right(),
            Some(FaultKind::PlaceOffsetOutside) if i == victim => extent.right() + bw / 2.0 + gap,
            _ => cx,
        };
        let rect = Rect {
            x: cx - bw / 2.0,
            y: cy - bh / 2.0,
            w: bw,
            h: bh,
        };
        let location = locate(&world.config, zone, rect);
        set_location(world, id, location);
    }
    ActionOutcome {
        faults: fault.into_iter().collect(),
        blocks: carried.clone(),
        ..success(ctx.faults.durations.place_per_block * carried.len() as f64)
    }
}

/// Centre of the `slot`-th resting position in a zone; slots fill row by row
/// and extra blocks stack on the last slot.
fn slot_center(extent: Rect, slot: usize) -> (f64, f64) {
    let (bw, bh, _) = BLOCK_SIZE_MM;
    let cols = ((extent.w / (bw + 10.0)).floor() as usize).max(1);
    let rows = ((extent.h / (bh + 10.0)).floor() as usize).max(1);
    let slot = slot.min(cols * rows - 1);
    let (col, row) = (slot % cols, slot / cols);
    let x = (extent.x + 5.0 + bw / 2.0 + col as f64 * (bw + 10.0)).min(extent.right() - bw / 2.0);
    let y = (extent.y + 5.0 + bh / 2.0 + row as f64 * (bh + 10.0)).min(extent.top() - bh / 2.0);
    (x, y)
}

/// The intended zone wins if the block touches it; otherwise the first other
/// zone it overlaps.
fn locate(config: &FieldConfig, intended: &str, rect: Rect) -> BlockLocation {
    let target = config.zone(intended).expect("prechecked");
    if let Some(placement) = classify_placement(rect, target.extent) {
        return BlockLocation::InZone {
            zone: intended.to_string(),
            placement,
        };
    }
    for z in &config.zones {
        if let Some(p @ (Placement::FullyInside | Placement::PartiallyInside)) =
            classify_placement(rect, z.extent)
        {
            return BlockLocation::InZone {
                zone: z.id.clone(),
                placement: p,
            };
        }
    }
    BlockLocation::OutsideAllZones
}

fn move_shelf(world: &mut WorldState, ctx: &Ctx) -> ActionOutcome {
    let target = world.config.shelf.target_zone.clone();
    if world.shelf_zone == target {
        return success(0.0);
    }
    let duration = ctx.faults.durations.move_shelf;
    if world.blocks_in(&target).next().is_some() {
        return ActionOutcome {
            status: ActionStatus::Failure,
            ..success(duration)
        };
    }
    world.shelf_zone = target.clone();
    world.robot = RobotLocation::Zone(target);
    success(duration)
}

fn set_location(world: &mut WorldState, id: &str, location: BlockLocation) {
    if let Some(b) = world.blocks.iter_mut().find(|b| b.block_id == id) {
        b.location = location;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{parse_field, Orientation, ScriptedFault};

    fn field() -> FieldConfig {
        parse_field(
            r#"
field_seed_label = "t"
shelf = { initial_zone = "SH0", target_zone = "SH1" }
zones = [
  { id = "S", kind = "StartFinish", extent = { x = 0, y = 0, w = 400, h = 400 } },
  { id = "L1", kind = "Load", extent = { x = 1000, y = 0, w = 400, h = 300 } },
  { id = "U1", kind = "Unload", extent = { x = 2000, y = 0, w = 400, h = 300 } },
  { id = "SH0", kind = "ShelfInitial", extent = { x = 0, y = 1000, w = 400, h = 300 } },
  { id = "SH1", kind = "ShelfTarget", extent = { x = 1000, y = 1000, w = 400, h = 300 } },
]
blocks = [
  { id = "b1", initial_zone = "L1", orientation = "BlueUp" },
  { id = "b2", initial_zone = "L1", orientation = "OrangeUp" },
]
"#,
        )
        .unwrap()
    }

    fn run(w: &mut WorldState, call: ActionCall, f: &FaultModel) -> ActionOutcome {
        execute_action(w, None, &call, f).unwrap()
    }

    #[test]
    fn nominal_transport() {
        let f = FaultModel::none();
        let mut w = init_world(&field(), 1).unwrap();
        run(&mut w, ActionCall::NavigateTo { zone: "L1".into() }, &f);
        let p = run(&mut w, ActionCall::PickBlocks { count: 4 }, &f);
        assert_eq!(p.blocks, ["b1", "b2"]);
        run(&mut w, ActionCall::RotateBlocks { mask: [false, true, false, false] }, &f);
        run(&mut w, ActionCall::NavigateTo { zone: "U1".into() }, &f);
        run(&mut w, ActionCall::PlaceBlocks, &f);
        for b in &w.blocks {
            assert_eq!(b.orientation, Orientation::BlueUp);
            assert_eq!(
                b.location,
                BlockLocation::InZone {
                    zone: "U1".into(),
                    placement: Placement::FullyInside
                }
            );
        }
        // 6 + 4 * 2 + 1.5 + 6 + 2 * 2
        assert_eq!(w.clock, 25.5);
        assert_eq!(w.events.len(), 5);
    }

    #[test]
    fn precondition_errors_leave_world_untouched() {
        let f = FaultModel::default();
        let mut w = init_world(&field(), 1).unwrap();
        let before = w.clone();
        assert!(matches!(
            execute_action(&mut w, None, &ActionCall::PickBlocks { count: 1 }, &f),
            Err(SimError::NotInRequiredZone(_))
        ));
        assert!(matches!(
            execute_action(&mut w, None, &ActionCall::PlaceBlocks, &f),
            Err(SimError::NotInRequiredZone(_))
        ));
        assert!(matches!(
            execute_action(&mut w, None, &ActionCall::NavigateTo { zone: "nowhere".into() }, &f),
            Err(SimError::PreconditionViolation(_))
        ));
        assert_eq!(w, before);
    }

    #[test]
    fn scripted_faults_fire_on_the_named_occurrence() {
        let mut f = FaultModel::none();
        f.scripted.push(ScriptedFault {
            action: "PickBlocks".into(),
            zone: Some("L1".into()),
            occurrence: 2,
            fault: FaultKind::PickFail,
        });
        let mut w = init_world(&field(), 3).unwrap();
        run(&mut w, ActionCall::NavigateTo { zone: "L1".into() }, &f);
        assert_eq!(run(&mut w, ActionCall::PickBlocks { count: 1 }, &f).status, ActionStatus::Success);
        let second = run(&mut w, ActionCall::PickBlocks { count: 1 }, &f);
        assert_eq!(second.status, ActionStatus::Failure);
        assert_eq!(second.faults, [FaultKind::PickFail]);
        assert_eq!(run(&mut w, ActionCall::PickBlocks { count: 1 }, &f).status, ActionStatus::Success);
    }

    #[test]
    fn misrotation_never_matches_intent() {
        let mut f = FaultModel::none();
        f.p_misrotate = 1.0;
        for seed in 0..50 {
            let mut w = init_world(&field(), seed).unwrap();
            run(&mut w, ActionCall::NavigateTo { zone: "L1".into() }, &f);
            run(&mut w, ActionCall::PickBlocks { count: 2 }, &f);
            run(&mut w, ActionCall::RotateBlocks { mask: [false, true, false, false] }, &f);
            let orient: Vec<_> = w.blocks.iter().map(|b| b.orientation).collect();
            assert_ne!(orient, [Orientation::BlueUp, Orientation::BlueUp]);
        }
    }

    #[test]
    fn empty_load_zone_fails_and_shelf_blocked() {
        let f = FaultModel::none();
        let mut w = init_world(&field(), 1).unwrap();
        run(&mut w, ActionCall::NavigateTo { zone: "L1".into() }, &f);
        run(&mut w, ActionCall::PickBlocks { count: 2 }, &f);
        run(&mut w, ActionCall::NavigateTo { zone: "U1".into() }, &f);
        run(&mut w, ActionCall::PlaceBlocks, &f);
        run(&mut w, ActionCall::NavigateTo { zone: "L1".into() }, &f);
        assert_eq!(run(&mut w, ActionCall::PickBlocks { count: 1 }, &f).status, ActionStatus::Failure);

        run(&mut w, ActionCall::NavigateTo { zone: "SH0".into() }, &f);
        assert_eq!(run(&mut w, ActionCall::MoveShelf, &f).status, ActionStatus::Success);
        assert!(w.shelf_at_target());
        assert_eq!(w.robot_zone(), Some("SH1"));
    }

    #[test]
    fn placement_classes() {
        let zone = Rect { x: 0.0, y: 0.0, w: 100.0, h: 100.0 };
        let r = |x, y| Rect { x, y, w: 20.0, h: 10.0 };
        assert_eq!(classify_placement(r(10.0, 10.0), zone), Some(Placement::FullyInside));
        assert_eq!(classify_placement(r(90.0, 10.0), zone), Some(Placement::PartiallyInside));
        assert_eq!(classify_placement(r(100.0, 10.0), zone), Some(Placement::Adjacent));
        assert_eq!(classify_placement(r(101.0, 10.0), zone), None);
    }

    #[test]
    fn same_seed_same_world() {
        let f = FaultModel::default();
        let go = |seed| {
            let mut w = init_world(&field(), seed).unwrap();
            for _ in 0..3 {
                let _ = execute_action(&mut w, None, &ActionCall::NavigateTo { zone: "L1".into() }, &f);
                let _ = execute_action(&mut w, None, &ActionCall::PickBlocks { count: 1 }, &f);
                let _ = execute_action(&mut w, None, &ActionCall::NavigateTo { zone: "U1".into() }, &f);
                let _ = execute_action(&mut w, None, &ActionCall::PlaceBlocks, &f);
            }
            w
        };
        assert_eq!(go(9), go(9));
    }
}
