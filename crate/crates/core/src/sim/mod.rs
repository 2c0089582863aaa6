//! Warehouse-logistics field simulator.
//!
//! Zones are discrete places; their millimetre extents are only used to
//! classify where a put-down block ends up. Every action completes within a
//! single call and advances the simulated clock by its duration. Faults are
//! drawn from the world's own random stream.

mod executor;
mod fields;
mod issues;
mod observe;
mod world;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::NodeId;
use crate::rng::SimRng;

pub use executor::{RejectedCall, WorldExecutor};
pub use fields::{load_field, parse_field, shipped_fields};
pub use issues::{
    checkpoint_issues, ground_truth_issues, setup_issues, vacuous_cursor_issues, GroundTruthIssue,
    IssueCategory,
};
pub use observe::{observe, BlockInfoEntry, Camera, Observation, ObservationMode, PerceivedBlock, PerceptionNoise, ZoneView};
pub use world::{classify_placement, execute_action, init_world, ActionOutcome};

/// Footprint and height of a block in millimetres.
pub const BLOCK_SIZE_MM: (f64, f64, f64) = (150.0, 50.0, 30.0);
/// Blocks the gripper can hold at once.
pub const CARRY_CAPACITY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ZoneKind {
    Load,
    Unload,
    StartFinish,
    ShelfInitial,
    ShelfTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn top(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub id: String,
    pub kind: ZoneKind,
    pub extent: Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    /// Blue face up: correctly oriented.
    BlueUp,
    /// Orange face up: upside down.
    OrangeUp,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::BlueUp => Orientation::OrangeUp,
            Orientation::OrangeUp => Orientation::BlueUp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub id: String,
    pub initial_zone: String,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShelfSpec {
    pub initial_zone: String,
    pub target_zone: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub field_seed_label: String,
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
    pub shelf: ShelfSpec,
    pub zones: Vec<Zone>,
    pub blocks: Vec<BlockSpec>,
}

fn default_time_limit() -> f64 {
    180.0
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum SimError {
    #[error("invalid field config: {0}")]
    InvalidConfig(String),
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("robot is not in a required zone: {0}")]
    NotInRequiredZone(String),
    #[error("bad action: {0}")]
    BadAction(String),
}

impl FieldConfig {
    pub fn zone(&self, id: &str) -> Option<&Zone> {
        self.zones.iter().find(|z| z.id == id)
    }

    pub fn zones_of(&self, kind: ZoneKind) -> impl Iterator<Item = &Zone> {
        self.zones.iter().filter(move |z| z.kind == kind)
    }

    pub fn start_zone(&self) -> &Zone {
        self.zones_of(ZoneKind::StartFinish)
            .next()
            .expect("validated config has a start zone")
    }

    pub fn is_unload(&self, zone: &str) -> bool {
        self.zone(zone).is_some_and(|z| z.kind == ZoneKind::Unload)
    }

    pub fn check(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        let mut ids = BTreeSet::new();
        for z in &self.zones {
            if !ids.insert(z.id.as_str()) {
                return bad(format!("zone `{}` declared twice", z.id));
            }
            if !(z.extent.w > 0.0 && z.extent.h > 0.0) {
                return bad(format!("zone `{}` has an empty extent", z.id));
            }
        }
        let count = |k| self.zones_of(k).count();
        if count(ZoneKind::StartFinish) != 1 {
            return bad("exactly one StartFinish zone is required".into());
        }
        if count(ZoneKind::Load) == 0 {
            return bad("at least one Load zone is required".into());
        }
        if count(ZoneKind::Unload) == 0 {
            return bad("at least one Unload zone is required".into());
        }
        if self.shelf.initial_zone == self.shelf.target_zone {
            return bad("shelf initial and target zones must differ".into());
        }
        for z in [&self.shelf.initial_zone, &self.shelf.target_zone] {
            if self.zone(z).is_none() {
                return bad(format!("shelf zone `{z}` does not exist"));
            }
        }
        let mut blocks = BTreeSet::new();
        for b in &self.blocks {
            if !blocks.insert(b.id.as_str()) {
                return bad(format!("block `{}` declared twice", b.id));
            }
            if self.zone(&b.initial_zone).is_none() {
                return bad(format!("block `{}` starts in unknown zone `{}`", b.id, b.initial_zone));
            }
        }
        if self.time_limit.is_nan() || self.time_limit <= 0.0 {
            return bad("time_limit must be positive".into());
        }
        Ok(())
    }

    /// Block ids of a zone in pick order.
    pub fn initial_blocks_in(&self, zone: &str) -> Vec<&BlockSpec> {
        self.blocks.iter().filter(|b| b.initial_zone == zone).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    FullyInside,
    PartiallyInside,
    /// Touching the zone boundary without overlapping it.
    Adjacent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "at")]
pub enum BlockLocation {
    InZone { zone: String, placement: Placement },
    Carried,
    OutsideAllZones,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockState {
    pub block_id: String,
    pub location: BlockLocation,
    pub orientation: Orientation,
}

impl BlockState {
    pub fn zone(&self) -> Option<&str> {
        match &self.location {
            BlockLocation::InZone { zone, .. } => Some(zone),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RobotLocation {
    Zone(String),
    InTransit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action")]
pub enum ActionCall {
    NavigateTo { zone: String },
    PickBlocks { count: usize },
    RotateBlocks { mask: [bool; 4] },
    PlaceBlocks,
    MoveShelf,
    ReturnToStart,
}

impl ActionCall {
    pub const NAMES: [&'static str; 6] = [
        "NavigateTo",
        "PickBlocks",
        "RotateBlocks",
        "PlaceBlocks",
        "MoveShelf",
        "ReturnToStart",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ActionCall::NavigateTo { .. } => "NavigateTo",
            ActionCall::PickBlocks { .. } => "PickBlocks",
            ActionCall::RotateBlocks { .. } => "RotateBlocks",
            ActionCall::PlaceBlocks => "PlaceBlocks",
            ActionCall::MoveShelf => "MoveShelf",
            ActionCall::ReturnToStart => "ReturnToStart",
        }
    }

    pub fn from_params(name: &str, params: &crate::bt::Params) -> Result<Self, SimError> {
        let get = |k: &str| {
            params
                .get(k)
                .ok_or_else(|| SimError::BadAction(format!("{name} needs `{k}`")))
        };
        Ok(match name {
            "NavigateTo" => ActionCall::NavigateTo {
                zone: get("zone")?.clone(),
            },
            "PickBlocks" => {
                let raw = get("count")?;
                let count = raw
                    .parse::<usize>()
                    .map_err(|_| SimError::BadAction(format!("count `{raw}` is not a number")))?;
                ActionCall::PickBlocks { count }
            }
            "RotateBlocks" => ActionCall::RotateBlocks {
                mask: parse_mask(get("mask")?)?,
            },
            "PlaceBlocks" => ActionCall::PlaceBlocks,
            "MoveShelf" => ActionCall::MoveShelf,
            "ReturnToStart" => ActionCall::ReturnToStart,
            other => return Err(SimError::BadAction(format!("unknown action `{other}`"))),
        })
    }
}

pub fn parse_mask(s: &str) -> Result<[bool; 4], SimError> {
    let bits: Vec<bool> = s
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(SimError::BadAction(format!("mask `{s}` is not a bit string"))),
        })
        .collect::<Result<_, _>>()?;
    bits.try_into()
        .map_err(|_| SimError::BadAction(format!("mask `{s}` must have 4 bits")))
}

pub fn format_mask(mask: [bool; 4]) -> String {
    mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    PickFail,
    DropInTransit,
    MisRotate,
    PlaceOffsetPartial,
    PlaceOffsetOutside,
    NavStall,
}

/// Forces `fault` on the `occurrence`-th (1-based) call of `action`, counted
/// per episode and, when `zone` is set, only for calls made in that zone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedFault {
    pub action: String,
    #[serde(default)]
    pub zone: Option<String>,
    pub occurrence: u32,
    pub fault: FaultKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Durations {
    pub navigate: f64,
    pub pick_per_block: f64,
    pub rotate_per_block: f64,
    pub place_per_block: f64,
    pub move_shelf: f64,
    pub return_to_start: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Durations {
            navigate: 6.0,
            pick_per_block: 2.0,
            rotate_per_block: 1.5,
            place_per_block: 2.0,
            move_shelf: 12.0,
            return_to_start: 6.0,
        }
    }
}

/// Execution-uncertainty model. The default rates are calibration knobs for
/// desk-scale runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultModel {
    pub p_pick_fail: f64,
    pub p_drop_in_transit: f64,
    pub p_misrotate: f64,
    pub p_place_offset: f64,
    /// Share of offset placements that end up outside every zone; the rest
    /// land partially inside.
    pub p_offset_outside: f64,
    pub p_nav_stall: f64,
    pub nav_stall_extra: f64,
    pub durations: Durations,
    pub scripted: Vec<ScriptedFault>,
}

impl Default for FaultModel {
    fn default() -> Self {
        FaultModel {
            p_pick_fail: 0.05,
            p_drop_in_transit: 0.03,
            p_misrotate: 0.05,
            p_place_offset: 0.10,
            p_offset_outside: 0.3,
            p_nav_stall: 0.10,
            nav_stall_extra: 5.0,
            durations: Durations::default(),
            scripted: Vec::new(),
        }
    }
}

impl FaultModel {
    /// No random faults at all.
    pub fn none() -> Self {
        FaultModel {
            p_pick_fail: 0.0,
            p_drop_in_transit: 0.0,
            p_misrotate: 0.0,
            p_place_offset: 0.0,
            p_offset_outside: 0.0,
            p_nav_stall: 0.0,
            ..FaultModel::default()
        }
    }

    pub fn check(&self) -> Result<(), SimError> {
        let probs = [
            ("p_pick_fail", self.p_pick_fail),
            ("p_drop_in_transit", self.p_drop_in_transit),
            ("p_misrotate", self.p_misrotate),
            ("p_place_offset", self.p_place_offset),
            ("p_offset_outside", self.p_offset_outside),
            ("p_nav_stall", self.p_nav_stall),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidConfig(format!("{name}={p} is not a probability")));
            }
        }
        let d = &self.durations;
        for (name, v) in [
            ("navigate", d.navigate),
            ("pick_per_block", d.pick_per_block),
            ("rotate_per_block", d.rotate_per_block),
            ("place_per_block", d.place_per_block),
            ("move_shelf", d.move_shelf),
            ("return_to_start", d.return_to_start),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(SimError::InvalidConfig(format!("duration {name}={v} must be positive")));
            }
        }
        if self.nav_stall_extra < 0.0 {
            return Err(SimError::InvalidConfig("nav_stall_extra must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldEvent {
    pub index: u32,
    pub start_time: f64,
    pub sim_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    pub action: ActionCall,
    pub status: ActionStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<FaultKind>,
    /// Blocks moved or changed by this action, in carry order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<String>,
    /// Robot zone when the action started.
    pub zone: String,
}

/// Complete simulator state. The JSON form leaves out the random stream, so
/// a state read back from disk can be scored and inspected but continues
/// with a fresh stream if stepped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub config: FieldConfig,
    pub blocks: Vec<BlockState>,
    pub robot: RobotLocation,
    #[serde(default)]
    pub carried: Vec<String>,
    pub shelf_zone: String,
    pub clock: f64,
    #[serde(skip, default = "idle_rng")]
    pub rng: SimRng,
    #[serde(default)]
    pub events: Vec<WorldEvent>,
}

fn idle_rng() -> SimRng {
    crate::rng::stream(0, crate::rng::Stream::World)
}

impl WorldState {
    pub fn block(&self, id: &str) -> Option<&BlockState> {
        self.blocks.iter().find(|b| b.block_id == id)
    }

    pub fn robot_zone(&self) -> Option<&str> {
        match &self.robot {
            RobotLocation::Zone(z) => Some(z),
            RobotLocation::InTransit => None,
        }
    }

    pub fn blocks_in(&self, zone: &str) -> impl Iterator<Item = &BlockState> {
        let zone = zone.to_string();
        self.blocks.iter().filter(move |b| b.zone() == Some(zone.as_str()))
    }

    pub fn shelf_at_target(&self) -> bool {
        self.shelf_zone == self.config.shelf.target_zone
    }

    pub fn at_start(&self) -> bool {
        self.robot_zone() == Some(self.config.start_zone().id.as_str())
    }
}
