use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BlockLocation, Orientation, WorldState, ZoneKind};
use crate::rng::{keyed_seed, stream, SimRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ObservationMode {
    Initial,
    Intermediate,
    Final,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceivedBlock {
    pub block_id: String,
    /// Upward face colour as perceived, which may be wrong.
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneView {
    pub zone: String,
    pub kind: ZoneKind,
    pub blocks: Vec<PerceivedBlock>,
    /// Perceived number of blocks; may be off by one.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockInfoEntry {
    pub block_id: String,
    pub initial_zone: String,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub mode: ObservationMode,
    pub clock: f64,
    pub robot_zone: Option<String>,
    pub shelf_zone: String,
    pub carried_count: usize,
    pub zones: Vec<ZoneView>,
    pub outside: Vec<String>,
    /// Exact initial orientation of every block, when the critic is given it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_info: Option<Vec<BlockInfoEntry>>,
}

impl Observation {
    pub fn perceived(&self, block_id: &str) -> Option<(&ZoneView, &PerceivedBlock)> {
        self.zones.iter().find_map(|z| {
            z.blocks
                .iter()
                .find(|b| b.block_id == block_id)
                .map(|b| (z, b))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionNoise {
    pub p_color_misread: f64,
    pub p_miscount: f64,
    /// A block blends into the zone floor and is not seen at all.
    #[serde(default)]
    pub p_block_unseen: f64,
}

impl PerceptionNoise {
    pub const EXACT: PerceptionNoise = PerceptionNoise {
        p_color_misread: 0.0,
        p_miscount: 0.0,
        p_block_unseen: 0.0,
    };
}

/// Camera of one episode. Whether a block is misread or overlooked is
/// decided once per block and episode, so every look sees it the same way;
/// zone counts are re-drawn at each look (two draws per zone).
#[derive(Debug, Clone)]
pub struct Camera {
    pub noise: PerceptionNoise,
    seed: u64,
    rng: SimRng,
}

impl Camera {
    pub fn new(noise: PerceptionNoise, seed: u64) -> Self {
        Camera {
            noise,
            seed,
            rng: stream(seed, Stream::Perception),
        }
    }

    /// (misread, unseen) for a block.
    fn block_sight(&self, block_id: &str) -> (bool, bool) {
        let mut r = stream(keyed_seed(self.seed, block_id), Stream::Perception);
        let misread = r.random::<f64>() < self.noise.p_color_misread;
        let unseen = r.random::<f64>() < self.noise.p_block_unseen;
        (misread, unseen)
    }

    pub fn observe(&mut self, world: &WorldState, mode: ObservationMode, with_block_info: bool) -> Observation {
        observe(world, mode, self, with_block_info)
    }
}

/// Renders the world as seen by `camera`.
pub fn observe(
    world: &WorldState,
    mode: ObservationMode,
    camera: &mut Camera,
    with_block_info: bool,
) -> Observation {
    let noise = camera.noise;
    let mut zones = Vec::new();
    for zone in &world.config.zones {
        let mut blocks = Vec::new();
        for b in world.blocks_in(&zone.id) {
            let (misread, unseen) = camera.block_sight(&b.block_id);
            if unseen {
                continue;
            }
            blocks.push(PerceivedBlock {
                block_id: b.block_id.clone(),
                orientation: if misread {
                    b.orientation.flipped()
                } else {
                    b.orientation
                },
            });
        }
        let rng = &mut camera.rng;
        let miscount = rng.random::<f64>() < noise.p_miscount;
        let up = rng.random::<bool>();
        let count = match (miscount, up) {
            (false, _) => blocks.len(),
            (true, true) => blocks.len() + 1,
            (true, false) => blocks.len().saturating_sub(1),
        };
        zones.push(ZoneView {
            zone: zone.id.clone(),
            kind: zone.kind,
            blocks,
            count,
        });
    }
    let outside = world
        .blocks
        .iter()
        .filter(|b| b.location == BlockLocation::OutsideAllZones)
        .map(|b| b.block_id.clone())
        .collect();
    let block_info = with_block_info.then(|| {
        world
            .config
            .blocks
            .iter()
            .map(|b| BlockInfoEntry {
                block_id: b.id.clone(),
                initial_zone: b.initial_zone.clone(),
                orientation: b.orientation,
            })
            .collect()
    });
    Observation {
        mode,
        clock: world.clock,
        robot_zone: world.robot_zone().map(String::from),
        shelf_zone: world.shelf_zone.clone(),
        carried_count: world.carried.len(),
        zones,
        outside,
        block_info,
    }
}
