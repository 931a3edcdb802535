//! World generation parameters.

use serde::{Deserialize, Serialize};

use crate::types::ObjectTypeId;
use crate::GridError;

pub const MIN_SIZE: usize = 2;
pub const MAX_SIZE: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub height: usize,
    pub width: usize,
    /// Fraction of cells turned into obstacles (split between blocks and water).
    pub wall_density: f64,
    /// Target object count as a fraction of the free cells left after walls.
    pub object_density: f64,
    pub enemy_spawn_prob: f64,
    pub enemy_lifetime: u32,
    pub episode_limit: u32,
    pub seed: u64,
    /// Object types eligible as filler placements; instruction targets are
    /// always placed regardless. Empty means all types from the table.
    #[serde(default)]
    pub placeable_types: Vec<u8>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            height: 10,
            width: 10,
            wall_density: 0.05,
            object_density: 0.15,
            enemy_spawn_prob: 0.03,
            enemy_lifetime: 10,
            episode_limit: 80,
            seed: 0,
            placeable_types: Vec::new(),
        }
    }
}

impl WorldConfig {
    pub fn validate(&self, object_count: usize) -> Result<(), GridError> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(GridError::BadConfig(msg.to_string()))
            }
        };
        check(
            (MIN_SIZE..=MAX_SIZE).contains(&self.height) && (MIN_SIZE..=MAX_SIZE).contains(&self.width),
            "height and width must be in 2..=10",
        )?;
        check(
            (0.0..=0.1).contains(&self.wall_density),
            "wall_density must be in [0, 0.1]",
        )?;
        check(
            (0.0..=0.8).contains(&self.object_density),
            "object_density must be in [0, 0.8]",
        )?;
        check(
            (0.0..=1.0).contains(&self.enemy_spawn_prob),
            "enemy_spawn_prob must be in [0, 1]",
        )?;
        check(self.enemy_lifetime >= 1, "enemy_lifetime must be >= 1")?;
        check(self.episode_limit > 0, "episode_limit must be > 0")?;
        for &t in &self.placeable_types {
            check(
                (t as usize) < object_count,
                "placeable_types entry out of range",
            )?;
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn placeable(&self, object_count: usize) -> Vec<ObjectTypeId> {
        if self.placeable_types.is_empty() {
            (0..object_count as u8).map(ObjectTypeId).collect()
        } else {
            self.placeable_types.iter().map(|&t| ObjectTypeId(t)).collect()
        }
    }
}

/// Splitmix-style seed derivation so each stage/episode gets an independent
/// stream from one root seed.
pub fn derive_seed(base: u64, stream: &str, index: u64) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for b in stream.bytes() {
        h = h.wrapping_mul(0x100_0000_01b3) ^ (b as u64);
    }
    h = h.wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}
