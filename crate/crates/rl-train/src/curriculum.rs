//! Success-rate-driven curriculum over world size, densities, and
//! instruction count.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub const ADVANCE_THRESHOLD: f64 = 0.85;
pub const RETREAT_THRESHOLD: f64 = 0.5;
pub const WINDOW: usize = 100;

/// One difficulty tier; ranges are sampled per episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumTier {
    pub world_size: usize,
    pub wall_density_max: f64,
    pub object_density_min: f64,
    pub object_density_max: f64,
    pub instructions: usize,
}

/// Tiers track the published sampling ranges: sizes 5..8, wall density up
/// to 0.1, object density up to 0.8, 1..4 instructions.
pub fn default_tiers() -> Vec<CurriculumTier> {
    vec![
        CurriculumTier { world_size: 5, wall_density_max: 0.02, object_density_min: 0.1, object_density_max: 0.3, instructions: 1 },
        CurriculumTier { world_size: 6, wall_density_max: 0.05, object_density_min: 0.1, object_density_max: 0.5, instructions: 2 },
        CurriculumTier { world_size: 7, wall_density_max: 0.08, object_density_min: 0.1, object_density_max: 0.65, instructions: 3 },
        CurriculumTier { world_size: 8, wall_density_max: 0.1, object_density_min: 0.1, object_density_max: 0.8, instructions: 4 },
    ]
}

#[derive(Debug, Clone)]
pub struct CurriculumState {
    pub tiers: Vec<CurriculumTier>,
    pub tier: usize,
    window: VecDeque<bool>,
}

impl CurriculumState {
    pub fn new(tiers: Vec<CurriculumTier>) -> Self {
        assert!(!tiers.is_empty(), "curriculum needs at least one tier");
        CurriculumState {
            tiers,
            tier: 0,
            window: VecDeque::with_capacity(WINDOW),
        }
    }

    pub fn current(&self) -> CurriculumTier {
        self.tiers[self.tier]
    }

    pub fn record(&mut self, success: bool) {
        if self.window.len() == WINDOW {
            self.window.pop_front();
        }
        self.window.push_back(success);
    }

    pub fn moving_average(&self) -> f64 {
        if self.window.is_empty() {
            return 0.0;
        }
        self.window.iter().filter(|s| **s).count() as f64 / self.window.len() as f64
    }
}

/// Advance one tier at >= 0.85, retreat below 0.5, clamp at the ends. The
/// recent-success window resets on any move so the next decision uses
/// fresh evidence.
pub fn curriculum_adjust(mut state: CurriculumState, success_rate: f64) -> CurriculumState {
    debug_assert!((0.0..=1.0).contains(&success_rate));
    if success_rate >= ADVANCE_THRESHOLD && state.tier + 1 < state.tiers.len() {
        state.tier += 1;
        state.window.clear();
    } else if success_rate < RETREAT_THRESHOLD && state.tier > 0 {
        state.tier -= 1;
        state.window.clear();
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_at_both_ends() {
        let s = CurriculumState::new(default_tiers());
        let s = curriculum_adjust(s, 0.3);
        assert_eq!(s.tier, 0, "cannot retreat below the first tier");
        let mut s = CurriculumState::new(default_tiers());
        s.tier = 3;
        let s = curriculum_adjust(s, 0.95);
        assert_eq!(s.tier, 3, "cannot advance past the last tier");
    }

    #[test]
    fn advances_and_retreats_on_thresholds() {
        let mut s = CurriculumState::new(default_tiers());
        s.tier = 1;
        let s = curriculum_adjust(s, 0.9);
        assert_eq!(s.tier, 2);
        let s = curriculum_adjust(s, 0.4);
        assert_eq!(s.tier, 1);
        let s = curriculum_adjust(s, 0.7);
        assert_eq!(s.tier, 1, "mid-band success keeps the tier");
    }

    #[test]
    fn tiers_stay_within_published_ranges() {
        for t in default_tiers() {
            assert!((5..=8).contains(&t.world_size));
            assert!(t.wall_density_max <= 0.1);
            assert!(t.object_density_max <= 0.8 && t.object_density_min >= 0.0);
            assert!((1..=4).contains(&t.instructions));
        }
    }

    #[test]
    fn moving_average_tracks_the_window() {
        let mut s = CurriculumState::new(default_tiers());
        for i in 0..150 {
            s.record(i % 2 == 0);
        }
        assert!((s.moving_average() - 0.5).abs() < 0.01);
    }
}
