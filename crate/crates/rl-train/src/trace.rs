//! Episode traces shared by the trainers and the evaluation bench.

use gridworld::StepLog;
use serde::{Deserialize, Serialize};

/// Per-step record of one episode under some agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode_seed: u64,
    pub steps: Vec<TraceStep>,
    /// True termination (all instructions done) vs time-limit truncation.
    pub terminal: bool,
    pub instructions_completed: usize,
    pub instruction_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: u32,
    pub action: u8,
    pub reward: f64,
    pub done: bool,
    pub completed: usize,
    /// Oracle termination label for the state this action was chosen in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term_label: Option<bool>,
    /// Meta diagnostics when the agent has an update gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_gate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointer_top: Option<usize>,
}

impl EpisodeTrace {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn success(&self) -> bool {
        self.terminal && self.instructions_completed == self.instruction_count
    }

    pub fn step_logs(&self) -> Vec<StepLog> {
        self.steps
            .iter()
            .map(|s| StepLog {
                step: s.step,
                action: s.action,
                reward: s.reward,
                done: s.done,
                completed: s.completed,
            })
            .collect()
    }

    /// Stable content digest used to compare trace multisets across worker
    /// layouts.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x100_0000_01b3);
        };
        mix(self.episode_seed);
        mix(self.steps.len() as u64);
        for s in &self.steps {
            mix(s.action as u64);
            mix(s.reward.to_bits());
            mix(s.completed as u64);
        }
        mix(self.terminal as u64);
        h
    }
}
