//! Evaluation harness over a fixed seed grid, paired across agents.

use std::io::Write;

use gridworld::{derive_seed, Instruction, Tables, WorldConfig};
use rl_train::{run_episode, AgentFactory};
use serde::{Deserialize, Serialize};
use task_space::{sample_instructions, TaskSplit};

use crate::EvalError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalCell {
    pub agent: String,
    pub instruction_count: usize,
    pub unseen: bool,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub mean_steps: f64,
    pub mean_completed: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub rows: Vec<EvalCell>,
}

/// Evaluate every agent on the same episode grid: for each instruction
/// count and seen/unseen condition, `episodes_per_cell` worlds whose seeds
/// depend only on (seed, condition, index), so all agents face identical
/// world sequences.
pub fn evaluate(
    agents: &[(String, &dyn AgentFactory)],
    split: &TaskSplit,
    tables: &Tables,
    world: &WorldConfig,
    instruction_counts: &[usize],
    episodes_per_cell: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if episodes_per_cell == 0 || instruction_counts.iter().any(|c| *c == 0) {
        return Err(EvalError::BadSetup(
            "instruction counts and episode counts must be >= 1".to_string(),
        ));
    }
    let mut rows = Vec::new();
    for (name, factory) in agents {
        for &count in instruction_counts {
            for unseen in [false, true] {
                let mut rewards = Vec::with_capacity(episodes_per_cell);
                let mut successes = 0usize;
                let mut steps = Vec::with_capacity(episodes_per_cell);
                let mut completed = Vec::with_capacity(episodes_per_cell);
                for e in 0..episodes_per_cell {
                    let cell_tag = (count as u64) << 1 | unseen as u64;
                    let ep_seed = derive_seed(seed, "eval", cell_tag << 32 | e as u64);
                    let sentences = sample_instructions(
                        count,
                        split,
                        unseen,
                        derive_seed(ep_seed, "instructions", 0),
                    )?;
                    let instructions: Vec<Instruction> =
                        sentences.iter().map(|s| s.instruction()).collect();
                    let config = world.clone().with_seed(ep_seed);
                    let mut agent = factory.build();
                    let trace = run_episode(&mut *agent, &config, &instructions, tables, ep_seed)?;
                    rewards.push(trace.total_reward());
                    if trace.success() {
                        successes += 1;
                    }
                    steps.push(trace.len() as f64);
                    completed.push(trace.instructions_completed as f64);
                }
                let n = episodes_per_cell as f64;
                rows.push(EvalCell {
                    agent: name.clone(),
                    instruction_count: count,
                    unseen,
                    mean_reward: rewards.iter().sum::<f64>() / n,
                    success_rate: successes as f64 / n,
                    mean_steps: steps.iter().sum::<f64>() / n,
                    mean_completed: completed.iter().sum::<f64>() / n,
                    episodes: episodes_per_cell,
                });
            }
        }
    }
    Ok(EvalReport { seed, rows })
}

impl EvalReport {
    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>6} {:>7} {:>12} {:>9} {:>10} {:>11} {:>9}\n",
            "agent", "#instr", "unseen", "mean_reward", "success", "mean_steps", "completed", "episodes"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<24} {:>6} {:>7} {:>12.3} {:>8.1}% {:>10.1} {:>11.2} {:>9}\n",
                r.agent,
                r.instruction_count,
                r.unseen,
                r.mean_reward,
                100.0 * r.success_rate,
                r.mean_steps,
                r.mean_completed,
                r.episodes
            ));
        }
        out
    }

    pub fn write_jsonl(&self, out: &mut impl Write) -> Result<(), EvalError> {
        for r in &self.rows {
            writeln!(out, "{}", serde_json::to_string(r)?)?;
        }
        Ok(())
    }

    /// Per-count curve export (CSV) for external plotting.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("agent,instruction_count,unseen,mean_reward,success_rate,mean_steps,mean_completed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.agent,
                r.instruction_count,
                r.unseen,
                r.mean_reward,
                r.success_rate,
                r.mean_steps,
                r.mean_completed
            ));
        }
        out
    }

    pub fn cell(&self, agent: &str, count: usize, unseen: bool) -> Option<&EvalCell> {
        self.rows
            .iter()
            .find(|r| r.agent == agent && r.instruction_count == count && r.unseen == unseen)
    }
}
