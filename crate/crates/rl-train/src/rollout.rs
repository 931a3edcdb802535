//! Generic parallel episode rollouts with per-episode seeding.

use std::sync::Mutex;

use gridworld::{derive_seed, Action, GridState, Instruction, Tables, WorldConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::trace::{EpisodeTrace, TraceStep};
use crate::TrainError;

/// A policy that can drive episodes from the raw state. Scripted policies
/// read the state directly; learned agents call their networks.
pub trait Agent {
    fn reset(&mut self, state: &GridState);
    fn act(&mut self, state: &GridState, rng: &mut ChaCha8Rng) -> Action;
}

/// Per-worker agent construction so each thread owns its own instance.
pub trait AgentFactory: Sync {
    fn build(&self) -> Box<dyn Agent>;
}

impl<F> AgentFactory for F
where
    F: Fn() -> Box<dyn Agent> + Sync,
{
    fn build(&self) -> Box<dyn Agent> {
        self()
    }
}

/// Supplies the world and instruction list for each episode index.
pub trait EpisodePlanner: Sync {
    fn plan(&self, episode_index: u64, seed: u64) -> Result<(WorldConfig, Vec<Instruction>), TrainError>;
}

/// Fixed config and instruction list for every episode (the seed still
/// varies per episode).
pub struct FixedPlan {
    pub config: WorldConfig,
    pub instructions: Vec<Instruction>,
}

impl EpisodePlanner for FixedPlan {
    fn plan(&self, _episode_index: u64, seed: u64) -> Result<(WorldConfig, Vec<Instruction>), TrainError> {
        Ok((self.config.clone().with_seed(seed), self.instructions.clone()))
    }
}

/// Run one full episode and collect its trace.
pub fn run_episode(
    agent: &mut dyn Agent,
    config: &WorldConfig,
    instructions: &[Instruction],
    tables: &Tables,
    episode_seed: u64,
) -> Result<EpisodeTrace, TrainError> {
    let (mut state, _) = GridState::reset(config, instructions, tables)?;
    agent.reset(&state);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(episode_seed, "agent", 0));
    let mut steps = Vec::new();
    while !state.is_done() {
        let step_idx = state.step_count();
        let action = agent.act(&state, &mut rng);
        let (reward, done, _) = state.step(action)?;
        steps.push(TraceStep {
            step: step_idx,
            action: action.code(),
            reward,
            done,
            completed: state.completed(),
            term_label: None,
            update_gate: None,
            pointer_top: None,
        });
    }
    Ok(EpisodeTrace {
        episode_seed,
        terminal: state.completed() == instructions.len(),
        instructions_completed: state.completed(),
        instruction_count: instructions.len(),
        steps,
    })
}

/// Roll out `n_episodes` episodes across `workers` threads. Episode seeds
/// derive from (seed, episode index), so the resulting trace multiset is
/// independent of the worker count.
pub fn rollout_batch(
    planner: &dyn EpisodePlanner,
    factory: &dyn AgentFactory,
    tables: &Tables,
    n_episodes: usize,
    workers: usize,
    seed: u64,
) -> Result<Vec<EpisodeTrace>, TrainError> {
    if n_episodes == 0 {
        return Err(TrainError::BadHyper("n_episodes must be >= 1".to_string()));
    }
    let workers = workers.max(1);
    let results: Mutex<Vec<(u64, EpisodeTrace)>> = Mutex::new(Vec::with_capacity(n_episodes));

    std::thread::scope(|scope| -> Result<(), TrainError> {
        let mut handles = Vec::new();
        for w in 0..workers {
            let results = &results;
            handles.push(scope.spawn(move || -> Result<(), TrainError> {
                let mut agent = factory.build();
                let mut idx = w as u64;
                while (idx as usize) < n_episodes {
                    let episode_seed = derive_seed(seed, "episode", idx);
                    let (config, instructions) = planner.plan(idx, episode_seed)?;
                    let trace = run_episode(&mut *agent, &config, &instructions, tables, episode_seed)?;
                    results.lock().expect("rollout mutex").push((idx, trace));
                    idx += workers as u64;
                }
                Ok(())
            }));
        }
        for handle in handles {
            match handle.join() {
                Ok(result) => result?,
                Err(_) => {
                    return Err(TrainError::WorkerFailure(
                        "rollout worker panicked".to_string(),
                    ))
                }
            }
        }
        Ok(())
    })?;

    let mut results = results.into_inner().expect("rollout mutex");
    results.sort_by_key(|(idx, _)| *idx);
    Ok(results.into_iter().map(|(_, t)| t).collect())
}
