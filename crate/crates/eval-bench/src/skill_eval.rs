//! Held-out-seed evaluation of a parameterized skill on single subtasks.

use gridworld::{derive_seed, Action, GridState, Tables, WorldConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rl_train::goal_instruction;
use serde::{Deserialize, Serialize};
use skill_net::{SkillNet, SkillState};
use task_space::TaskParams;
use tensor_core::Graph;

use crate::EvalError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkillEvalReport {
    pub episodes: usize,
    pub success_rate: f64,
    pub term_accuracy: f64,
    pub mean_reward: f64,
    pub mean_steps: f64,
}

/// Run `episodes` single-subtask episodes over the given tasks (cycled via
/// the per-episode RNG) and measure success, termination-prediction
/// accuracy against the env oracle, reward, and length.
pub fn evaluate_skill(
    net: &SkillNet,
    tasks: &[TaskParams],
    space: &task_space::TaskSpace,
    tables: &Tables,
    world: &WorldConfig,
    episodes: usize,
    seed: u64,
) -> Result<SkillEvalReport, EvalError> {
    if episodes == 0 || tasks.is_empty() {
        return Err(EvalError::BadSetup(
            "need at least one episode and one task".to_string(),
        ));
    }
    let mut successes = 0usize;
    let mut term_correct = 0usize;
    let mut term_total = 0usize;
    let mut rewards = Vec::with_capacity(episodes);
    let mut lengths = Vec::with_capacity(episodes);

    for e in 0..episodes {
        let ep_seed = derive_seed(seed, "skill-eval", e as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(ep_seed);
        let tp = tasks[rng.gen_range(0..tasks.len())];
        let goal = space.goal(tp)?;
        let config = world.clone().with_seed(ep_seed);
        let (mut state, mut obs) = GridState::reset(&config, &[goal_instruction(goal)], tables)?;
        let mut skill_state = SkillState::zeros(&net.config);
        let mut reward_sum = 0.0;
        let mut steps = 0usize;
        loop {
            let label = state.subtask_status(goal);
            let mut g = Graph::inference();
            let obs_t = net.obs_tensor(&obs).map_err(rl_train::TrainError::from)?;
            let out = net
                .forward(&mut g, &obs_t, tp, &skill_state)
                .map_err(rl_train::TrainError::from)?;
            skill_state = out.state;
            term_total += 1;
            if (out.term_prob.item().map_err(tensor_error)? >= 0.5) == label {
                term_correct += 1;
            }
            let dist = out.action_dist.to_vec();
            let mut draw = rng.gen::<f64>() * dist.iter().sum::<f64>();
            let mut action_idx = dist.len() - 1;
            for (i, p) in dist.iter().enumerate() {
                if draw < *p {
                    action_idx = i;
                    break;
                }
                draw -= p;
            }
            let action = Action::from_code(action_idx as u8).expect("13-way head");
            let (r, done, _) = state.step(action).map_err(rl_train::TrainError::from)?;
            reward_sum += r;
            steps += 1;
            obs = state.observe();
            if done {
                break;
            }
        }
        // Final-state prediction, matching the training labels.
        let label = state.subtask_status(goal);
        let mut g = Graph::inference();
        let obs_t = net.obs_tensor(&obs).map_err(rl_train::TrainError::from)?;
        let out = net
            .forward(&mut g, &obs_t, tp, &skill_state)
            .map_err(rl_train::TrainError::from)?;
        term_total += 1;
        if (out.term_prob.item().map_err(tensor_error)? >= 0.5) == label {
            term_correct += 1;
        }

        if state.completed() == 1 {
            successes += 1;
        }
        rewards.push(reward_sum);
        lengths.push(steps as f64);
    }
    let n = episodes as f64;
    Ok(SkillEvalReport {
        episodes,
        success_rate: successes as f64 / n,
        term_accuracy: term_correct as f64 / term_total.max(1) as f64,
        mean_reward: rewards.iter().sum::<f64>() / n,
        mean_steps: lengths.iter().sum::<f64>() / n,
    })
}

fn tensor_error(e: tensor_core::TensorError) -> EvalError {
    EvalError::Train(rl_train::TrainError::Tensor(e))
}
