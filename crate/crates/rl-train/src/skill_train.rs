//! Training loops for the parameterized skill: policy distillation against
//! scripted teachers, then actor-critic fine-tuning with GAE.

use std::collections::HashMap;
use std::sync::Mutex;

use gridworld::{derive_seed, Action, GridState, Goal, Instruction, InstructionKind, Tables, TaskAction, WorldConfig, ACTION_COUNT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skill_net::{
    analogy_loss, binary_cross_entropy, distillation_loss, skill_ac_loss, AcStep, AcWeights,
    SkillNet, SkillState,
};
use tensor_core::{Gradients, Graph, ParamSnapshot, RmsProp};
use task_space::{enumerate_analogies, TaskParams, TaskSplit};

use crate::gae::{compute_gae, gae_returns};
use crate::metrics::IterationMetrics;
use crate::TrainError;

/// A per-task expert the skill distills from. Implementations must be
/// shareable across rollout workers.
pub trait TeacherPolicy: Send + Sync {
    fn action_dist(&self, state: &GridState, goal: Goal) -> Result<[f64; ACTION_COUNT], TrainError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkillStage {
    Distill,
    ActorCritic,
}

impl SkillStage {
    pub fn name(self) -> &'static str {
        match self {
            SkillStage::Distill => "distill",
            SkillStage::ActorCritic => "actor_critic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkillHyper {
    pub lr: f64,
    pub smoothing: f64,
    pub eps: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub value_weight: f64,
    pub entropy_start: f64,
    /// Iteration at which the linear entropy schedule reaches zero.
    pub entropy_midpoint: usize,
    pub xi: f64,
    pub rho_dis: f64,
    pub rho_diff: f64,
    pub tau_dis: f64,
    pub tau_diff: f64,
    pub analogy_budget: usize,
}

impl Default for SkillHyper {
    fn default() -> Self {
        SkillHyper {
            lr: 2.5e-4,
            smoothing: 0.97,
            eps: 1e-6,
            gamma: 0.99,
            lambda: 0.96,
            alpha: 0.1,
            value_weight: 0.5,
            entropy_start: 0.1,
            entropy_midpoint: 7500,
            xi: 1.0,
            rho_dis: 1.0,
            rho_diff: 1.0,
            tau_dis: 3.0,
            tau_diff: 3.0,
            analogy_budget: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkillTrainConfig {
    pub stage: SkillStage,
    pub iterations: usize,
    pub episodes_per_iter: usize,
    pub workers: usize,
    pub world: WorldConfig,
    pub hyper: SkillHyper,
    pub seed: u64,
    /// Resume point; per-iteration seeds depend only on (seed, stage, index).
    pub start_iteration: usize,
}

pub fn goal_instruction(goal: Goal) -> Instruction {
    let kind = match goal.action {
        TaskAction::Visit => InstructionKind::Visit,
        TaskAction::PickUp => InstructionKind::PickUp,
        TaskAction::Transform => InstructionKind::Transform,
        TaskAction::InteractWith => InstructionKind::InteractWith,
    };
    Instruction {
        kind,
        object: goal.object,
    }
}

pub(crate) fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = probs.iter().sum();
    let draw: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub(crate) struct EpisodeGrads {
    pub grads: Vec<(String, Vec<f64>)>,
    pub reward: f64,
    pub success: bool,
    pub term_correct: usize,
    pub term_total: usize,
    pub aux: f64,
    pub gate_mean: f64,
}

/// Stats of one skill episode plus its gradient contribution.
#[allow(clippy::too_many_arguments)]
fn skill_episode(
    net: &SkillNet,
    split: &TaskSplit,
    tables: &Tables,
    teacher: Option<&dyn TeacherPolicy>,
    stage: SkillStage,
    hyper: &SkillHyper,
    entropy_weight: f64,
    world: &WorldConfig,
    tp: TaskParams,
    episode_seed: u64,
) -> Result<EpisodeGrads, TrainError> {
    let goal = split.space.goal(tp)?;
    let instruction = goal_instruction(goal);
    let config = world.clone().with_seed(episode_seed);
    let (mut state, mut obs) = GridState::reset(&config, &[instruction], tables)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(episode_seed, "skill-actions", 0));

    let mut g = Graph::new();
    let mut skill_state = SkillState::zeros(&net.config);
    let mut steps: Vec<AcStep> = Vec::new();
    let mut teacher_dists: Vec<[f64; ACTION_COUNT]> = Vec::new();
    let mut rewards: Vec<f64> = Vec::new();
    let mut term_correct = 0usize;
    let mut term_total = 0usize;

    loop {
        let label = state.subtask_status(goal);
        let obs_t = net.obs_tensor(&obs)?;
        let out = net.forward(&mut g, &obs_t, tp, &skill_state)?;
        skill_state = out.state;

        let term_pred = out.term_prob.item()? >= 0.5;
        term_total += 1;
        if term_pred == label {
            term_correct += 1;
        }

        if let Some(t) = teacher {
            teacher_dists.push(t.action_dist(&state, goal)?);
        }
        let action_idx = sample_categorical(&out.action_dist.to_vec(), &mut rng);
        let action = Action::from_code(action_idx as u8)?;
        let (reward, done, _) = state.step(action)?;
        obs = state.observe();
        rewards.push(reward);
        steps.push(AcStep {
            action_dist: out.action_dist,
            term_prob: out.term_prob,
            value: out.value,
            action: action_idx,
            term_label: if label { 1.0 } else { 0.0 },
        });
        if done {
            break;
        }
    }

    // Terminal/truncation forward: termination supervision for the final
    // state and the bootstrap value for truncated episodes.
    let final_label = state.subtask_status(goal);
    let obs_t = net.obs_tensor(&obs)?;
    let final_out = net.forward(&mut g, &obs_t, tp, &skill_state)?;
    term_total += 1;
    if (final_out.term_prob.item()? >= 0.5) == final_label {
        term_correct += 1;
    }

    let success = state.completed() == 1;
    let terminal = success;
    let bootstrap = if terminal { 0.0 } else { final_out.value.item()? };

    let aux;
    let loss = match stage {
        SkillStage::Distill => {
            let mut loss = tensor_core::Tensor::scalar(0.0).expect("zero");
            let mut kl_sum = 0.0;
            for (i, step) in steps.iter().enumerate() {
                let term = distillation_loss(
                    &mut g,
                    &teacher_dists[i],
                    &step.action_dist,
                    step.term_label,
                    &step.term_prob,
                    hyper.alpha,
                )?;
                loss = g.add(&loss, &term)?;
                let student = step.action_dist.to_vec();
                kl_sum += teacher_dists[i]
                    .iter()
                    .zip(&student)
                    .filter(|(t, _)| **t > 0.0)
                    .map(|(t, s)| t * (t / s.max(1e-12)).ln())
                    .sum::<f64>();
            }
            // Mean per-step KL, without the termination term.
            aux = kl_sum / steps.len().max(1) as f64;
            loss
        }
        SkillStage::ActorCritic => {
            let values: Vec<f64> = steps
                .iter()
                .map(|s| s.value.item())
                .collect::<Result<_, _>>()?;
            let advantages = compute_gae(&rewards, &values, bootstrap, hyper.gamma, hyper.lambda)?;
            let returns = gae_returns(&advantages, &values);
            let w = AcWeights {
                alpha: hyper.alpha,
                value_weight: hyper.value_weight,
                entropy_weight,
                xi: 0.0,
                rho_dis: hyper.rho_dis,
                rho_diff: hyper.rho_diff,
            };
            let loss = skill_ac_loss(&mut g, &steps, &advantages, &returns, None, &w)?;
            aux = loss.item()?;
            loss
        }
    };
    // The final-state termination prediction is supervised in both stages.
    let final_target = if final_label { 1.0 } else { 0.0 };
    let final_bce = binary_cross_entropy(&mut g, &final_out.term_prob, final_target)?;
    let final_bce = g.scale(&final_bce, hyper.alpha)?;
    let loss = g.add(&loss, &final_bce)?;

    let grads = g.backward(&loss)?;
    let named: Vec<(String, Vec<f64>)> = net
        .params()
        .iter()
        .map(|(name, t)| {
            let grad = grads.get(t).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; t.numel()]);
            (name.to_string(), grad)
        })
        .collect();

    Ok(EpisodeGrads {
        grads: named,
        reward: rewards.iter().sum(),
        success,
        term_correct,
        term_total,
        aux,
        gate_mean: 0.0,
    })
}

pub(crate) fn reduce_grads(
    episodes: Vec<(u64, EpisodeGrads)>,
    scale: f64,
) -> (HashMap<String, Vec<f64>>, Vec<EpisodeGrads>) {
    let mut sorted = episodes;
    sorted.sort_by_key(|(idx, _)| *idx);
    let mut total: HashMap<String, Vec<f64>> = HashMap::new();
    let mut stats = Vec::with_capacity(sorted.len());
    for (_, ep) in sorted {
        for (name, grad) in &ep.grads {
            let slot = total.entry(name.clone()).or_insert_with(|| vec![0.0; grad.len()]);
            for (s, v) in slot.iter_mut().zip(grad) {
                *s += v;
            }
        }
        stats.push(EpisodeGrads { grads: Vec::new(), ..ep });
    }
    for grad in total.values_mut() {
        grad.iter_mut().for_each(|v| *v *= scale);
    }
    (total, stats)
}

/// Linear decay from `start` at iteration 0 to zero at `midpoint`, zero after.
pub fn entropy_weight_at(start: f64, midpoint: usize, iteration: usize) -> f64 {
    if midpoint == 0 {
        return 0.0;
    }
    start * (1.0 - iteration as f64 / midpoint as f64).max(0.0)
}

/// Run the configured stage, updating `net` and `opt` in place. On a
/// non-finite loss the parameters keep their last finite values and the
/// error reports the failing iteration.
pub fn train_skill(
    net: &SkillNet,
    split: &TaskSplit,
    tables: &Tables,
    teacher: Option<&dyn TeacherPolicy>,
    opt: &mut RmsProp,
    cfg: &SkillTrainConfig,
) -> Result<Vec<IterationMetrics>, TrainError> {
    if cfg.stage == SkillStage::Distill && teacher.is_none() {
        return Err(TrainError::MissingTeacher);
    }
    if cfg.episodes_per_iter == 0 {
        return Err(TrainError::BadHyper("episodes_per_iter must be >= 1".to_string()));
    }
    if split.train.is_empty() {
        return Err(TrainError::BadHyper("split has no train tasks".to_string()));
    }

    let mut metrics = Vec::with_capacity(cfg.iterations);
    for iteration in cfg.start_iteration..cfg.start_iteration + cfg.iterations {
        let iter_seed = derive_seed(cfg.seed, cfg.stage.name(), iteration as u64);
        let entropy_weight = match cfg.stage {
            SkillStage::Distill => 0.0,
            SkillStage::ActorCritic => {
                entropy_weight_at(cfg.hyper.entropy_start, cfg.hyper.entropy_midpoint, iteration)
            }
        };

        let snapshot = net.params().snapshot();
        let episodes = run_skill_batch(
            net,
            &snapshot,
            split,
            tables,
            teacher,
            cfg,
            entropy_weight,
            iter_seed,
        )
        .map_err(|e| e.into_divergence(iteration))?;
        let scale = 1.0 / cfg.episodes_per_iter as f64;
        let (mut total, stats) = reduce_grads(episodes, scale);

        // Analogy regularizer applied once per update on the live net.
        if cfg.hyper.xi > 0.0 {
            let batch = enumerate_analogies(split, cfg.hyper.analogy_budget, derive_seed(iter_seed, "analogy", 0))?;
            let mut g = Graph::new();
            let mut embed = |g: &mut Graph, tp: TaskParams| net.task_embed(g, tp);
            let terms = analogy_loss(&mut g, &mut embed, &batch, cfg.hyper.tau_dis, cfg.hyper.tau_diff)?;
            let dis = g.scale(&terms.dis, cfg.hyper.rho_dis)?;
            let diff = g.scale(&terms.diff, cfg.hyper.rho_diff)?;
            let am = g.add(&terms.sim, &dis)?;
            let am = g.add(&am, &diff)?;
            let am = g.scale(&am, cfg.hyper.xi)?;
            let grads = g.backward(&am)?;
            for (name, t) in net.params().iter() {
                if let Some(grad) = grads.get(t) {
                    let slot = total.entry(name.to_string()).or_insert_with(|| vec![0.0; t.numel()]);
                    for (s, v) in slot.iter_mut().zip(grad) {
                        *s += v;
                    }
                }
            }
        }

        let entries: Vec<(u64, Vec<f64>)> = net
            .params()
            .iter()
            .filter_map(|(name, t)| total.remove(name).map(|grad| (t.id(), grad)))
            .collect();
        let grads = Gradients::from_entries(entries);
        opt.step(net.params().tensors(), &grads).map_err(|e| TrainError::Divergence {
            iteration,
            detail: e.to_string(),
        })?;

        let n = stats.len() as f64;
        metrics.push(IterationMetrics {
            iteration,
            mean_reward: stats.iter().map(|s| s.reward).sum::<f64>() / n,
            success_rate: stats.iter().filter(|s| s.success).count() as f64 / n,
            term_accuracy: {
                let correct: usize = stats.iter().map(|s| s.term_correct).sum();
                let totaln: usize = stats.iter().map(|s| s.term_total).sum();
                correct as f64 / totaln.max(1) as f64
            },
            mean_update_rate: None,
            curriculum_tier: None,
            aux: stats.iter().map(|s| s.aux).sum::<f64>() / n,
        });
    }
    Ok(metrics)
}

#[allow(clippy::too_many_arguments)]
fn run_skill_batch(
    net: &SkillNet,
    snapshot: &ParamSnapshot,
    split: &TaskSplit,
    tables: &Tables,
    teacher: Option<&dyn TeacherPolicy>,
    cfg: &SkillTrainConfig,
    entropy_weight: f64,
    iter_seed: u64,
) -> Result<Vec<(u64, EpisodeGrads)>, TrainError> {
    let workers = cfg.workers.max(1);
    let results: Mutex<Vec<(u64, EpisodeGrads)>> = Mutex::new(Vec::with_capacity(cfg.episodes_per_iter));
    let net_config = net.config.clone();

    std::thread::scope(|scope| -> Result<(), TrainError> {
        let mut handles = Vec::new();
        for w in 0..workers {
            let results = &results;
            let net_config = net_config.clone();
            handles.push(scope.spawn(move || -> Result<(), TrainError> {
                let local = SkillNet::new(net_config, &split.space, 0);
                local.params().load_snapshot(snapshot)?;
                let mut idx = w as u64;
                while (idx as usize) < cfg.episodes_per_iter {
                    let episode_seed = derive_seed(iter_seed, "episode", idx);
                    let mut task_rng = ChaCha8Rng::seed_from_u64(derive_seed(iter_seed, "task", idx));
                    let tp = split.train[task_rng.gen_range(0..split.train.len())];
                    let ep = skill_episode(
                        &local,
                        split,
                        tables,
                        teacher,
                        cfg.stage,
                        &cfg.hyper,
                        entropy_weight,
                        &cfg.world,
                        tp,
                        episode_seed,
                    )?;
                    results.lock().expect("batch mutex").push((idx, ep));
                    idx += workers as u64;
                }
                Ok(())
            }));
        }
        for handle in handles {
            match handle.join() {
                Ok(result) => result?,
                Err(_) => return Err(TrainError::WorkerFailure("skill worker panicked".to_string())),
            }
        }
        Ok(())
    })?;

    Ok(results.into_inner().expect("batch mutex"))
}
