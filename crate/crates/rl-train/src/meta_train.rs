//! Meta-controller training: soft update with optional curriculum, soft
//! fine-tuning, then hard-update fine-tuning initialized from the soft
//! weights. The parameterized skill stays frozen throughout.

use std::sync::Mutex;

use gridworld::{derive_seed, Action, GridState, Tables, WorldConfig};
use meta_controller::{
    build_memory, meta_loss, meta_step, MetaLossWeights, MetaNet, MetaRecurrent, MetaTraceStep,
    StepMode, StepOverrides,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skill_net::{analogy_loss, SkillNet, SkillState};
use tensor_core::{Gradients, Graph, ParamSnapshot, RmsProp};
use task_space::{enumerate_analogies, sample_instructions, TaskParams, TaskSplit, Vocabulary};

use crate::curriculum::{curriculum_adjust, CurriculumState};
use crate::gae::{compute_gae, gae_returns};
use crate::metrics::IterationMetrics;
use crate::skill_train::{reduce_grads, sample_categorical, EpisodeGrads};
use crate::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaStage {
    Soft,
    SoftFinetune,
    HardFinetune,
}

impl MetaStage {
    pub fn name(self) -> &'static str {
        match self {
            MetaStage::Soft => "soft",
            MetaStage::SoftFinetune => "soft_finetune",
            MetaStage::HardFinetune => "hard_finetune",
        }
    }

    pub fn mode(self) -> StepMode {
        match self {
            MetaStage::Soft | MetaStage::SoftFinetune => StepMode::Soft,
            MetaStage::HardFinetune => StepMode::Hard,
        }
    }

    pub fn uses_curriculum(self) -> bool {
        matches!(self, MetaStage::Soft)
    }
}

/// Gate wiring: the learned update gate, or the two ablation baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMode {
    Learned,
    /// Hierarchical-short: update the subtask every step.
    AlwaysUpdate,
    /// Hierarchical-long: update exactly when the skill signals termination.
    OnTermination,
}

#[derive(Debug, Clone)]
pub struct MetaHyper {
    pub lr: f64,
    pub smoothing: f64,
    pub eps: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub eta: f64,
    pub value_weight: f64,
    pub entropy_weight: f64,
    pub xi: f64,
    pub rho_dis: f64,
    pub rho_diff: f64,
    pub tau_dis: f64,
    pub tau_diff: f64,
    pub analogy_budget: usize,
}

impl Default for MetaHyper {
    fn default() -> Self {
        MetaHyper {
            lr: 2.5e-4,
            smoothing: 0.97,
            eps: 1e-6,
            gamma: 0.99,
            lambda: 0.96,
            eta: 0.001,
            value_weight: 0.5,
            entropy_weight: 0.0,
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
pub struct MetaTrainConfig {
    pub stage: MetaStage,
    pub iterations: usize,
    pub episodes_per_iter: usize,
    pub workers: usize,
    pub world: WorldConfig,
    pub instruction_count: usize,
    pub hyper: MetaHyper,
    pub seed: u64,
    pub start_iteration: usize,
    pub gate_mode: GateMode,
    pub curriculum: bool,
}

/// One meta episode: the frozen skill executes the chosen subtasks while
/// the meta trace collects the tensors Eq-style losses need.
#[allow(clippy::too_many_arguments)]
fn meta_episode(
    meta: &MetaNet,
    skill: &SkillNet,
    split: &TaskSplit,
    vocab: &Vocabulary,
    tables: &Tables,
    cfg: &MetaTrainConfig,
    world: &WorldConfig,
    instruction_count: usize,
    episode_seed: u64,
) -> Result<(EpisodeGrads, usize), TrainError> {
    let sentences = sample_instructions(
        instruction_count,
        split,
        false,
        derive_seed(episode_seed, "instructions", 0),
    )?;
    let instructions: Vec<_> = sentences.iter().map(|s| s.instruction()).collect();
    let config = world.clone().with_seed(episode_seed);
    let (mut state, mut obs) = GridState::reset(&config, &instructions, tables)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(episode_seed, "meta-actions", 0));

    let mut g = Graph::new();
    let memory = build_memory(&mut g, &sentences, vocab, tables, meta.word_embedding(), meta.config.max_instructions)?;
    let mut mstate = MetaRecurrent::initial(&mut g, meta, &memory)?;
    let mode = cfg.stage.mode();

    // (running subtask, skill recurrent state entering the current obs)
    let mut skill_ctx: Option<(TaskParams, SkillState)> = None;
    let mut trace: Vec<MetaTraceStep> = Vec::new();
    let mut rewards: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut gate_sum = 0.0;
    let mut term_correct = 0usize;
    let mut term_total = 0usize;

    loop {
        // Termination bit from the frozen skill for the running subtask.
        let mut sg = Graph::inference();
        let pre = match &skill_ctx {
            Some((tp, sstate)) => {
                let obs_s = skill.obs_tensor(&obs)?;
                let out = skill.forward(&mut sg, &obs_s, *tp, sstate)?;
                Some((*tp, out))
            }
            None => None,
        };
        let b = match &pre {
            Some((tp, out)) => {
                let p = out.term_prob.item()?;
                let sampled = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
                let oracle = state.subtask_status(split.space.goal(*tp)?);
                term_total += 1;
                if (p >= 0.5) == oracle {
                    term_correct += 1;
                }
                sampled
            }
            // Before any subtask exists, only the termination-gated
            // baseline treats the state as "terminated" to force a pick.
            None => match cfg.gate_mode {
                GateMode::OnTermination => 1.0,
                _ => 0.0,
            },
        };

        let ov = match cfg.gate_mode {
            GateMode::Learned => StepOverrides::default(),
            GateMode::AlwaysUpdate => StepOverrides { force_c: Some(1.0), ..Default::default() },
            GateMode::OnTermination => StepOverrides { force_c: Some(b), ..Default::default() },
        };
        let obs_m = skill_net::obs_to_canvas(&obs, meta.config.obs_channels, meta.config.canvas)?;
        let g_prev = mstate.g_prev;
        let out = meta_step(meta, &mut g, mode, &obs_m, b, &mstate, &memory, &mut rng, &ov)?;
        gate_sum += out.diag.c;
        values.push(out.value.item()?);
        trace.push(MetaTraceStep::from_result(&out, g_prev));
        let g_t = out.g;
        mstate = out.state;

        // Reuse the pre-forward when the subtask is unchanged; otherwise
        // start the skill fresh on the new subtask.
        let (action_dist, new_state) = match (pre, &skill_ctx) {
            (Some((tp, out)), Some((running, _))) if *running == g_t && tp == g_t => {
                (out.action_dist.to_vec(), out.state)
            }
            _ => {
                state.begin_subtask_segment();
                let mut sg = Graph::inference();
                let obs_s = skill.obs_tensor(&obs)?;
                let out = skill.forward(&mut sg, &obs_s, g_t, &SkillState::zeros(&skill.config))?;
                (out.action_dist.to_vec(), out.state)
            }
        };
        let action_idx = sample_categorical(&action_dist, &mut rng);
        let action = Action::from_code(action_idx as u8)?;
        let (reward, done, _) = state.step(action)?;
        obs = state.observe();
        rewards.push(reward);
        skill_ctx = Some((g_t, new_state));
        if done {
            break;
        }
    }

    let terminal = state.completed() == instructions.len();
    let bootstrap = if terminal {
        0.0
    } else {
        // Value of the truncation state via a copy-branch evaluation that
        // draws nothing from the RNG.
        let obs_m = skill_net::obs_to_canvas(&obs, meta.config.obs_channels, meta.config.canvas)?;
        let ov = StepOverrides {
            force_c: Some(0.0),
            force_g: mstate.g_prev,
            ..Default::default()
        };
        let out = meta_step(meta, &mut g, mode, &obs_m, mstate.b_prev, &mstate, &memory, &mut rng, &ov)?;
        out.value.item()?
    };

    let advantages = compute_gae(&rewards, &values, bootstrap, cfg.hyper.gamma, cfg.hyper.lambda)?;
    let returns = gae_returns(&advantages, &values);
    let w = MetaLossWeights {
        eta: cfg.hyper.eta,
        value_weight: cfg.hyper.value_weight,
        entropy_weight: cfg.hyper.entropy_weight,
        xi: 0.0,
        rho_dis: cfg.hyper.rho_dis,
        rho_diff: cfg.hyper.rho_diff,
    };
    let loss = meta_loss(&mut g, mode, &trace, &advantages, &returns, None, &w)?;
    let aux = loss.item()?;
    let grads = g.backward(&loss)?;
    let named: Vec<(String, Vec<f64>)> = meta
        .params()
        .iter()
        .map(|(name, t)| {
            let grad = grads.get(t).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; t.numel()]);
            (name.to_string(), grad)
        })
        .collect();

    Ok((
        EpisodeGrads {
            grads: named,
            reward: rewards.iter().sum(),
            success: terminal,
            term_correct,
            term_total,
            aux,
            gate_mean: gate_sum / trace.len().max(1) as f64,
        },
        state.completed(),
    ))
}

/// Train the meta controller against a frozen skill, updating `meta` and
/// `opt` in place.
pub fn train_meta(
    meta: &MetaNet,
    skill: &SkillNet,
    split: &TaskSplit,
    vocab: &Vocabulary,
    tables: &Tables,
    opt: &mut RmsProp,
    cfg: &MetaTrainConfig,
) -> Result<Vec<IterationMetrics>, TrainError> {
    if cfg.episodes_per_iter == 0 {
        return Err(TrainError::BadHyper("episodes_per_iter must be >= 1".to_string()));
    }
    let mut curriculum = cfg
        .curriculum
        .then(|| CurriculumState::new(crate::curriculum::default_tiers()));

    let mut metrics = Vec::with_capacity(cfg.iterations);
    for iteration in cfg.start_iteration..cfg.start_iteration + cfg.iterations {
        let iter_seed = derive_seed(cfg.seed, cfg.stage.name(), iteration as u64);
        let (world, instruction_count) = match &curriculum {
            Some(c) => {
                let tier = c.current();
                let mut w = cfg.world.clone();
                w.height = tier.world_size;
                w.width = tier.world_size;
                w.wall_density = tier.wall_density_max;
                w.object_density = tier.object_density_min
                    + 0.5 * (tier.object_density_max - tier.object_density_min);
                (w, tier.instructions)
            }
            None => (cfg.world.clone(), cfg.instruction_count),
        };

        let meta_snapshot = meta.params().snapshot();
        let skill_snapshot = skill.params().snapshot();
        let episodes = run_meta_batch(
            meta,
            skill,
            &meta_snapshot,
            &skill_snapshot,
            split,
            vocab,
            tables,
            cfg,
            &world,
            instruction_count,
            iter_seed,
        )
        .map_err(|e| e.into_divergence(iteration))?;

        let scale = 1.0 / cfg.episodes_per_iter as f64;
        let (mut total, stats) = reduce_grads(episodes, scale);

        if cfg.hyper.xi > 0.0 {
            let batch = enumerate_analogies(split, cfg.hyper.analogy_budget, derive_seed(iter_seed, "analogy", 0))?;
            let mut g = Graph::new();
            let mut embed = |g: &mut Graph, tp: TaskParams| {
                meta.task_embed(g, Some(tp)).map_err(|e| match e {
                    meta_controller::MetaError::Tensor(t) => skill_net::SkillError::Tensor(t),
                    _ => skill_net::SkillError::BadTask {
                        action: tp.action,
                        object: tp.object,
                    },
                })
            };
            let terms = analogy_loss(&mut g, &mut embed, &batch, cfg.hyper.tau_dis, cfg.hyper.tau_diff)?;
            let dis = g.scale(&terms.dis, cfg.hyper.rho_dis)?;
            let diff = g.scale(&terms.diff, cfg.hyper.rho_diff)?;
            let am = g.add(&terms.sim, &dis)?;
            let am = g.add(&am, &diff)?;
            let am = g.scale(&am, cfg.hyper.xi)?;
            let grads = g.backward(&am)?;
            for (name, t) in meta.params().iter() {
                if let Some(grad) = grads.get(t) {
                    let slot = total.entry(name.to_string()).or_insert_with(|| vec![0.0; t.numel()]);
                    for (s, v) in slot.iter_mut().zip(grad) {
                        *s += v;
                    }
                }
            }
        }

        let entries: Vec<(u64, Vec<f64>)> = meta
            .params()
            .iter()
            .filter_map(|(name, t)| total.remove(name).map(|grad| (t.id(), grad)))
            .collect();
        let grads = Gradients::from_entries(entries);
        opt.step(meta.params().tensors(), &grads).map_err(|e| TrainError::Divergence {
            iteration,
            detail: e.to_string(),
        })?;

        let n = stats.len() as f64;
        let success_rate = stats.iter().filter(|s| s.success).count() as f64 / n;
        if let Some(c) = curriculum.as_mut() {
            for s in &stats {
                c.record(s.success);
            }
            let avg = c.moving_average();
            *c = curriculum_adjust(c.clone(), avg);
        }
        metrics.push(IterationMetrics {
            iteration,
            mean_reward: stats.iter().map(|s| s.reward).sum::<f64>() / n,
            success_rate,
            term_accuracy: {
                let correct: usize = stats.iter().map(|s| s.term_correct).sum();
                let totaln: usize = stats.iter().map(|s| s.term_total).sum();
                if totaln == 0 { 1.0 } else { correct as f64 / totaln as f64 }
            },
            mean_update_rate: Some(stats.iter().map(|s| s.gate_mean).sum::<f64>() / n),
            curriculum_tier: curriculum.as_ref().map(|c| c.tier),
            aux: stats.iter().map(|s| s.aux).sum::<f64>() / n,
        });
    }
    Ok(metrics)
}

#[allow(clippy::too_many_arguments)]
fn run_meta_batch(
    meta: &MetaNet,
    skill: &SkillNet,
    meta_snapshot: &ParamSnapshot,
    skill_snapshot: &ParamSnapshot,
    split: &TaskSplit,
    vocab: &Vocabulary,
    tables: &Tables,
    cfg: &MetaTrainConfig,
    world: &WorldConfig,
    instruction_count: usize,
    iter_seed: u64,
) -> Result<Vec<(u64, EpisodeGrads)>, TrainError> {
    let workers = cfg.workers.max(1);
    let results: Mutex<Vec<(u64, EpisodeGrads)>> = Mutex::new(Vec::with_capacity(cfg.episodes_per_iter));
    let meta_config = meta.config.clone();
    let skill_config = skill.config.clone();
    let head = meta.head;
    let arities = (meta.action_arity, meta.object_arity);

    std::thread::scope(|scope| -> Result<(), TrainError> {
        let mut handles = Vec::new();
        for w in 0..workers {
            let results = &results;
            let meta_config = meta_config.clone();
            let skill_config = skill_config.clone();
            handles.push(scope.spawn(move || -> Result<(), TrainError> {
                let local_meta = MetaNet::new(meta_config, vocab.len(), arities.0, arities.1, head, 0);
                local_meta.params().load_snapshot(meta_snapshot)?;
                let local_skill = SkillNet::new(skill_config, &split.space, 0);
                local_skill.params().load_snapshot(skill_snapshot)?;
                let mut idx = w as u64;
                while (idx as usize) < cfg.episodes_per_iter {
                    let episode_seed = derive_seed(iter_seed, "episode", idx);
                    let (ep, _) = meta_episode(
                        &local_meta,
                        &local_skill,
                        split,
                        vocab,
                        tables,
                        cfg,
                        world,
                        instruction_count,
                        episode_seed,
                    )?;
                    results.lock().expect("meta batch mutex").push((idx, ep));
                    idx += workers as u64;
                }
                Ok(())
            }));
        }
        for handle in handles {
            match handle.join() {
                Ok(result) => result?,
                Err(_) => return Err(TrainError::WorkerFailure("meta worker panicked".to_string())),
            }
        }
        Ok(())
    })?;

    Ok(results.into_inner().expect("meta batch mutex"))
}
