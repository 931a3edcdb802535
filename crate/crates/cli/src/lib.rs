//! Library behind the `instrux` binary: config handling, the training and
//! evaluation pipelines, gradient checks, and artifact inspection.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gridworld::Tables;
use meta_controller::{HeadKind, MetaNet, StepMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rl_train::{
    load_meta_checkpoint, load_skill_checkpoint, param_hash,
    save_meta_checkpoint, save_skill_checkpoint, train_meta, train_skill, GateMode,
    IterationMetrics, MetaStage, MetaTrainConfig, SkillStage, SkillTrainConfig,
};
use serde::Serialize;
use skill_net::SkillNet;
use tensor_core::{grad_check, GradCheckReport, RmsProp, Tensor};
use task_space::{build_split, load_split, save_split, Scenario, TaskParams, TaskSplit, Vocabulary};
use thiserror::Error;

pub mod config;

pub use config::RunConfig;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    BadConfig(String),
    #[error("missing dependency: {0}")]
    MissingDependency(String),
    #[error("training diverged; last finite checkpoint at {checkpoint}")]
    Diverged { checkpoint: String },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BadConfig(_) => 2,
            CliError::MissingDependency(_) => 3,
            CliError::Diverged { .. } => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<rl_train::TrainError> for CliError {
    fn from(e: rl_train::TrainError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<task_space::TaskError> for CliError {
    fn from(e: task_space::TaskError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<gridworld::GridError> for CliError {
    fn from(e: gridworld::GridError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<eval_bench::EvalError> for CliError {
    fn from(e: eval_bench::EvalError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("io error: {e}"))
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    /// The merged, effective config, verbatim.
    pub effective_config: String,
}

fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let path = out_dir.join("run-manifest.json");
    std::fs::write(&path, serde_json::to_vec_pretty(manifest).map_err(|e| CliError::Other(e.to_string()))?)?;
    Ok(())
}

fn write_metrics_file(out_dir: &Path, name: &str, metrics: &[IterationMetrics]) -> Result<PathBuf, CliError> {
    let path = out_dir.join(name);
    let mut file = std::fs::File::create(&path)?;
    rl_train::write_metrics(metrics, &mut file)?;
    Ok(path)
}

pub fn resolve_tables(cfg: &RunConfig) -> Result<Tables, CliError> {
    match &cfg.tables_file {
        Some(path) => Tables::load(Path::new(path)).map_err(|e| CliError::BadConfig(e.to_string())),
        None => Ok(Tables::default()),
    }
}

pub fn resolve_split(cfg: &RunConfig, tables: &Tables) -> Result<TaskSplit, CliError> {
    if let Some(path) = &cfg.split_file {
        return load_split(Path::new(path), tables).map_err(|e| CliError::BadConfig(e.to_string()));
    }
    let objects = if cfg.objects.is_empty() {
        (0..tables.object_count() as u8).map(gridworld::ObjectTypeId).collect()
    } else {
        cfg.objects
            .iter()
            .map(|n| tables.id_of(n))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::BadConfig(e.to_string()))?
    };
    build_split(cfg.scenario, objects, cfg.holdout_fraction, cfg.seed)
        .map_err(|e| CliError::BadConfig(e.to_string()))
}

fn placeable_ids(split: &TaskSplit) -> Vec<u8> {
    split.space.objects.iter().map(|o| o.0).collect()
}

/// Train the skill: distillation against the scripted teacher, then
/// actor-critic fine-tuning. Writes checkpoint, metrics, split/table
/// files, and the run manifest into `out_dir`.
pub fn cmd_train_skill(cfg: &RunConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let tables = resolve_tables(cfg)?;
    let split = resolve_split(cfg, &tables)?;
    let net = SkillNet::new(cfg.skill_net.clone(), &split.space, gridworld::derive_seed(cfg.seed, "skill-init", 0));
    let teacher = eval_bench::ScriptedTeacher {
        groups: split.group_by_type(),
    };
    let world = cfg.env.world(placeable_ids(&split), true);

    let ckpt_path = out_dir.join("skill.ckpt");
    let mut outputs = Vec::new();
    let hyper_json = serde_json::to_value(&cfg.skill_train).map_err(|e| CliError::Other(e.to_string()))?;

    let save = |stage: &str, iteration: usize, opt: Option<&RmsProp>| -> Result<(), CliError> {
        save_skill_checkpoint(
            &ckpt_path,
            &net,
            &split,
            &tables,
            opt,
            stage,
            iteration,
            cfg.seed,
            hyper_json.clone(),
        )?;
        Ok(())
    };

    let handle_divergence = |e: rl_train::TrainError, net: &SkillNet, stage: &str| -> CliError {
        if let rl_train::TrainError::Divergence { iteration, detail } = &e {
            let path = out_dir.join("skill-last-finite.ckpt");
            let _ = save_skill_checkpoint(
                &path, net, &split, &tables, None, stage, *iteration, cfg.seed,
                serde_json::json!({ "diverged": detail }),
            );
            return CliError::Diverged {
                checkpoint: path.display().to_string(),
            };
        }
        CliError::Other(e.to_string())
    };

    if cfg.skill_train.distill_iterations > 0 {
        let mut opt = RmsProp::new(
            net.params().tensors(),
            cfg.skill_train.lr_distill,
            cfg.skill_train.smoothing,
            cfg.skill_train.eps,
        )
        .map_err(|e| CliError::BadConfig(e.to_string()))?;
        let train_cfg = SkillTrainConfig {
            stage: SkillStage::Distill,
            iterations: cfg.skill_train.distill_iterations,
            episodes_per_iter: cfg.skill_train.episodes_per_iter,
            workers: cfg.skill_train.workers,
            world: world.clone(),
            hyper: cfg.skill_train.hyper(cfg.skill_train.lr_distill),
            seed: cfg.seed,
            start_iteration: 0,
        };
        let metrics = train_skill(&net, &split, &tables, Some(&teacher), &mut opt, &train_cfg)
            .map_err(|e| handle_divergence(e, &net, "distill"))?;
        outputs.push(
            write_metrics_file(out_dir, "metrics-distill.jsonl", &metrics)?
                .display()
                .to_string(),
        );
    }

    if cfg.skill_train.ac_iterations > 0 {
        let mut opt = RmsProp::new(
            net.params().tensors(),
            cfg.skill_train.lr_ac,
            cfg.skill_train.smoothing,
            cfg.skill_train.eps,
        )
        .map_err(|e| CliError::BadConfig(e.to_string()))?;
        let train_cfg = SkillTrainConfig {
            stage: SkillStage::ActorCritic,
            iterations: cfg.skill_train.ac_iterations,
            episodes_per_iter: cfg.skill_train.episodes_per_iter,
            workers: cfg.skill_train.workers,
            world,
            hyper: cfg.skill_train.hyper(cfg.skill_train.lr_ac),
            seed: cfg.seed,
            start_iteration: 0,
        };
        let metrics = train_skill(&net, &split, &tables, None, &mut opt, &train_cfg)
            .map_err(|e| handle_divergence(e, &net, "actor_critic"))?;
        outputs.push(
            write_metrics_file(out_dir, "metrics-actor-critic.jsonl", &metrics)?
                .display()
                .to_string(),
        );
    }

    save("skill", cfg.skill_train.distill_iterations + cfg.skill_train.ac_iterations, None)?;
    outputs.push(ckpt_path.display().to_string());
    save_split(&split, &tables, &out_dir.join("split.toml"))?;
    tables.save(&out_dir.join("tables.toml"))?;

    write_manifest(
        out_dir,
        &RunManifest {
            command: "train-skill".to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            code_version: CODE_VERSION.to_string(),
            inputs: BTreeMap::new(),
            outputs,
            effective_config: cfg.canonical_toml(),
        },
    )?;
    Ok(ckpt_path)
}

fn parse_meta_stage(s: &str) -> Result<MetaStage, CliError> {
    Ok(match s {
        "soft" => MetaStage::Soft,
        "soft-finetune" | "soft_finetune" => MetaStage::SoftFinetune,
        "hard-finetune" | "hard_finetune" => MetaStage::HardFinetune,
        other => return Err(CliError::BadConfig(format!("unknown meta stage {other:?}"))),
    })
}

/// Train one meta stage. `soft` starts fresh; the fine-tune stages require
/// a previous meta checkpoint of the right lineage.
pub fn cmd_train_meta(
    cfg: &RunConfig,
    stage_name: &str,
    skill_ckpt: &Path,
    resume: Option<&Path>,
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let stage = parse_meta_stage(stage_name)?;
    if !skill_ckpt.exists() {
        return Err(CliError::MissingDependency(format!(
            "skill checkpoint {} does not exist",
            skill_ckpt.display()
        )));
    }
    let loaded_skill = load_skill_checkpoint(skill_ckpt)
        .map_err(|e| CliError::MissingDependency(format!("cannot load skill checkpoint: {e}")))?;
    let tables = loaded_skill.tables.clone();
    let split = loaded_skill.split.clone();
    let vocab = Vocabulary::from_tables(&tables);
    let skill_hash = param_hash(loaded_skill.net.params());

    let meta = match (stage, resume) {
        (MetaStage::Soft, None) => MetaNet::new(
            cfg.meta_net.clone(),
            vocab.len(),
            split.space.action_arity(),
            split.space.object_arity(),
            HeadKind::Subtask,
            gridworld::derive_seed(cfg.seed, "meta-init", 0),
        ),
        (MetaStage::Soft, Some(path)) => {
            let loaded = load_meta_checkpoint(path)
                .map_err(|e| CliError::MissingDependency(format!("cannot load meta checkpoint: {e}")))?;
            loaded.net
        }
        (MetaStage::SoftFinetune | MetaStage::HardFinetune, None) => {
            return Err(CliError::MissingDependency(format!(
                "{} requires a soft-stage meta checkpoint (--resume)",
                stage.name()
            )));
        }
        (MetaStage::SoftFinetune | MetaStage::HardFinetune, Some(path)) => {
            let loaded = load_meta_checkpoint(path)
                .map_err(|e| CliError::MissingDependency(format!("cannot load meta checkpoint: {e}")))?;
            let prev = loaded.manifest.stage.as_str();
            let ok = match stage {
                MetaStage::SoftFinetune => matches!(prev, "soft" | "soft_finetune"),
                MetaStage::HardFinetune => matches!(prev, "soft" | "soft_finetune" | "hard_finetune"),
                MetaStage::Soft => true,
            };
            if !ok {
                return Err(CliError::MissingDependency(format!(
                    "stage {} cannot start from a {prev:?} checkpoint",
                    stage.name()
                )));
            }
            if loaded.manifest.skill_hash != skill_hash {
                return Err(CliError::MissingDependency(
                    "meta checkpoint was trained against a different skill".to_string(),
                ));
            }
            loaded.net
        }
    };

    let lr = match stage {
        MetaStage::Soft => cfg.meta_train.lr_soft,
        _ => cfg.meta_train.lr_finetune,
    };
    let iterations = match stage {
        MetaStage::Soft => cfg.meta_train.soft_iterations,
        MetaStage::SoftFinetune => cfg.meta_train.soft_finetune_iterations,
        MetaStage::HardFinetune => cfg.meta_train.hard_finetune_iterations,
    };
    let mut opt = RmsProp::new(meta.params().tensors(), lr, cfg.meta_train.smoothing, cfg.meta_train.eps)
        .map_err(|e| CliError::BadConfig(e.to_string()))?;
    let world = cfg.env.world(placeable_ids(&split), true);
    let train_cfg = MetaTrainConfig {
        stage,
        iterations,
        episodes_per_iter: cfg.meta_train.episodes_per_iter,
        workers: cfg.meta_train.workers,
        world,
        instruction_count: cfg.meta_train.instruction_count,
        hyper: cfg.meta_train.hyper(lr),
        seed: cfg.seed,
        start_iteration: 0,
        gate_mode: GateMode::Learned,
        curriculum: cfg.meta_train.curriculum && stage.uses_curriculum(),
    };

    let metrics = match train_meta(&meta, &loaded_skill.net, &split, &vocab, &tables, &mut opt, &train_cfg) {
        Ok(m) => m,
        Err(rl_train::TrainError::Divergence { iteration, detail }) => {
            let path = out_dir.join("meta-last-finite.ckpt");
            let _ = save_meta_checkpoint(
                &path,
                &meta,
                &skill_ckpt.display().to_string(),
                &skill_hash,
                &split,
                &tables,
                None,
                stage.name(),
                iteration,
                cfg.seed,
                serde_json::json!({ "diverged": detail }),
            );
            return Err(CliError::Diverged {
                checkpoint: path.display().to_string(),
            });
        }
        Err(e) => return Err(e.into()),
    };

    let ckpt_path = out_dir.join(format!("meta-{}.ckpt", stage.name()));
    save_meta_checkpoint(
        &ckpt_path,
        &meta,
        &skill_ckpt.display().to_string(),
        &skill_hash,
        &split,
        &tables,
        Some(&opt),
        stage.name(),
        iterations,
        cfg.seed,
        serde_json::to_value(&cfg.meta_train).map_err(|e| CliError::Other(e.to_string()))?,
    )?;
    let metrics_path = write_metrics_file(out_dir, &format!("metrics-meta-{}.jsonl", stage.name()), &metrics)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("skill_checkpoint".to_string(), skill_ckpt.display().to_string());
    inputs.insert("skill_hash".to_string(), skill_hash);
    if let Some(r) = resume {
        inputs.insert("resume".to_string(), r.display().to_string());
    }
    write_manifest(
        out_dir,
        &RunManifest {
            command: format!("train-meta {}", stage.name()),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            code_version: CODE_VERSION.to_string(),
            inputs,
            outputs: vec![ckpt_path.display().to_string(), metrics_path.display().to_string()],
            effective_config: cfg.canonical_toml(),
        },
    )?;
    Ok(ckpt_path)
}

/// Evaluate scripted policies and optional learned agents on the paired
/// seed grid; writes the table, JSONL rows, and plot data.
pub fn cmd_eval(
    cfg: &RunConfig,
    skill_ckpt: Option<&Path>,
    meta_ckpt: Option<&Path>,
    include_baselines: bool,
    out_dir: &Path,
) -> Result<eval_bench::EvalReport, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let tables = resolve_tables(cfg)?;
    let split = resolve_split(cfg, &tables)?;
    let world = cfg.env.world(placeable_ids(&split), false);
    let radius = cfg.eval.engage_radius;

    let shortest = || Box::new(eval_bench::ShortestPathAgent) as Box<dyn rl_train::Agent>;
    let near = move || Box::new(eval_bench::NearOptimalAgent { engage_radius: radius }) as Box<dyn rl_train::Agent>;
    let mut agents: Vec<(String, Box<dyn rl_train::AgentFactory>)> = vec![
        ("shortest_path".to_string(), Box::new(shortest)),
        ("near_optimal".to_string(), Box::new(near)),
    ];

    let loaded_meta = match meta_ckpt {
        Some(path) => Some(
            load_meta_checkpoint(path)
                .map_err(|e| CliError::MissingDependency(format!("cannot load meta checkpoint: {e}")))?,
        ),
        None => None,
    };
    if let Some(loaded) = &loaded_meta {
        let head = loaded.net.head;
        let needs_skill = head == HeadKind::Subtask || include_baselines;
        let skill_snapshot = match (needs_skill, skill_ckpt) {
            (true, None) => {
                return Err(CliError::MissingDependency(
                    "hierarchical agents require --skill".to_string(),
                ))
            }
            (true, Some(p)) => {
                let s = load_skill_checkpoint(p)
                    .map_err(|e| CliError::MissingDependency(format!("cannot load skill checkpoint: {e}")))?;
                Some((s.net.config.clone(), s.net.params().snapshot()))
            }
            (false, _) => None,
        };
        let mode = if loaded.manifest.stage == "hard_finetune" {
            StepMode::Hard
        } else {
            StepMode::Soft
        };
        let meta_manifest = loaded.manifest.clone();
        let meta_snapshot = loaded.net.params().snapshot();
        let vocab = Vocabulary::from_tables(&tables);
        let split_for_agent = split.clone();
        let tables_for_agent = tables.clone();

        let gate_variants: Vec<(String, GateMode)> = if head == HeadKind::Primitive {
            vec![("flat".to_string(), GateMode::Learned)]
        } else if include_baselines {
            vec![
                ("hierarchical_dynamic".to_string(), GateMode::Learned),
                ("hierarchical_short".to_string(), GateMode::AlwaysUpdate),
                ("hierarchical_long".to_string(), GateMode::OnTermination),
            ]
        } else {
            vec![("hierarchical_dynamic".to_string(), GateMode::Learned)]
        };

        for (name, gate) in gate_variants {
            let meta_manifest = meta_manifest.clone();
            let meta_snapshot = meta_snapshot.clone();
            let skill_snapshot = skill_snapshot.clone();
            let vocab = vocab.clone();
            let split = split_for_agent.clone();
            let tables = tables_for_agent.clone();
            let factory = move || {
                let meta = MetaNet::new(
                    meta_manifest.net.clone(),
                    meta_manifest.vocab_size,
                    meta_manifest.action_arity,
                    meta_manifest.object_arity,
                    if meta_manifest.head == "primitive" { HeadKind::Primitive } else { HeadKind::Subtask },
                    0,
                );
                meta.params().load_snapshot(&meta_snapshot).expect("snapshot fits");
                let skill = skill_snapshot.as_ref().map(|(cfg, snap)| {
                    let net = SkillNet::new(cfg.clone(), &split.space, 0);
                    net.params().load_snapshot(snap).expect("snapshot fits");
                    net
                });
                Box::new(
                    eval_bench::MetaAgent::new(meta, skill, vocab.clone(), tables.clone(), mode, gate)
                        .expect("agent construction"),
                ) as Box<dyn rl_train::Agent>
            };
            agents.push((name, Box::new(factory)));
        }
    }

    let agent_refs: Vec<(String, &dyn rl_train::AgentFactory)> = agents
        .iter()
        .map(|(n, f)| (n.clone(), f.as_ref()))
        .collect();
    let report = eval_bench::evaluate(
        &agent_refs,
        &split,
        &tables,
        &world,
        &cfg.eval.instruction_counts,
        cfg.eval.episodes_per_cell,
        cfg.seed,
    )?;

    std::fs::write(out_dir.join("report.txt"), report.to_table())?;
    let mut jsonl = std::fs::File::create(out_dir.join("report.jsonl"))?;
    report.write_jsonl(&mut jsonl)?;
    std::fs::write(out_dir.join("plot-data.csv"), report.plot_data())?;

    let mut inputs = BTreeMap::new();
    if let Some(p) = skill_ckpt {
        inputs.insert("skill_checkpoint".to_string(), p.display().to_string());
    }
    if let Some(p) = meta_ckpt {
        inputs.insert("meta_checkpoint".to_string(), p.display().to_string());
    }
    write_manifest(
        out_dir,
        &RunManifest {
            command: "eval".to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            code_version: CODE_VERSION.to_string(),
            inputs,
            outputs: vec![
                out_dir.join("report.txt").display().to_string(),
                out_dir.join("report.jsonl").display().to_string(),
                out_dir.join("plot-data.csv").display().to_string(),
            ],
            effective_config: cfg.canonical_toml(),
        },
    )?;
    Ok(report)
}

/// Gradient check of one full soft meta step (two chained steps, sampling
/// frozen) over every meta parameter, with a small network.
pub fn meta_soft_step_gradcheck(seed: u64, tolerance: f64) -> Result<GradCheckReport, CliError> {
    let tables = Tables::default();
    let vocab = Vocabulary::from_tables(&tables);
    let config = meta_controller::MetaConfig {
        canvas: 5,
        obs_channels: 18,
        conv1_channels: 3,
        conv2_channels: 3,
        conv3_channels: 3,
        task_embed_dim: 4,
        sentence_dim: 6,
        joint_dim: 6,
        feature_dim: 6,
        lstm_factor: 6,
        context_dim: 8,
        shift_hidden: 6,
        goal_hidden: 6,
        max_instructions: 4,
    };
    let net = MetaNet::new(config, vocab.len(), 3, 3, HeadKind::Subtask, seed);
    // Seeded random leaves everywhere (biases included) keep the check off
    // relu kink points that exact-zero preactivations would create.
    {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(gridworld::derive_seed(seed, "gradcheck-leaves", 0));
        for (_, t) in net.params().iter() {
            let values: Vec<f64> = (0..t.numel()).map(|_| rng.gen_range(-0.4..0.4)).collect();
            t.set_data(&values).map_err(|e| CliError::Other(e.to_string()))?;
        }
    }
    let sentences = vec![
        task_space::Sentence { template: task_space::Template::Visit, object: gridworld::ObjectTypeId(0) },
        task_space::Sentence { template: task_space::Template::PickUp, object: gridworld::ObjectTypeId(1) },
        task_space::Sentence { template: task_space::Template::TransformAll, object: gridworld::ObjectTypeId(2) },
    ];
    let world = gridworld::WorldConfig {
        height: 5,
        width: 5,
        seed: gridworld::derive_seed(seed, "gradcheck-world", 0),
        ..gridworld::WorldConfig::default()
    };
    let instructions: Vec<_> = sentences.iter().map(|s| s.instruction()).collect();
    let (state, obs) = gridworld::GridState::reset(&world, &instructions, &tables)
        .map_err(|e| CliError::Other(e.to_string()))?;
    let _ = state;
    let obs_t = skill_net::obs_to_canvas(&obs, 18, 5).map_err(|e| CliError::Other(e.to_string()))?;

    let leaves: Vec<(String, Tensor)> = net
        .params()
        .iter()
        .map(|(n, t)| (n.to_string(), t.clone()))
        .collect();
    let report = grad_check(
        &leaves,
        |g| -> Result<Tensor, meta_controller::MetaError> {
            let memory = meta_controller::build_memory(g, &sentences, &vocab, &tables, net.word_embedding(), 4)?;
            let state0 = meta_controller::MetaRecurrent::initial(g, &net, &memory)?;
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let ov = meta_controller::StepOverrides {
                force_g: Some(TaskParams { action: 1, object: 2 }),
                ..Default::default()
            };
            let s1 = meta_controller::meta_step(
                &net, g, StepMode::Soft, &obs_t, 0.0, &state0, &memory, &mut rng, &ov,
            )?;
            let s2 = meta_controller::meta_step(
                &net, g, StepMode::Soft, &obs_t, 1.0, &s1.state, &memory, &mut rng, &ov,
            )?;
            // Scalar readout across state, value, gate, and policy heads.
            let p = g.sum_all(&s2.state.pointer)?;
            let r = g.sum_all(&s2.state.retrieved)?;
            let h = g.sum_all(&s2.state.h_high)?;
            let hl = g.sum_all(&s2.state.h_low)?;
            let a_dist = s2.action_dist.expect("soft step emits distributions");
            let clamped = g.clamp_min(&a_dist, 1e-12)?;
            let logs = g.log(&clamped)?;
            let pick = g.select(&logs, 1)?;
            let gated = g.scalar_mul(&s2.c_tensor, &pick)?;
            let mut acc = g.add(&p, &r)?;
            acc = g.add(&acc, &h)?;
            acc = g.add(&acc, &hl)?;
            acc = g.add(&acc, &s2.value)?;
            acc = g.add(&acc, &gated)?;
            Ok(acc)
        },
        tolerance,
        1e-5,
    )
    .map_err(|e| CliError::Other(e.to_string()))?;
    Ok(report)
}

/// Per-op and meta-step gradient checks; returns (all_pass, report text).
pub fn cmd_gradcheck(seeds: u64, tolerance: f64) -> Result<(bool, String), CliError> {
    let mut out = String::new();
    let mut all_pass = true;
    for seed in 0..seeds {
        let checks = tensor_core::suite::standard_op_suite(seed, tolerance)
            .map_err(|e| CliError::Other(e.to_string()))?;
        for (name, report) in checks {
            if !report.all_pass() {
                all_pass = false;
                out.push_str(&format!(
                    "FAIL op {name} seed {seed}: max rel err {:.3e}\n",
                    report.max_rel_err()
                ));
            }
        }
    }
    out.push_str(&format!("op kinds: {} seeds, tolerance {tolerance:.0e}\n", seeds));
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let report = meta_soft_step_gradcheck(seed, tolerance)?;
        worst = worst.max(report.max_rel_err());
        if !report.all_pass() {
            all_pass = false;
            for leaf in report.leaves.iter().filter(|l| !l.pass) {
                out.push_str(&format!(
                    "FAIL meta soft step seed {seed} leaf {}: rel err {:.3e}\n",
                    leaf.name, leaf.max_rel_err
                ));
            }
        }
    }
    out.push_str(&format!(
        "meta soft step: {} seeds, worst rel err {worst:.3e}\n",
        seeds
    ));
    out.push_str(if all_pass { "gradcheck: PASS\n" } else { "gradcheck: FAIL\n" });
    Ok((all_pass, out))
}

/// Human-readable view of a checkpoint archive.
pub fn cmd_inspect(path: &Path) -> Result<String, CliError> {
    let archive = tensor_core::Archive::load(path).map_err(|e| CliError::Other(e.to_string()))?;
    let mut out = String::new();
    out.push_str(&format!(
        "archive {} (format v{}, rng seed {})\n",
        path.display(),
        archive.version,
        archive.seed
    ));
    for entry in &archive.entries {
        match &entry.data {
            tensor_core::EntryData::F64 { shape, values } => {
                out.push_str(&format!("  {:<40} f64 {:?} ({} values)\n", entry.name, shape, values.len()));
            }
            tensor_core::EntryData::Bytes(b) => {
                out.push_str(&format!("  {:<40} bytes ({} bytes)\n", entry.name, b.len()));
            }
        }
    }
    if let Ok(manifest) = archive.bytes_entry(rl_train::MANIFEST_ENTRY) {
        if let Ok(json) = serde_json::from_slice::<serde_json::Value>(manifest) {
            out.push_str("manifest:\n");
            out.push_str(&serde_json::to_string_pretty(&json).map_err(|e| CliError::Other(e.to_string()))?);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Convenience split matching Appendix-style tables: used by tests and the
/// acceptance bench to build custom action subsets.
pub fn manual_split(actions: Vec<gridworld::TaskAction>, objects: Vec<gridworld::ObjectTypeId>) -> TaskSplit {
    let space = task_space::TaskSpace { actions, objects };
    let train = space.all_tasks();
    TaskSplit {
        scenario: Scenario::Independent,
        space,
        train,
        unseen: Vec::new(),
        groups: None,
    }
}
