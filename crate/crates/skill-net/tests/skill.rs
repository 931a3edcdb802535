use gridworld::{ObjectTypeId, Tables, WorldConfig};
use skill_net::{
    analogy_loss, distillation_loss, skill_ac_loss, AcStep, AcWeights, SkillConfig, SkillNet,
    SkillState,
};
use task_space::{AnalogyBatch, Scenario, TaskParams, TaskSpace};
use tensor_core::{grad_check, Graph, RmsProp, Tensor};

fn tiny_config() -> SkillConfig {
    SkillConfig {
        canvas: 5,
        obs_channels: 18,
        conv1_channels: 4,
        conv2_channels: 4,
        conv3_channels: 4,
        conv4_channels: 4,
        embed_dim: 6,
        lstm_factor: 8,
        lstm_hidden: 8,
    }
}

fn small_space() -> TaskSpace {
    TaskSpace::new(Scenario::Independent, vec![ObjectTypeId(0), ObjectTypeId(1), ObjectTypeId(2)])
}

fn sample_obs(seed: u64) -> gridworld::Observation {
    let tables = Tables::default();
    let config = WorldConfig {
        height: 5,
        width: 5,
        seed,
        ..WorldConfig::default()
    };
    let instructions = vec![gridworld::Instruction {
        kind: gridworld::InstructionKind::Visit,
        object: ObjectTypeId(0),
    }];
    let (_, obs) = gridworld::GridState::reset(&config, &instructions, &tables).unwrap();
    obs
}

#[test]
fn action_distribution_is_a_simplex() {
    let net = SkillNet::new(tiny_config(), &small_space(), 3);
    let mut g = Graph::inference();
    let obs = net.obs_tensor(&sample_obs(1)).unwrap();
    let out = net
        .forward(&mut g, &obs, TaskParams { action: 0, object: 1 }, &SkillState::zeros(&net.config))
        .unwrap();
    let sum: f64 = out.action_dist.data().iter().sum();
    assert!((sum - 1.0).abs() < 1e-12);
    assert!(out.action_dist.data().iter().all(|p| *p >= 0.0));
    let term = out.term_prob.item().unwrap();
    assert!(term > 0.0 && term < 1.0);
}

#[test]
fn zero_params_give_uniform_policy_and_half_termination() {
    let net = SkillNet::new(tiny_config(), &small_space(), 3);
    for (_, t) in net.params().iter() {
        t.set_data(&vec![0.0; t.numel()]).unwrap();
    }
    let mut g = Graph::inference();
    let obs = net.obs_tensor(&sample_obs(2)).unwrap();
    let out = net
        .forward(&mut g, &obs, TaskParams { action: 1, object: 0 }, &SkillState::zeros(&net.config))
        .unwrap();
    for p in out.action_dist.data().iter() {
        assert!((p - 1.0 / 13.0).abs() < 1e-12);
    }
    assert!((out.term_prob.item().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(out.value.item().unwrap(), 0.0);
}

#[test]
fn task_embed_is_pure_and_zero_under_zero_tables() {
    let net = SkillNet::new(tiny_config(), &small_space(), 7);
    let tp = TaskParams { action: 2, object: 1 };
    let mut g = Graph::inference();
    let a = net.task_embed(&mut g, tp).unwrap().to_vec();
    let b = net.task_embed(&mut g, tp).unwrap().to_vec();
    assert_eq!(a, b);
    assert!(net.task_embed(&mut g, TaskParams { action: 3, object: 0 }).is_err());

    for name in ["embed.w1", "embed.w2"] {
        let t = net.params().get(name).unwrap();
        t.set_data(&vec![0.0; t.numel()]).unwrap();
    }
    let z = net.task_embed(&mut g, tp).unwrap();
    assert!(z.data().iter().all(|v| *v == 0.0));
}

fn stub_embed(
    map: Vec<(TaskParams, Vec<f64>)>,
) -> impl FnMut(&mut Graph, TaskParams) -> Result<Tensor, skill_net::SkillError> {
    move |_g, tp| {
        let (_, v) = map
            .iter()
            .find(|(k, _)| *k == tp)
            .expect("task present in stub table");
        Ok(Tensor::from_vec(&[v.len()], v.clone()).unwrap())
    }
}

fn quad(i: [usize; 4]) -> [TaskParams; 4] {
    [
        TaskParams { action: 0, object: i[0] },
        TaskParams { action: 0, object: i[1] },
        TaskParams { action: 0, object: i[2] },
        TaskParams { action: 0, object: i[3] },
    ]
}

#[test]
fn analogy_losses_have_exact_fixed_points() {
    // Parallelogram: phi(A)=(0,0), phi(B)=(1,0), phi(C)=(0,1), phi(D)=(1,1).
    let table = vec![
        (TaskParams { action: 0, object: 0 }, vec![0.0, 0.0]),
        (TaskParams { action: 0, object: 1 }, vec![1.0, 0.0]),
        (TaskParams { action: 0, object: 2 }, vec![0.0, 1.0]),
        (TaskParams { action: 0, object: 3 }, vec![1.0, 1.0]),
        (TaskParams { action: 0, object: 4 }, vec![3.0, 4.0]),
    ];

    // Delta(A,B) = Delta(C,D) = (-1, 0): L_sim is exactly zero.
    let mut g = Graph::new();
    let batch = AnalogyBatch {
        sim: vec![quad([0, 1, 2, 3])],
        dis: vec![],
        diff: vec![],
    };
    let mut embed = stub_embed(table.clone());
    let terms = analogy_loss(&mut g, &mut embed, &batch, 3.0, 3.0).unwrap();
    assert!(terms.sim.item().unwrap().abs() < 1e-12);

    // The same quadruple declared dissimilar: hinge at zero distance gives tau^2 = 9.
    let batch = AnalogyBatch {
        sim: vec![],
        dis: vec![quad([0, 1, 2, 3])],
        diff: vec![],
    };
    let mut embed = stub_embed(table.clone());
    let terms = analogy_loss(&mut g, &mut embed, &batch, 3.0, 3.0).unwrap();
    assert!((terms.dis.item().unwrap() - 9.0).abs() < 1e-12);

    // ||Delta|| = 5 >= tau_diff = 3: hinge satisfied, contribution zero.
    let batch = AnalogyBatch {
        sim: vec![],
        dis: vec![],
        diff: vec![[
            TaskParams { action: 0, object: 4 },
            TaskParams { action: 0, object: 0 },
        ]],
    };
    let mut embed = stub_embed(table);
    let terms = analogy_loss(&mut g, &mut embed, &batch, 3.0, 3.0).unwrap();
    assert!(terms.diff.item().unwrap().abs() < 1e-12);
}

#[test]
fn empty_batch_components_contribute_zero() {
    let mut g = Graph::new();
    let batch = AnalogyBatch::default();
    let mut embed = stub_embed(vec![]);
    let terms = analogy_loss(&mut g, &mut embed, &batch, 3.0, 3.0).unwrap();
    assert_eq!(terms.sim.item().unwrap(), 0.0);
    assert_eq!(terms.dis.item().unwrap(), 0.0);
    assert_eq!(terms.diff.item().unwrap(), 0.0);
}

#[test]
fn distillation_loss_matches_hand_values() {
    let mut g = Graph::new();
    // teacher == student -> KL term is zero.
    let dist = Tensor::from_vec(&[4], vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let term = Tensor::from_vec(&[1], vec![0.5]).unwrap();
    let loss = distillation_loss(&mut g, &[0.4, 0.3, 0.2, 0.1], &dist, 1.0, &term, 0.0).unwrap();
    assert!(loss.item().unwrap().abs() < 1e-12);

    // Uniform teacher and student, alpha = 0.1, term target 1 at p = 0.5:
    // loss = 0.1 * ln 2.
    let uniform = Tensor::from_vec(&[4], vec![0.25; 4]).unwrap();
    let loss = distillation_loss(&mut g, &[0.25; 4], &uniform, 1.0, &term, 0.1).unwrap();
    assert!((loss.item().unwrap() - 0.1 * 2.0f64.ln()).abs() < 1e-12);

    // alpha = 0 ignores the termination term entirely.
    let term_bad = Tensor::from_vec(&[1], vec![0.01]).unwrap();
    let a = distillation_loss(&mut g, &[0.25; 4], &uniform, 1.0, &term_bad, 0.0).unwrap();
    assert!(a.item().unwrap().abs() < 1e-12);
}

fn run_forward_step(net: &SkillNet, g: &mut Graph, obs_seed: u64, tp: TaskParams) -> AcStep {
    let obs = net.obs_tensor(&sample_obs(obs_seed)).unwrap();
    let out = net.forward(g, &obs, tp, &SkillState::zeros(&net.config)).unwrap();
    AcStep {
        action_dist: out.action_dist,
        term_prob: out.term_prob,
        value: out.value,
        action: 3,
        term_label: 0.0,
    }
}

#[test]
fn zero_advantage_and_no_aux_terms_give_zero_loss() {
    let net = SkillNet::new(tiny_config(), &small_space(), 5);
    let mut g = Graph::new();
    let steps = vec![run_forward_step(&net, &mut g, 1, TaskParams { action: 0, object: 0 })];
    let w = AcWeights {
        alpha: 0.0,
        value_weight: 0.0,
        entropy_weight: 0.0,
        xi: 0.0,
        ..AcWeights::default()
    };
    let loss = skill_ac_loss(&mut g, &steps, &[0.0], &[0.0], None, &w).unwrap();
    assert_eq!(loss.item().unwrap(), 0.0);
}

#[test]
fn xi_zero_matches_plain_actor_critic() {
    let net = SkillNet::new(tiny_config(), &small_space(), 5);
    let w_plain = AcWeights { xi: 0.0, ..AcWeights::default() };
    let w_with = AcWeights { xi: 1.0, ..AcWeights::default() };

    let mut g = Graph::new();
    let steps = vec![run_forward_step(&net, &mut g, 1, TaskParams { action: 0, object: 0 })];
    let plain = skill_ac_loss(&mut g, &steps, &[0.5], &[1.0], None, &w_plain)
        .unwrap()
        .item()
        .unwrap();
    let with_empty = skill_ac_loss(&mut g, &steps, &[0.5], &[1.0], None, &w_with)
        .unwrap()
        .item()
        .unwrap();
    assert_eq!(plain, with_empty);
}

#[test]
fn length_mismatch_is_an_error() {
    let net = SkillNet::new(tiny_config(), &small_space(), 5);
    let mut g = Graph::new();
    let steps = vec![run_forward_step(&net, &mut g, 1, TaskParams { action: 0, object: 0 })];
    assert!(skill_ac_loss(&mut g, &steps, &[0.0, 1.0], &[0.0], None, &AcWeights::default()).is_err());
}

#[test]
fn positive_advantage_step_raises_taken_action_probability() {
    let net = SkillNet::new(tiny_config(), &small_space(), 11);
    let tp = TaskParams { action: 0, object: 0 };
    let obs = sample_obs(4);

    let prob_of_action = |net: &SkillNet| -> f64 {
        let mut g = Graph::inference();
        let obs_t = net.obs_tensor(&obs).unwrap();
        let out = net.forward(&mut g, &obs_t, tp, &SkillState::zeros(&net.config)).unwrap();
        out.action_dist.to_vec()[3]
    };

    let before = prob_of_action(&net);
    let mut g = Graph::new();
    let obs_t = net.obs_tensor(&obs).unwrap();
    let out = net.forward(&mut g, &obs_t, tp, &SkillState::zeros(&net.config)).unwrap();
    let steps = vec![AcStep {
        action_dist: out.action_dist,
        term_prob: out.term_prob,
        value: out.value,
        action: 3,
        term_label: 0.0,
    }];
    let w = AcWeights {
        alpha: 0.0,
        value_weight: 0.0,
        entropy_weight: 0.0,
        xi: 0.0,
        ..AcWeights::default()
    };
    let loss = skill_ac_loss(&mut g, &steps, &[1.0], &[0.0], None, &w).unwrap();
    let grads = g.backward(&loss).unwrap();
    let mut opt = RmsProp::new(net.params().tensors(), 1e-3, 0.97, 1e-6).unwrap();
    opt.step(net.params().tensors(), &grads).unwrap();
    let after = prob_of_action(&net);
    assert!(
        after > before,
        "one positive-advantage step should raise the action probability ({before} -> {after})"
    );
}

#[test]
fn forward_pass_survives_gradient_check() {
    let net = SkillNet::new(tiny_config(), &small_space(), 13);
    let obs = sample_obs(9);
    let tp = TaskParams { action: 1, object: 2 };
    // Check a few representative parameters end to end (full nets are
    // covered per-op in tensor-core).
    let leaves: Vec<(String, Tensor)> = ["embed.w1", "conv3.w_k", "lstm.w_ih", "head.action.w"]
        .iter()
        .map(|n| (n.to_string(), net.params().get(n).unwrap().clone()))
        .collect();
    let report = grad_check(
        &leaves,
        |g| -> Result<Tensor, skill_net::SkillError> {
            let obs_t = net.obs_tensor(&obs)?;
            let out = net.forward(g, &obs_t, tp, &SkillState::zeros(&net.config))?;
            let clamped = g.clamp_min(&out.action_dist, 1e-12)?;
            let log_dist = g.log(&clamped)?;
            let pick = g.select(&log_dist, 5)?;
            let v = g.mul(&out.value, &out.value)?;
            let t = g.select(&out.term_prob, 0)?;
            let a = g.add(&pick, &v)?;
            Ok(g.add(&a, &t)?)
        },
        1e-5,
        1e-5,
    )
    .unwrap();
    assert!(report.all_pass(), "max rel err {}", report.max_rel_err());
}

#[test]
fn observation_shape_mismatch_is_an_error() {
    let net = SkillNet::new(tiny_config(), &small_space(), 3);
    let obs = gridworld::Observation {
        channels: 18,
        height: 8,
        width: 8,
        data: vec![0.0; 18 * 64],
    };
    assert!(net.obs_tensor(&obs).is_err(), "8x8 exceeds the 5x5 canvas");
}
