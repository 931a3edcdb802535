use eval_bench::{
    evaluate, make_baseline, near_optimal_policy, shortest_path_policy, BaselineKind, MetaAgent,
    NearOptimalAgent, ShortestPathAgent,
};
use gridworld::{
    Action, Cell, Dir, GridState, Instruction, InstructionKind, ObjectTypeId, Tables, TaskAction,
    WorldBuilder, WorldConfig,
};
use meta_controller::{HeadKind, MetaConfig, MetaNet, StepMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rl_train::Agent;
use skill_net::{SkillConfig, SkillNet};
use task_space::{build_split, Scenario, TaskSplit, Vocabulary};

fn pick_up(object: u8) -> Instruction {
    Instruction { kind: InstructionKind::PickUp, object: ObjectTypeId(object) }
}

fn visit(object: u8) -> Instruction {
    Instruction { kind: InstructionKind::Visit, object: ObjectTypeId(object) }
}

#[test]
fn adjacent_pick_up_emits_the_interaction() {
    let tables = Tables::default();
    let pig = ObjectTypeId(1);
    let state = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .cell((1, 2), Cell::Object(pig))
        .build(&[pick_up(1)], &tables)
        .unwrap();
    assert_eq!(shortest_path_policy(&state), Action::PickUp(Dir::North));
}

#[test]
fn visit_walks_the_bfs_line() {
    let tables = Tables::default();
    let egg = ObjectTypeId(5);
    let state = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .cell((2, 4), Cell::Object(egg))
        .build(&[visit(5)], &tables)
        .unwrap();
    assert_eq!(shortest_path_policy(&state), Action::Move(Dir::East));
}

#[test]
fn unreachable_target_degrades_to_noop() {
    let tables = Tables::default();
    // Wall off the target completely.
    let state = WorldBuilder::new(5, 5)
        .agent((4, 4))
        .cell((0, 0), Cell::Object(ObjectTypeId(0)))
        .cell((0, 1), Cell::Block)
        .cell((1, 0), Cell::Block)
        .cell((1, 1), Cell::Block)
        .build(&[visit(0)], &tables)
        .unwrap();
    assert_eq!(shortest_path_policy(&state), Action::NoOp);
}

#[test]
fn near_optimal_engages_adjacent_enemies_and_falls_back() {
    let tables = Tables::default();
    let state = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .enemy((2, 3), 8)
        .cell((4, 4), Cell::Object(ObjectTypeId(0)))
        .build(&[visit(0)], &tables)
        .unwrap();
    assert_eq!(near_optimal_policy(&state, 2), Action::Transform(Dir::East));

    let no_enemy = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .cell((4, 4), Cell::Object(ObjectTypeId(0)))
        .build(&[visit(0)], &tables)
        .unwrap();
    assert_eq!(near_optimal_policy(&no_enemy, 2), shortest_path_policy(&no_enemy));
}

#[test]
fn oracle_completes_single_instructions_in_minimal_steps() {
    // Enumerable 5x5 worlds; expected steps from an independent BFS.
    let tables = Tables::default();
    for seed in 0..60 {
        let config = WorldConfig {
            height: 5,
            width: 5,
            wall_density: 0.08,
            object_density: 0.1,
            enemy_spawn_prob: 0.0,
            episode_limit: 60,
            placeable_types: vec![2, 3],
            seed,
            ..WorldConfig::default()
        };
        for kind in [InstructionKind::Visit, InstructionKind::PickUp, InstructionKind::Transform] {
            let instruction = Instruction { kind, object: ObjectTypeId(0) };
            let Ok((state, _)) = GridState::reset(&config, &[instruction], &tables) else {
                continue;
            };
            // Independent oracle: the shortest-path step count is the BFS
            // distance to the nearest target cell (the final approach step
            // is replaced by the interaction for pick-up/transform).
            let expected: u32 = state
                .object_cells(ObjectTypeId(0))
                .into_iter()
                .filter_map(|cell| eval_bench::bfs_distance_to_cell(&state, cell))
                .min()
                .expect("target placed and reachable");

            let mut s = state;
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut agent = ShortestPathAgent;
            let mut steps = 0u32;
            while !s.is_done() {
                let a = agent.act(&s, &mut rng);
                s.step(a).unwrap();
                steps += 1;
            }
            assert_eq!(s.completed(), 1, "seed {seed} {kind:?}: oracle must finish");
            assert_eq!(
                steps, expected,
                "seed {seed} {kind:?}: oracle took {steps} steps, BFS oracle says {expected}"
            );
        }
    }
}

fn eval_world() -> WorldConfig {
    WorldConfig {
        height: 6,
        width: 6,
        wall_density: 0.02,
        object_density: 0.2,
        enemy_spawn_prob: 0.0,
        episode_limit: 50,
        placeable_types: vec![0, 1, 2],
        ..WorldConfig::default()
    }
}

fn eval_split() -> TaskSplit {
    build_split(Scenario::Independent, (0..3).map(ObjectTypeId).collect(), 0.2, 3).unwrap()
}

struct NoOpAgent;
impl Agent for NoOpAgent {
    fn reset(&mut self, _state: &GridState) {}
    fn act(&mut self, _state: &GridState, _rng: &mut ChaCha8Rng) -> Action {
        Action::NoOp
    }
}

#[test]
fn evaluate_produces_the_full_grid_with_paired_seeds() {
    let tables = Tables::default();
    let split = eval_split();
    let shortest = || Box::new(ShortestPathAgent) as Box<dyn Agent>;
    let noop = || Box::new(NoOpAgent) as Box<dyn Agent>;
    let agents: Vec<(String, &dyn rl_train::AgentFactory)> = vec![
        ("shortest_path".to_string(), &shortest),
        ("no_op".to_string(), &noop),
    ];
    let report = evaluate(&agents, &split, &tables, &eval_world(), &[1, 2], 10, 7).unwrap();
    assert_eq!(report.rows.len(), 2 * 2 * 2, "|agents| x |counts| x 2");

    let oracle_cell = report.cell("shortest_path", 1, false).unwrap();
    assert_eq!(oracle_cell.success_rate, 1.0, "oracle solves trivial worlds");
    let noop_cell = report.cell("no_op", 1, false).unwrap();
    assert_eq!(noop_cell.success_rate, 0.0);
    assert_eq!(noop_cell.mean_steps, 50.0, "no-op runs to the limit");

    // Paired seeds: re-running yields the identical report.
    let report2 = evaluate(&agents, &split, &tables, &eval_world(), &[1, 2], 10, 7).unwrap();
    assert_eq!(
        serde_json::to_string(&report.rows).unwrap(),
        serde_json::to_string(&report2.rows).unwrap()
    );
    // Table and plot exports stay in sync with the rows.
    assert!(report.to_table().contains("shortest_path"));
    assert!(report.plot_data().lines().count() == report.rows.len() + 1);
}

fn tiny_meta(head: HeadKind, action_arity: usize, object_arity: usize) -> MetaNet {
    let tables = Tables::default();
    let vocab = Vocabulary::from_tables(&tables);
    let config = MetaConfig {
        canvas: 6,
        conv1_channels: 4,
        conv2_channels: 4,
        conv3_channels: 4,
        task_embed_dim: 6,
        sentence_dim: 8,
        joint_dim: 8,
        feature_dim: 8,
        lstm_factor: 8,
        context_dim: 8,
        shift_hidden: 8,
        goal_hidden: 8,
        max_instructions: 6,
        ..MetaConfig::default()
    };
    MetaNet::new(config, vocab.len(), action_arity, object_arity, head, 5)
}

fn tiny_skill() -> SkillNet {
    let split = eval_split();
    SkillNet::new(
        SkillConfig {
            canvas: 6,
            conv1_channels: 4,
            conv2_channels: 4,
            conv3_channels: 4,
            conv4_channels: 4,
            embed_dim: 6,
            lstm_factor: 8,
            lstm_hidden: 8,
            ..SkillConfig::default()
        },
        &split.space,
        9,
    )
}

fn run_agent_for(agent: &mut MetaAgent, steps: usize, seed: u64) {
    let tables = Tables::default();
    let world = eval_world();
    let instructions = vec![visit(0), pick_up(1)];
    let mut done_steps = 0;
    let mut episode = 0u64;
    while done_steps < steps {
        let config = world.clone().with_seed(seed + episode);
        let (mut state, _) = GridState::reset(&config, &instructions, &tables).unwrap();
        agent.reset(&state);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + episode);
        while !state.is_done() && done_steps < steps {
            let a = agent.act(&state, &mut rng);
            state.step(a).unwrap();
            done_steps += 1;
        }
        episode += 1;
    }
}

#[test]
fn hier_long_gate_tracks_the_termination_bit() {
    let tables = Tables::default();
    let vocab = Vocabulary::from_tables(&tables);
    let mut agent = make_baseline(
        BaselineKind::HierLong,
        tiny_meta(HeadKind::Subtask, 3, 3),
        Some(tiny_skill()),
        vocab,
        tables,
        StepMode::Hard,
    )
    .unwrap();
    run_agent_for(&mut agent, 300, 11);
    assert_eq!(agent.last_gate.len(), agent.last_b.len());
    for (c, b) in agent.last_gate.iter().zip(&agent.last_b) {
        assert_eq!(c, b, "hier-long updates exactly when the skill terminates");
    }
}

#[test]
fn hier_short_updates_every_step() {
    let tables = Tables::default();
    let vocab = Vocabulary::from_tables(&tables);
    let mut agent = make_baseline(
        BaselineKind::HierShort,
        tiny_meta(HeadKind::Subtask, 3, 3),
        Some(tiny_skill()),
        vocab,
        tables,
        StepMode::Hard,
    )
    .unwrap();
    run_agent_for(&mut agent, 300, 13);
    assert!(agent.last_gate.iter().all(|c| *c == 1.0), "never copies");
}

#[test]
fn flat_exposes_thirteen_primitive_actions() {
    let tables = Tables::default();
    let vocab = Vocabulary::from_tables(&tables);
    let meta = tiny_meta(HeadKind::Primitive, 13, 1);
    assert_eq!(meta.action_arity, 13);
    let mut agent = make_baseline(
        BaselineKind::Flat,
        meta,
        None,
        vocab,
        tables,
        StepMode::Hard,
    )
    .unwrap();
    run_agent_for(&mut agent, 300, 17);
}

#[test]
fn hierarchical_baselines_require_a_skill() {
    let tables = Tables::default();
    let vocab = Vocabulary::from_tables(&tables);
    assert!(make_baseline(
        BaselineKind::HierShort,
        tiny_meta(HeadKind::Subtask, 3, 3),
        None,
        vocab,
        tables,
        StepMode::Hard,
    )
    .is_err());
}

#[test]
fn near_optimal_wrapper_matches_policy() {
    let tables = Tables::default();
    let state = WorldBuilder::new(5, 5)
        .agent((1, 1))
        .enemy((1, 2), 5)
        .cell((4, 4), Cell::Object(ObjectTypeId(0)))
        .build(&[visit(0)], &tables)
        .unwrap();
    let mut agent = NearOptimalAgent { engage_radius: 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(agent.act(&state, &mut rng), Action::Transform(Dir::East));
    let _ = TaskAction::Visit;
}
