use gridworld::{
    derive_seed, Action, Cell, Dir, GridState, Goal, Instruction, InstructionKind, ObjectTypeId,
    Tables, TaskAction, WorldBuilder, WorldConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn visit(object: u8) -> Instruction {
    Instruction {
        kind: InstructionKind::Visit,
        object: ObjectTypeId(object),
    }
}

fn pick_up(object: u8) -> Instruction {
    Instruction {
        kind: InstructionKind::PickUp,
        object: ObjectTypeId(object),
    }
}

#[test]
fn reset_is_deterministic() {
    let tables = Tables::default();
    let config = WorldConfig {
        seed: 77,
        ..WorldConfig::default()
    };
    let instructions = vec![visit(0), pick_up(1)];
    let (a, obs_a) = GridState::reset(&config, &instructions, &tables).unwrap();
    let (b, obs_b) = GridState::reset(&config, &instructions, &tables).unwrap();
    assert_eq!(a.agent(), b.agent());
    assert_eq!(obs_a, obs_b);
    for r in 0..a.height() {
        for c in 0..a.width() {
            assert_eq!(a.cell((r, c)), b.cell((r, c)));
        }
    }
}

#[test]
fn empty_instruction_list_is_rejected() {
    let tables = Tables::default();
    let config = WorldConfig::default();
    assert!(GridState::reset(&config, &[], &tables).is_err());
}

#[test]
fn object_density_tracks_free_cells() {
    // Counted over 100 seeds: placements should land near
    // density * free-cells, within generation rounding.
    let tables = Tables::default();
    let mut ratios = Vec::new();
    for seed in 0..100 {
        let config = WorldConfig {
            height: 10,
            width: 10,
            wall_density: 0.0,
            object_density: 0.8,
            seed,
            ..WorldConfig::default()
        };
        let (state, _) = GridState::reset(&config, &[visit(0)], &tables).unwrap();
        let free_cells = 100.0;
        ratios.push(state.total_objects() as f64 / free_cells);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean - 0.8).abs() < 0.05, "mean object ratio {mean}");
}

#[test]
fn generation_places_required_targets() {
    let tables = Tables::default();
    for seed in 0..50 {
        let config = WorldConfig {
            height: 5,
            width: 5,
            wall_density: 0.05,
            object_density: 0.1,
            seed,
            placeable_types: vec![0, 1, 2],
            ..WorldConfig::default()
        };
        let instructions = vec![pick_up(4), pick_up(4), visit(4)];
        let (state, _) = GridState::reset(&config, &instructions, &tables).unwrap();
        assert!(
            state.count_objects(ObjectTypeId(4)) >= 3,
            "seed {seed}: needs two to pick up and one left to visit"
        );
    }
}

#[test]
fn plain_move_costs_time_penalty() {
    let tables = Tables::default();
    let state = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .cell((4, 4), Cell::Object(ObjectTypeId(0)))
        .build(&[visit(0)], &tables)
        .unwrap();
    let mut s = state;
    let (r, done, _) = s.step(Action::Move(Dir::East)).unwrap();
    assert_eq!(s.agent(), (2, 3));
    assert!((r - (-0.1)).abs() < 1e-12);
    assert!(!done);
}

#[test]
fn moving_into_water_adds_penalty() {
    let tables = Tables::default();
    let mut s = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .cell((2, 3), Cell::Water)
        .cell((4, 4), Cell::Object(ObjectTypeId(0)))
        .build(&[visit(0)], &tables)
        .unwrap();
    let (r, _, info) = s.step(Action::Move(Dir::East)).unwrap();
    assert_eq!(s.agent(), (2, 3));
    assert!(info.entered_water);
    assert!((r - (-0.4)).abs() < 1e-12);
}

#[test]
fn moving_into_block_or_bounds_stays_put() {
    let tables = Tables::default();
    let mut s = WorldBuilder::new(3, 3)
        .agent((0, 0))
        .cell((0, 1), Cell::Block)
        .cell((2, 2), Cell::Object(ObjectTypeId(0)))
        .build(&[visit(0)], &tables)
        .unwrap();
    s.step(Action::Move(Dir::East)).unwrap();
    assert_eq!(s.agent(), (0, 0));
    s.step(Action::Move(Dir::North)).unwrap();
    assert_eq!(s.agent(), (0, 0));
}

#[test]
fn transforming_adjacent_enemy_rewards() {
    let tables = Tables::default();
    let mut s = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .enemy((2, 3), 5)
        .cell((4, 4), Cell::Object(ObjectTypeId(0)))
        .build(&[visit(0)], &tables)
        .unwrap();
    let (r, _, info) = s.step(Action::Transform(Dir::East)).unwrap();
    assert!(info.enemy_transformed);
    assert!(s.enemy().is_none());
    assert!((r - 0.8).abs() < 1e-12, "reward {r}");
}

#[test]
fn finishing_last_instruction_rewards_and_ends() {
    let tables = Tables::default();
    let egg = tables.id_of("egg").unwrap();
    let mut s = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .cell((2, 3), Cell::Object(egg))
        .build(&[visit(egg.0)], &tables)
        .unwrap();
    let (r, done, info) = s.step(Action::Move(Dir::East)).unwrap();
    assert!(done);
    assert!(info.all_instructions_done);
    assert!((r - 0.9).abs() < 1e-12, "reward {r}");
    assert!(s.step(Action::NoOp).is_err());
}

#[test]
fn pick_up_removes_object_and_completes() {
    let tables = Tables::default();
    let pig = tables.id_of("pig").unwrap();
    let mut s = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .cell((1, 2), Cell::Object(pig))
        .build(&[pick_up(pig.0)], &tables)
        .unwrap();
    let (r, done, _) = s.step(Action::PickUp(Dir::North)).unwrap();
    assert!(done);
    assert_eq!(s.cell((1, 2)), Cell::Empty);
    assert!((r - 0.9).abs() < 1e-12);
}

#[test]
fn transform_becomes_rule_swaps_the_object() {
    let tables = Tables::default();
    let cow = tables.id_of("cow").unwrap();
    let meat = tables.id_of("meat").unwrap();
    let mut s = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .cell((2, 1), Cell::Object(cow))
        .build(
            &[Instruction { kind: InstructionKind::Transform, object: cow }],
            &tables,
        )
        .unwrap();
    let (_, done, _) = s.step(Action::Transform(Dir::West)).unwrap();
    assert!(done);
    assert_eq!(s.cell((2, 1)), Cell::Object(meat));
}

#[test]
fn pick_up_all_with_zero_targets_completes_vacuously() {
    let tables = Tables::default();
    let mut s = WorldBuilder::new(4, 4)
        .agent((0, 0))
        .build(
            &[Instruction { kind: InstructionKind::PickUpAll, object: ObjectTypeId(2) }],
            &tables,
        )
        .unwrap();
    let (_, done, _) = s.step(Action::NoOp).unwrap();
    assert!(done, "no targets on the grid means the all-variant is satisfied");
}

#[test]
fn subtask_status_oracle() {
    let tables = Tables::default();
    let egg = tables.id_of("egg").unwrap();
    let mut s = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .cell((2, 3), Cell::Object(egg))
        .cell((0, 0), Cell::Object(ObjectTypeId(1)))
        .build(&[visit(egg.0), pick_up(1)], &tables)
        .unwrap();
    assert!(!s.subtask_status(Goal { action: TaskAction::Transform, object: egg }));
    s.step(Action::Move(Dir::East)).unwrap();
    assert!(s.subtask_status(Goal { action: TaskAction::Visit, object: egg }));
    // Segment reset hides past events from the oracle.
    let pig = ObjectTypeId(1);
    let mut s2 = WorldBuilder::new(5, 5)
        .agent((2, 2))
        .cell((2, 3), Cell::Object(pig))
        .cell((2, 1), Cell::Object(pig))
        .build(&[pick_up(1), pick_up(1)], &tables)
        .unwrap();
    s2.step(Action::PickUp(Dir::East)).unwrap();
    assert!(s2.subtask_status(Goal { action: TaskAction::PickUp, object: pig }));
    s2.begin_subtask_segment();
    assert!(!s2.subtask_status(Goal { action: TaskAction::PickUp, object: pig }));
}

#[test]
fn observe_marks_agent_and_overlapping_masks() {
    let tables = Tables::default();
    let s = WorldBuilder::new(5, 5)
        .agent((0, 0))
        .build(&[visit(0)], &tables)
        .unwrap();
    let obs = s.observe();
    assert_eq!(obs.shape(), [18, 5, 5]);
    assert_eq!(obs.data[0], 1.0);
    assert_eq!(obs.data.iter().filter(|v| **v != 0.0).count(), 1);

    let s2 = WorldBuilder::new(5, 5)
        .agent((1, 1))
        .cell((1, 1), Cell::Water)
        .build(&[visit(0)], &tables)
        .unwrap();
    let obs2 = s2.observe();
    let idx = 1 * 5 + 1;
    assert_eq!(obs2.data[idx], 1.0, "agent channel");
    assert_eq!(obs2.data[2 * 25 + idx], 1.0, "water channel");
    assert_eq!(s2.observe(), obs2, "observe is pure");
}

#[test]
fn trajectories_replay_bit_identically() {
    let tables = Tables::default();
    let instructions = vec![visit(0), pick_up(1)];
    for seed in 0..20 {
        let config = WorldConfig {
            seed,
            enemy_spawn_prob: 0.1,
            ..WorldConfig::default()
        };
        let mut action_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "actions", 0));
        let actions: Vec<Action> = (0..80)
            .map(|_| Action::from_code(action_rng.gen_range(0..13)).unwrap())
            .collect();
        let run = |mut s: GridState| {
            let mut rewards = Vec::new();
            let mut observations = Vec::new();
            for a in &actions {
                if s.is_done() {
                    break;
                }
                let (r, _, _) = s.step(*a).unwrap();
                rewards.push(r);
                observations.push(s.observe());
            }
            (rewards, observations)
        };
        let (s1, _) = GridState::reset(&config, &instructions, &tables).unwrap();
        let (s2, _) = GridState::reset(&config, &instructions, &tables).unwrap();
        let (r1, o1) = run(s1);
        let (r2, o2) = run(s2);
        assert_eq!(r1, r2, "seed {seed}");
        assert_eq!(o1, o2, "seed {seed}");
    }
}

#[test]
fn completion_index_is_monotone_and_objects_conserved() {
    let tables = Tables::default();
    let instructions = vec![pick_up(0), visit(1), pick_up(2)];
    for seed in 0..20 {
        let config = WorldConfig {
            seed,
            enemy_spawn_prob: 0.2,
            ..WorldConfig::default()
        };
        let (mut s, _) = GridState::reset(&config, &instructions, &tables).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "acts", 1));
        let mut last_completed = 0;
        let mut last_total = s.total_objects();
        while !s.is_done() {
            let a = Action::from_code(rng.gen_range(0..13)).unwrap();
            let was_interaction = matches!(a, Action::PickUp(_) | Action::Transform(_));
            s.step(a).unwrap();
            assert!(s.completed() >= last_completed, "completion never decreases");
            assert!(s.completed() - last_completed <= instructions.len());
            last_completed = s.completed();
            let total = s.total_objects();
            assert!(total <= last_total, "objects never spawn");
            if total < last_total {
                assert!(was_interaction, "objects disappear only via interactions");
            }
            last_total = total;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn rewards_decompose_into_the_four_components(seed in 0u64..5000) {
        let tables = Tables::default();
        let config = WorldConfig {
            seed,
            height: 6,
            width: 6,
            enemy_spawn_prob: 0.2,
            enemy_lifetime: 5,
            episode_limit: 40,
            ..WorldConfig::default()
        };
        let instructions = vec![visit(0), pick_up(1)];
        let (mut s, _) = GridState::reset(&config, &instructions, &tables).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "proptest", 2));
        while !s.is_done() {
            let a = Action::from_code(rng.gen_range(0..13)).unwrap();
            let (r, _, _) = s.step(a).unwrap();
            let mut matched = false;
            for water in [0.0, -0.3] {
                for enemy in [0.0, 0.9] {
                    for success in [0.0, 1.0] {
                        if (r - (-0.1 + water + enemy + success)).abs() < 1e-12 {
                            matched = true;
                        }
                    }
                }
            }
            prop_assert!(matched, "reward {} is not a legal composition", r);
        }
    }
}
