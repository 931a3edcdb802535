use gridworld::{ObjectTypeId, Tables, TaskAction};
use proptest::prelude::*;
use task_space::{
    build_split, encode_ids, sample_instructions, split_from_toml, split_to_toml, EmbeddingMatrix,
    Scenario, Sentence, Template, Vocabulary,
};

fn objects(n: u8) -> Vec<ObjectTypeId> {
    (0..n).map(ObjectTypeId).collect()
}

#[test]
fn independent_split_covers_rows_and_columns() {
    // Brute-force coverage check over the emitted split.
    let split = build_split(Scenario::Independent, objects(15), 0.2, 3).unwrap();
    assert_eq!(split.unseen.len(), 9, "45 cells * 0.2 rounds to 9");
    assert_eq!(split.train.len() + split.unseen.len(), 45);
    for a in 0..split.space.action_arity() {
        assert!(
            split.train.iter().any(|tp| tp.action == a),
            "action {a} lost all train tasks"
        );
    }
    for o in 0..split.space.object_arity() {
        assert!(
            split.train.iter().any(|tp| tp.object == o),
            "object {o} lost all train tasks"
        );
    }
    for tp in &split.unseen {
        assert!(!split.train.contains(tp), "train and unseen overlap");
    }
}

#[test]
fn zero_holdout_is_rejected() {
    assert!(build_split(Scenario::Independent, objects(5), 0.0, 1).is_err());
    assert!(build_split(Scenario::Independent, objects(5), 0.5, 1).is_err());
}

#[test]
fn splits_are_deterministic() {
    let a = build_split(Scenario::Independent, objects(8), 0.2, 42).unwrap();
    let b = build_split(Scenario::Independent, objects(8), 0.2, 42).unwrap();
    assert_eq!(a, b);
    let c = build_split(Scenario::Independent, objects(8), 0.2, 43).unwrap();
    assert_ne!(a.unseen, c.unseen);
}

#[test]
fn object_dependent_split_holds_out_interact_objects() {
    let split = build_split(Scenario::ObjectDependent, objects(6), 0.3, 7).unwrap();
    let interact = split
        .space
        .actions
        .iter()
        .position(|a| *a == TaskAction::InteractWith)
        .unwrap();
    assert!(!split.unseen.is_empty());
    for tp in &split.unseen {
        assert_eq!(tp.action, interact, "only interact-with tasks are held out");
    }
    // Both groups keep at least one trained interact task.
    let groups = split.groups.clone().unwrap();
    for g in [task_space::Group::A, task_space::Group::B] {
        assert!(
            split
                .train
                .iter()
                .any(|tp| tp.action == interact && groups[tp.object] == g),
            "group {g:?} lost every interact-with train task"
        );
    }
    // Visit/pick-up/transform stay fully trained.
    for tp in split.space.all_tasks() {
        if tp.action != interact {
            assert!(split.is_train(tp));
        }
    }
}

#[test]
fn split_toml_round_trips() {
    let tables = Tables::default();
    let split = build_split(Scenario::ObjectDependent, objects(6), 0.3, 7).unwrap();
    let text = split_to_toml(&split, &tables).unwrap();
    let back = split_from_toml(&text, &tables).unwrap();
    assert_eq!(split, back);
}

#[test]
fn instruction_samples_stay_in_train_when_seen() {
    let split = build_split(Scenario::Independent, objects(6), 0.2, 1).unwrap();
    for seed in 0..50 {
        let sentences = sample_instructions(4, &split, false, seed).unwrap();
        assert_eq!(sentences.len(), 4);
        for s in &sentences {
            let action = split
                .space
                .actions
                .iter()
                .position(|a| *a == s.template.task_action())
                .unwrap();
            let object = split
                .space
                .objects
                .iter()
                .position(|o| *o == s.object)
                .unwrap();
            assert!(split.is_train(task_space::TaskParams { action, object }));
        }
    }
}

#[test]
fn unseen_sampling_emits_heldout_sentences() {
    let split = build_split(Scenario::Independent, objects(6), 0.2, 1).unwrap();
    let mut saw_unseen_lists = 0;
    for seed in 0..100 {
        let sentences = sample_instructions(20, &split, true, seed).unwrap();
        let has_unseen = sentences.iter().any(|s| {
            let action = split
                .space
                .actions
                .iter()
                .position(|a| *a == s.template.task_action())
                .unwrap();
            let object = split
                .space
                .objects
                .iter()
                .position(|o| *o == s.object)
                .unwrap();
            split.unseen.contains(&task_space::TaskParams { action, object })
        });
        if has_unseen {
            saw_unseen_lists += 1;
        }
    }
    assert_eq!(saw_unseen_lists, 100, "every unseen-mode list carries a held-out subtask");
}

#[test]
fn all_templates_never_precede_reuse_of_their_object() {
    let split = build_split(Scenario::Independent, objects(4), 0.2, 2).unwrap();
    for seed in 0..100 {
        let sentences = sample_instructions(8, &split, false, seed).unwrap();
        let mut cleared = std::collections::HashSet::new();
        for s in &sentences {
            assert!(!cleared.contains(&s.object), "seed {seed}: target after its `all`");
            if s.template.is_all() {
                cleared.insert(s.object);
            }
        }
    }
}

#[test]
fn zero_instructions_is_an_error() {
    let split = build_split(Scenario::Independent, objects(4), 0.2, 2).unwrap();
    assert!(sample_instructions(0, &split, false, 0).is_err());
}

#[test]
fn bow_encoding_matches_hand_sum() {
    let tables = Tables::default();
    let vocab = Vocabulary::from_tables(&tables);
    let e = 4;
    let v = vocab.len();
    let data: Vec<f64> = (0..e * v).map(|i| (i % 7) as f64 * 0.25 - 0.5).collect();
    let emb = EmbeddingMatrix { embed_dim: e, vocab_size: v, data: &data };
    let pig = tables.id_of("pig").unwrap();
    let s = Sentence { template: Template::PickUp, object: pig };
    let ids = s.word_ids(&vocab, &tables).unwrap();
    let enc = encode_ids(&ids, &emb).unwrap();
    let mut expect = vec![0.0; e];
    for &id in &ids {
        for i in 0..e {
            expect[i] += data[i * v + id];
        }
    }
    assert_eq!(enc, expect);
    // "pick up all pig" - "pick up pig" = embedding("all")
    let s_all = Sentence { template: Template::PickUpAll, object: pig };
    let enc_all = encode_ids(&s_all.word_ids(&vocab, &tables).unwrap(), &emb).unwrap();
    let all_id = vocab.id("all").unwrap();
    for i in 0..e {
        let diff = enc_all[i] - enc[i];
        assert!((diff - data[i * v + all_id]).abs() < 1e-12);
    }
}

#[test]
fn unknown_word_id_is_an_error() {
    let emb_data = vec![0.0; 8];
    let emb = EmbeddingMatrix { embed_dim: 2, vocab_size: 4, data: &emb_data };
    assert!(encode_ids(&[0, 9], &emb).is_err());
}

#[test]
fn zero_embeddings_encode_to_zero() {
    let emb_data = vec![0.0; 12];
    let emb = EmbeddingMatrix { embed_dim: 3, vocab_size: 4, data: &emb_data };
    assert_eq!(encode_ids(&[0, 1, 2], &emb).unwrap(), vec![0.0; 3]);
}

proptest! {
    #[test]
    fn bow_is_permutation_invariant(perm_seed in 0u64..1000) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let tables = Tables::default();
        let vocab = Vocabulary::from_tables(&tables);
        let e = 3;
        let v = vocab.len();
        let data: Vec<f64> = (0..e * v).map(|i| ((i * 31 % 13) as f64) * 0.1 - 0.6).collect();
        let emb = EmbeddingMatrix { embed_dim: e, vocab_size: v, data: &data };
        let ids = vec![0, 1, 2, 5, 5, 9];
        let mut shuffled = ids.clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
        shuffled.shuffle(&mut rng);
        prop_assert_eq!(encode_ids(&ids, &emb).unwrap(), encode_ids(&shuffled, &emb).unwrap());
    }
}
