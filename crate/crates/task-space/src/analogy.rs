//! Analogy quadruples over train tasks for the contrastive objectives.

use gridworld::TaskAction;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::space::TaskParams;
use crate::split::{Group, TaskSplit};
use crate::TaskError;

/// Quadruples that satisfy / violate the analogy relation plus distinct
/// pairs for the non-collapse term.
#[derive(Debug, Clone, Default)]
pub struct AnalogyBatch {
    pub sim: Vec<[TaskParams; 4]>,
    pub dis: Vec<[TaskParams; 4]>,
    pub diff: Vec<[TaskParams; 2]>,
}

/// Effective action token: interact-with splits into one token per object
/// group, since it means pick-up for one group and transform for the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EffectiveAction {
    Plain(TaskAction),
    InteractGroup(Group),
}

fn effective_action(split: &TaskSplit, tp: TaskParams) -> EffectiveAction {
    let action = split.space.actions[tp.action];
    match (action, split.group_of(tp.object)) {
        (TaskAction::InteractWith, Some(g)) => EffectiveAction::InteractGroup(g),
        _ => EffectiveAction::Plain(action),
    }
}

/// Whether a:b :: c:d holds in the scenario's semantics: both the action
/// difference and the object difference must match across the two pairs,
/// either by being zero on both sides or by pairing the same tokens.
pub fn analogy_holds(split: &TaskSplit, quad: &[TaskParams; 4]) -> bool {
    let [a, b, c, d] = quad;
    let (ea, eb, ec, ed) = (
        effective_action(split, *a),
        effective_action(split, *b),
        effective_action(split, *c),
        effective_action(split, *d),
    );
    let actions_match = (ea == eb && ec == ed) || (ea == ec && eb == ed);
    let objects_match = (a.object == b.object && c.object == d.object)
        || (a.object == c.object && b.object == d.object);
    actions_match && objects_match
}

/// Sample `budget` quadruples per bucket over the train tasks. Quadruples
/// keep A != B and C != D so the hinge terms act on genuine differences.
pub fn enumerate_analogies(
    split: &TaskSplit,
    budget: usize,
    seed: u64,
) -> Result<AnalogyBatch, TaskError> {
    if budget == 0 {
        return Err(TaskError::EmptyBudget);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = &split.train;
    let mut batch = AnalogyBatch::default();
    if train.len() < 2 {
        return Ok(batch);
    }

    let pick = |rng: &mut ChaCha8Rng| train[rng.gen_range(0..train.len())];
    let attempts = budget * 200;

    for _ in 0..attempts {
        if batch.sim.len() >= budget && batch.dis.len() >= budget {
            break;
        }
        let quad = [pick(&mut rng), pick(&mut rng), pick(&mut rng), pick(&mut rng)];
        if quad[0] == quad[1] || quad[2] == quad[3] {
            continue;
        }
        if analogy_holds(split, &quad) {
            if batch.sim.len() < budget {
                batch.sim.push(quad);
            }
        } else if batch.dis.len() < budget {
            batch.dis.push(quad);
        }
    }

    for _ in 0..attempts {
        if batch.diff.len() >= budget {
            break;
        }
        let a = pick(&mut rng);
        let b = pick(&mut rng);
        if a != b {
            batch.diff.push([a, b]);
        }
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::split::build_split;
    use crate::Scenario;
    use gridworld::ObjectTypeId;

    fn independent_split() -> TaskSplit {
        build_split(
            Scenario::Independent,
            (0..6).map(ObjectTypeId).collect(),
            0.2,
            11,
        )
        .unwrap()
    }

    #[test]
    fn parallel_action_pairs_hold() {
        let split = independent_split();
        // [visit, x] : [visit, y] :: [pick_up, x] : [pick_up, y]
        let quad = [
            TaskParams { action: 0, object: 0 },
            TaskParams { action: 0, object: 1 },
            TaskParams { action: 1, object: 0 },
            TaskParams { action: 1, object: 1 },
        ];
        assert!(analogy_holds(&split, &quad));
    }

    #[test]
    fn mismatched_pairs_violate() {
        let split = independent_split();
        // [visit, x] : [visit, y] vs [transform, x] : [pick_up, y]
        let quad = [
            TaskParams { action: 0, object: 0 },
            TaskParams { action: 0, object: 1 },
            TaskParams { action: 2, object: 0 },
            TaskParams { action: 1, object: 1 },
        ];
        assert!(!analogy_holds(&split, &quad));
    }

    #[test]
    fn object_dependent_groups_gate_interact_analogies() {
        let split = build_split(
            Scenario::ObjectDependent,
            (0..6).map(ObjectTypeId).collect(),
            0.25,
            5,
        )
        .unwrap();
        let groups = split.groups.clone().unwrap();
        let a_objs: Vec<usize> = (0..6).filter(|&i| groups[i] == Group::A).collect();
        let b_objs: Vec<usize> = (0..6).filter(|&i| groups[i] == Group::B).collect();
        let interact = 3;
        // Same group: visit analogy transfers to interact-with.
        let same = [
            TaskParams { action: 0, object: a_objs[0] },
            TaskParams { action: 0, object: a_objs[1] },
            TaskParams { action: interact, object: a_objs[0] },
            TaskParams { action: interact, object: a_objs[1] },
        ];
        assert!(analogy_holds(&split, &same));
        // Cross group: the same shape must not hold.
        let cross = [
            TaskParams { action: 0, object: a_objs[0] },
            TaskParams { action: 0, object: b_objs[0] },
            TaskParams { action: interact, object: a_objs[0] },
            TaskParams { action: interact, object: b_objs[0] },
        ];
        assert!(!analogy_holds(&split, &cross));
    }

    #[test]
    fn batches_are_seeded_and_respect_the_relation() {
        let split = independent_split();
        let a = enumerate_analogies(&split, 32, 9).unwrap();
        let b = enumerate_analogies(&split, 32, 9).unwrap();
        assert_eq!(a.sim, b.sim);
        assert_eq!(a.dis, b.dis);
        assert_eq!(a.diff, b.diff);
        assert_eq!(a.sim.len(), 32);
        assert_eq!(a.dis.len(), 32);
        for quad in &a.sim {
            assert!(analogy_holds(&split, quad));
            for tp in quad {
                assert!(split.is_train(*tp), "sim quadruples stay in train");
            }
        }
        for quad in &a.dis {
            assert!(!analogy_holds(&split, quad));
        }
        for pair in &a.diff {
            assert_ne!(pair[0], pair[1]);
        }
    }

    #[test]
    fn zero_budget_is_rejected() {
        let split = independent_split();
        assert!(enumerate_analogies(&split, 0, 1).is_err());
    }
}
