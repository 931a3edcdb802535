//! Train/unseen task splits for the two generalization scenarios.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gridworld::{ObjectTypeId, Tables, TaskAction};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::space::{Scenario, TaskParams, TaskSpace};
use crate::TaskError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
}

/// A train/unseen partition of the task space. In the object-dependent
/// scenario whole objects are held out of the interact-with column and each
/// object carries a group that decides what interacting means.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplit {
    pub scenario: Scenario,
    pub space: TaskSpace,
    pub train: Vec<TaskParams>,
    pub unseen: Vec<TaskParams>,
    /// Group per object index, object-dependent scenario only.
    pub groups: Option<Vec<Group>>,
}

impl TaskSplit {
    pub fn is_train(&self, tp: TaskParams) -> bool {
        self.train.contains(&tp)
    }

    pub fn group_of(&self, object_index: usize) -> Option<Group> {
        self.groups.as_ref().map(|g| g[object_index])
    }

    /// Group map keyed by object type, for scripted teachers that need to
    /// resolve interact-with.
    pub fn group_by_type(&self) -> Option<BTreeMap<ObjectTypeId, Group>> {
        self.groups.as_ref().map(|groups| {
            self.space
                .objects
                .iter()
                .zip(groups)
                .map(|(o, g)| (*o, *g))
                .collect()
        })
    }
}

/// Deterministically carve a holdout out of the task space.
///
/// Independent: random cells are held out subject to every action and every
/// object keeping at least one train task. Object-dependent: whole objects
/// are held out of the interact-with column, at least one per group, while
/// the visit/pick-up/transform columns stay fully trained.
pub fn build_split(
    scenario: Scenario,
    objects: Vec<ObjectTypeId>,
    holdout_fraction: f64,
    seed: u64,
) -> Result<TaskSplit, TaskError> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 0.5) {
        return Err(TaskError::BadHoldout(holdout_fraction));
    }
    let space = TaskSpace::new(scenario, objects);
    if space.object_arity() < 2 {
        return Err(TaskError::InfeasibleHoldout(
            "need at least two objects".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    match scenario {
        Scenario::Independent => {
            let quota = ((space.len() as f64) * holdout_fraction).round() as usize;
            if quota == 0 {
                return Err(TaskError::InfeasibleHoldout(format!(
                    "fraction {holdout_fraction} rounds to zero held-out tasks"
                )));
            }
            let mut cells = space.all_tasks();
            cells.shuffle(&mut rng);
            let mut action_train = vec![space.object_arity(); space.action_arity()];
            let mut object_train = vec![space.action_arity(); space.object_arity()];
            let mut unseen = Vec::with_capacity(quota);
            for tp in cells {
                if unseen.len() == quota {
                    break;
                }
                if action_train[tp.action] > 1 && object_train[tp.object] > 1 {
                    action_train[tp.action] -= 1;
                    object_train[tp.object] -= 1;
                    unseen.push(tp);
                }
            }
            if unseen.len() < quota {
                return Err(TaskError::InfeasibleHoldout(format!(
                    "could only hold out {} of {} tasks with full coverage",
                    unseen.len(),
                    quota
                )));
            }
            unseen.sort();
            let train: Vec<TaskParams> = space
                .all_tasks()
                .into_iter()
                .filter(|tp| !unseen.contains(tp))
                .collect();
            Ok(TaskSplit {
                scenario,
                space,
                train,
                unseen,
                groups: None,
            })
        }
        Scenario::ObjectDependent => {
            let n_obj = space.object_arity();
            let mut order: Vec<usize> = (0..n_obj).collect();
            order.shuffle(&mut rng);
            let mut groups = vec![Group::A; n_obj];
            for (rank, &obj) in order.iter().enumerate() {
                groups[obj] = if rank % 2 == 0 { Group::A } else { Group::B };
            }
            let by_group = |g: Group| -> Vec<usize> {
                (0..n_obj).filter(|&i| groups[i] == g).collect()
            };
            let interact = space
                .actions
                .iter()
                .position(|a| *a == TaskAction::InteractWith)
                .expect("object-dependent spaces include interact-with");

            let mut held = Vec::new();
            for g in [Group::A, Group::B] {
                let members = by_group(g);
                if members.len() < 2 {
                    return Err(TaskError::InfeasibleHoldout(format!(
                        "group {g:?} has {} object(s); need at least 2",
                        members.len()
                    )));
                }
                let quota = ((members.len() as f64) * holdout_fraction)
                    .round()
                    .max(1.0) as usize;
                let quota = quota.min(members.len() - 1);
                // Deterministic choice within the already shuffled order.
                let mut chosen: Vec<usize> = order
                    .iter()
                    .filter(|i| members.contains(i))
                    .take(quota)
                    .copied()
                    .collect();
                held.append(&mut chosen);
            }

            let unseen: Vec<TaskParams> = held
                .iter()
                .map(|&obj| TaskParams {
                    action: interact,
                    object: obj,
                })
                .collect();
            let mut unseen = unseen;
            unseen.sort();
            let train: Vec<TaskParams> = space
                .all_tasks()
                .into_iter()
                .filter(|tp| !unseen.contains(tp))
                .collect();
            Ok(TaskSplit {
                scenario,
                space,
                train,
                unseen,
                groups: Some(groups),
            })
        }
    }
}

// ---- split file I/O ----

#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    scenario: Scenario,
    objects: Vec<String>,
    train: Vec<(String, String)>,
    unseen: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    groups: BTreeMap<String, String>,
}

fn action_from_name(name: &str) -> Result<TaskAction, TaskError> {
    Ok(match name {
        "visit" => TaskAction::Visit,
        "pick_up" => TaskAction::PickUp,
        "transform" => TaskAction::Transform,
        "interact_with" => TaskAction::InteractWith,
        other => return Err(TaskError::SplitFile(format!("unknown action {other:?}"))),
    })
}

pub fn split_to_toml(split: &TaskSplit, tables: &Tables) -> Result<String, TaskError> {
    let name = |tp: &TaskParams| -> Result<(String, String), TaskError> {
        Ok((
            split.space.actions[tp.action].name().to_string(),
            tables.name_of(split.space.objects[tp.object])?.to_string(),
        ))
    };
    let file = SplitFile {
        scenario: split.scenario,
        objects: split
            .space
            .objects
            .iter()
            .map(|o| tables.name_of(*o).map(str::to_string))
            .collect::<Result<_, _>>()?,
        train: split.train.iter().map(&name).collect::<Result<_, _>>()?,
        unseen: split.unseen.iter().map(&name).collect::<Result<_, _>>()?,
        groups: match &split.groups {
            None => BTreeMap::new(),
            Some(groups) => split
                .space
                .objects
                .iter()
                .zip(groups)
                .map(|(o, g)| {
                    Ok((
                        tables.name_of(*o)?.to_string(),
                        format!("{g:?}"),
                    ))
                })
                .collect::<Result<_, TaskError>>()?,
        },
    };
    toml::to_string_pretty(&file).map_err(|e| TaskError::SplitFile(e.to_string()))
}

pub fn split_from_toml(text: &str, tables: &Tables) -> Result<TaskSplit, TaskError> {
    let file: SplitFile = toml::from_str(text).map_err(|e| TaskError::SplitFile(e.to_string()))?;
    let objects: Vec<ObjectTypeId> = file
        .objects
        .iter()
        .map(|n| tables.id_of(n).map_err(TaskError::from))
        .collect::<Result<_, _>>()?;
    let space = TaskSpace::new(file.scenario, objects.clone());
    let parse = |pairs: &[(String, String)]| -> Result<Vec<TaskParams>, TaskError> {
        pairs
            .iter()
            .map(|(a, o)| {
                let action = action_from_name(a)?;
                let object = tables.id_of(o)?;
                let ai = space
                    .actions
                    .iter()
                    .position(|x| *x == action)
                    .ok_or_else(|| TaskError::SplitFile(format!("action {a:?} not in scenario")))?;
                let oi = objects
                    .iter()
                    .position(|x| *x == object)
                    .ok_or_else(|| TaskError::SplitFile(format!("object {o:?} not in split")))?;
                Ok(TaskParams { action: ai, object: oi })
            })
            .collect()
    };
    let groups = if file.groups.is_empty() {
        None
    } else {
        let mut groups = vec![Group::A; objects.len()];
        for (name, g) in &file.groups {
            let id = tables.id_of(name)?;
            let idx = objects
                .iter()
                .position(|x| *x == id)
                .ok_or_else(|| TaskError::SplitFile(format!("group object {name:?} not in split")))?;
            groups[idx] = match g.as_str() {
                "A" => Group::A,
                "B" => Group::B,
                other => return Err(TaskError::SplitFile(format!("unknown group {other:?}"))),
            };
        }
        Some(groups)
    };
    let train = parse(&file.train)?;
    let unseen = parse(&file.unseen)?;
    Ok(TaskSplit {
        scenario: file.scenario,
        space,
        train,
        unseen,
        groups,
    })
}

pub fn save_split(split: &TaskSplit, tables: &Tables, path: &Path) -> Result<(), TaskError> {
    fs::write(path, split_to_toml(split, tables)?)?;
    Ok(())
}

pub fn load_split(path: &Path, tables: &Tables) -> Result<TaskSplit, TaskError> {
    split_from_toml(&fs::read_to_string(path)?, tables)
}
