//! Task parameters as one-hot factor pairs over a declared space.

use gridworld::{Goal, ObjectTypeId, TaskAction};
use serde::{Deserialize, Serialize};

use crate::TaskError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Independent,
    ObjectDependent,
}

impl Scenario {
    pub fn actions(self) -> Vec<TaskAction> {
        match self {
            Scenario::Independent => vec![TaskAction::Visit, TaskAction::PickUp, TaskAction::Transform],
            Scenario::ObjectDependent => vec![
                TaskAction::Visit,
                TaskAction::PickUp,
                TaskAction::Transform,
                TaskAction::InteractWith,
            ],
        }
    }
}

/// The factored space G = actions x objects. Indices into these lists are
/// the one-hot positions the networks consume.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpace {
    pub actions: Vec<TaskAction>,
    pub objects: Vec<ObjectTypeId>,
}

/// One subtask: indices into a [`TaskSpace`], each conceptually one-hot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskParams {
    pub action: usize,
    pub object: usize,
}

impl TaskSpace {
    pub fn new(scenario: Scenario, objects: Vec<ObjectTypeId>) -> Self {
        TaskSpace {
            actions: scenario.actions(),
            objects,
        }
    }

    pub fn action_arity(&self) -> usize {
        self.actions.len()
    }

    pub fn object_arity(&self) -> usize {
        self.objects.len()
    }

    pub fn len(&self) -> usize {
        self.actions.len() * self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_tasks(&self) -> Vec<TaskParams> {
        let mut out = Vec::with_capacity(self.len());
        for a in 0..self.actions.len() {
            for o in 0..self.objects.len() {
                out.push(TaskParams { action: a, object: o });
            }
        }
        out
    }

    pub fn validate(&self, tp: TaskParams) -> Result<(), TaskError> {
        if tp.action >= self.actions.len() || tp.object >= self.objects.len() {
            return Err(TaskError::BadIndex(format!(
                "task ({}, {}) outside {}x{} space",
                tp.action,
                tp.object,
                self.actions.len(),
                self.objects.len()
            )));
        }
        Ok(())
    }

    pub fn goal(&self, tp: TaskParams) -> Result<Goal, TaskError> {
        self.validate(tp)?;
        Ok(Goal {
            action: self.actions[tp.action],
            object: self.objects[tp.object],
        })
    }

    pub fn action_onehot(&self, tp: TaskParams) -> Vec<f64> {
        let mut v = vec![0.0; self.actions.len()];
        v[tp.action] = 1.0;
        v
    }

    pub fn object_onehot(&self, tp: TaskParams) -> Vec<f64> {
        let mut v = vec![0.0; self.objects.len()];
        v[tp.object] = 1.0;
        v
    }

    /// Recover task params from raw one-hot vectors, rejecting anything that
    /// is not exactly one-hot.
    pub fn from_onehots(&self, action: &[f64], object: &[f64]) -> Result<TaskParams, TaskError> {
        let decode = |v: &[f64], arity: usize, what: &str| -> Result<usize, TaskError> {
            if v.len() != arity {
                return Err(TaskError::NotOneHot(format!(
                    "{what} vector length {} != arity {arity}",
                    v.len()
                )));
            }
            let mut hot = None;
            for (i, &x) in v.iter().enumerate() {
                if x == 1.0 {
                    if hot.is_some() {
                        return Err(TaskError::NotOneHot(format!("{what} has multiple ones")));
                    }
                    hot = Some(i);
                } else if x != 0.0 {
                    return Err(TaskError::NotOneHot(format!(
                        "{what} entry {i} is {x}, not 0 or 1"
                    )));
                }
            }
            hot.ok_or_else(|| TaskError::NotOneHot(format!("{what} has no one")))
        };
        Ok(TaskParams {
            action: decode(action, self.actions.len(), "action")?,
            object: decode(object, self.objects.len(), "object")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn onehot_round_trip() {
        let space = TaskSpace::new(Scenario::Independent, vec![ObjectTypeId(0), ObjectTypeId(5)]);
        let tp = TaskParams { action: 2, object: 1 };
        let a = space.action_onehot(tp);
        let o = space.object_onehot(tp);
        assert_eq!(space.from_onehots(&a, &o).unwrap(), tp);
    }

    #[test]
    fn non_onehot_is_rejected() {
        let space = TaskSpace::new(Scenario::Independent, vec![ObjectTypeId(0), ObjectTypeId(1)]);
        assert!(space.from_onehots(&[0.5, 0.5, 0.0], &[1.0, 0.0]).is_err());
        assert!(space.from_onehots(&[1.0, 1.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(space.from_onehots(&[0.0, 0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn goals_map_through_the_space() {
        let space = TaskSpace::new(Scenario::ObjectDependent, vec![ObjectTypeId(3)]);
        let goal = space.goal(TaskParams { action: 3, object: 0 }).unwrap();
        assert_eq!(goal.action, TaskAction::InteractWith);
        assert_eq!(goal.object, ObjectTypeId(3));
        assert!(space.goal(TaskParams { action: 4, object: 0 }).is_err());
    }
}
