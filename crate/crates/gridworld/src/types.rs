//! Core value types: object ids, actions, goals, instructions.

use serde::{Deserialize, Serialize};

use crate::GridError;

/// Index into the object table (0..15 with the default table).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectTypeId(pub u8);

impl ObjectTypeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Grid direction; rows grow southward, columns grow eastward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dir {
    North,
    South,
    West,
    East,
}

pub const DIRS: [Dir; 4] = [Dir::North, Dir::South, Dir::West, Dir::East];

impl Dir {
    pub fn delta(self) -> (isize, isize) {
        match self {
            Dir::North => (-1, 0),
            Dir::South => (1, 0),
            Dir::West => (0, -1),
            Dir::East => (0, 1),
        }
    }
}

/// The 13 primitive actions with stable wire codes 0..=12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    NoOp,
    Move(Dir),
    PickUp(Dir),
    Transform(Dir),
}

pub const ACTION_COUNT: usize = 13;

impl Action {
    pub fn code(self) -> u8 {
        match self {
            Action::NoOp => 0,
            Action::Move(d) => 1 + dir_offset(d),
            Action::PickUp(d) => 5 + dir_offset(d),
            Action::Transform(d) => 9 + dir_offset(d),
        }
    }

    pub fn from_code(code: u8) -> Result<Self, GridError> {
        Ok(match code {
            0 => Action::NoOp,
            1..=4 => Action::Move(dir_from_offset(code - 1)),
            5..=8 => Action::PickUp(dir_from_offset(code - 5)),
            9..=12 => Action::Transform(dir_from_offset(code - 9)),
            other => return Err(GridError::BadActionCode(other)),
        })
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..ACTION_COUNT as u8).map(|c| Action::from_code(c).expect("codes 0..=12 are valid"))
    }
}

fn dir_offset(d: Dir) -> u8 {
    match d {
        Dir::North => 0,
        Dir::South => 1,
        Dir::West => 2,
        Dir::East => 3,
    }
}

fn dir_from_offset(o: u8) -> Dir {
    match o {
        0 => Dir::North,
        1 => Dir::South,
        2 => Dir::West,
        _ => Dir::East,
    }
}

/// Subtask action type. `InteractWith` resolves to pick-up or transform
/// depending on the object's group in the object-dependent scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskAction {
    Visit,
    PickUp,
    Transform,
    InteractWith,
}

impl TaskAction {
    pub fn name(self) -> &'static str {
        match self {
            TaskAction::Visit => "visit",
            TaskAction::PickUp => "pick_up",
            TaskAction::Transform => "transform",
            TaskAction::InteractWith => "interact_with",
        }
    }
}

/// A single subtask: one action type applied to one object type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Goal {
    pub action: TaskAction,
    pub object: ObjectTypeId,
}

/// Instruction templates. The `All` variants require the targets to vanish
/// from the whole grid; the rest complete on a single event or visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstructionKind {
    Visit,
    PickUp,
    Transform,
    PickUpAll,
    TransformAll,
    InteractWith,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub kind: InstructionKind,
    pub object: ObjectTypeId,
}

impl Instruction {
    /// The subtask a skill would run to make progress on this instruction.
    pub fn goal(&self) -> Goal {
        let action = match self.kind {
            InstructionKind::Visit => TaskAction::Visit,
            InstructionKind::PickUp | InstructionKind::PickUpAll => TaskAction::PickUp,
            InstructionKind::Transform | InstructionKind::TransformAll => TaskAction::Transform,
            InstructionKind::InteractWith => TaskAction::InteractWith,
        };
        Goal {
            action,
            object: self.object,
        }
    }

    /// Whether this instruction consumes an object of its target type.
    pub fn consumes(&self) -> bool {
        !matches!(self.kind, InstructionKind::Visit)
    }
}

/// Cell contents; at most one of these per cell, with agent and enemy as
/// separate overlays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Empty,
    Block,
    Water,
    Object(ObjectTypeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Enemy {
    pub pos: (usize, usize),
    pub lifetime: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_codes_round_trip_and_cover_0_to_12() {
        let mut seen = [false; ACTION_COUNT];
        for a in Action::all() {
            let c = a.code();
            assert_eq!(Action::from_code(c).unwrap(), a);
            seen[c as usize] = true;
        }
        assert!(seen.iter().all(|s| *s));
        assert!(Action::from_code(13).is_err());
    }

    #[test]
    fn instruction_goals_map_to_base_actions() {
        let i = Instruction {
            kind: InstructionKind::TransformAll,
            object: ObjectTypeId(3),
        };
        assert_eq!(i.goal().action, TaskAction::Transform);
        assert!(i.consumes());
    }
}
