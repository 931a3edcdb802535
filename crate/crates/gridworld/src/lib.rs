//! Deterministic, seedable 2D grid world: binary tensor observations, 13
//! primitive actions, object interactions, a wandering enemy, water and
//! time penalties, and ordered instruction completion.

use thiserror::Error;

pub mod config;
pub mod state;
pub mod tables;
pub mod trace;
pub mod types;

pub use config::{derive_seed, WorldConfig};
pub use state::{GridState, Observation, StepInfo, WorldBuilder, ENEMY_REWARD, SUCCESS_REWARD, TIME_PENALTY, WATER_PENALTY};
pub use tables::{transform_rule, Tables, TransformOutcome, TransformResult, TransformTarget, OBJECT_TYPE_COUNT};
pub use trace::{write_jsonl, StepLog};
pub use types::{Action, Cell, Dir, Enemy, Goal, Instruction, InstructionKind, ObjectTypeId, TaskAction, ACTION_COUNT, DIRS};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("episode is already done")]
    EpisodeDone,
    #[error("world generation failed after {attempts} attempts")]
    Generation { attempts: usize },
    #[error("instruction list is empty")]
    EmptyInstructions,
    #[error("unknown object id {0}")]
    UnknownObjectId(u8),
    #[error("unknown object name {0:?}")]
    UnknownObjectName(String),
    #[error("invalid action code {0}")]
    BadActionCode(u8),
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("table error: {0}")]
    Table(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
