//! Scripted oracle policies, the ablation baselines, and the evaluation
//! harness with paired-seed episode grids.

use thiserror::Error;

pub mod baselines;
pub mod evaluate;
pub mod scripted;
pub mod skill_eval;

pub use baselines::{
    make_baseline, sentence_from_instruction, BaselineKind, MetaAgent, NearOptimalAgent,
    ShortestPathAgent, SkillAgent,
};
pub use evaluate::{evaluate, EvalCell, EvalReport};
pub use scripted::{
    bfs_distance_to_cell, near_optimal_policy, plan_goal_step, shortest_path_policy,
    ScriptedTeacher,
};
pub use skill_eval::{evaluate_skill, SkillEvalReport};

pub const DEFAULT_ENGAGE_RADIUS: u32 = 2;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("hierarchical baselines require a skill checkpoint")]
    MissingSkill,
    #[error("flat baselines require a primitive action head")]
    WrongHead,
    #[error("bad evaluation setup: {0}")]
    BadSetup(String),
    #[error(transparent)]
    Task(#[from] task_space::TaskError),
    #[error(transparent)]
    Grid(#[from] gridworld::GridError),
    #[error(transparent)]
    Train(#[from] rl_train::TrainError),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
