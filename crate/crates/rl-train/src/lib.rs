//! Training engine: GAE, parallel rollouts, distillation and actor-critic
//! loops for the skill, soft/hard meta training, curriculum control, and
//! checkpoint archives.

use thiserror::Error;

pub mod checkpoint;
pub mod curriculum;
pub mod gae;
pub mod meta_train;
pub mod metrics;
pub mod rollout;
pub mod skill_train;
pub mod trace;

pub use checkpoint::{
    load_meta_checkpoint, load_skill_checkpoint, param_hash, restore_optimizer,
    save_meta_checkpoint, save_skill_checkpoint, LoadedMeta, LoadedSkill, MetaManifest,
    SkillManifest, MANIFEST_ENTRY,
};
pub use curriculum::{curriculum_adjust, default_tiers, CurriculumState, CurriculumTier};
pub use gae::{compute_gae, gae_returns};
pub use meta_train::{train_meta, GateMode, MetaHyper, MetaStage, MetaTrainConfig};
pub use metrics::{write_metrics, IterationMetrics};
pub use rollout::{rollout_batch, run_episode, Agent, AgentFactory, EpisodePlanner, FixedPlan};
pub use skill_train::{
    goal_instruction, train_skill, SkillHyper, SkillStage, SkillTrainConfig, TeacherPolicy,
};
pub use trace::{EpisodeTrace, TraceStep};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{what}: lengths differ ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("bad hyperparameter: {0}")]
    BadHyper(String),
    #[error("distillation requires a teacher policy")]
    MissingTeacher,
    #[error("worker failure: {0}")]
    WorkerFailure(String),
    #[error("training diverged at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Grid(#[from] gridworld::GridError),
    #[error(transparent)]
    Task(#[from] task_space::TaskError),
    #[error(transparent)]
    Skill(#[from] skill_net::SkillError),
    #[error(transparent)]
    Meta(#[from] meta_controller::MetaError),
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
    #[error(transparent)]
    Archive(#[from] tensor_core::ArchiveError),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl TrainError {
    /// Non-finite numerics anywhere in an iteration are a divergence; the
    /// caller still holds the last finite parameters.
    pub fn into_divergence(self, iteration: usize) -> TrainError {
        let non_finite = matches!(
            &self,
            TrainError::Tensor(tensor_core::TensorError::NonFinite { .. })
                | TrainError::Skill(skill_net::SkillError::Tensor(
                    tensor_core::TensorError::NonFinite { .. }
                ))
                | TrainError::Meta(meta_controller::MetaError::Tensor(
                    tensor_core::TensorError::NonFinite { .. }
                ))
        );
        if non_finite {
            TrainError::Divergence {
                iteration,
                detail: self.to_string(),
            }
        } else {
            self
        }
    }
}
