//! Parameterized skill: policy pi(a | x, g), termination beta(b | x, g),
//! and a value head, conditioned on the task through a predicted conv
//! kernel and a factored LSTM, trained under distillation or actor-critic
//! with the analogy-making regularizer.

use thiserror::Error;

pub mod losses;
pub mod net;

pub use losses::{
    analogy_loss, binary_cross_entropy, distillation_loss, skill_ac_loss, AcStep, AcWeights,
    AnalogyTerms, EmbedFn, PROB_FLOOR,
};
pub use net::{obs_to_canvas, SkillConfig, SkillNet, SkillState, SkillStepOutput};

#[derive(Debug, Error)]
pub enum SkillError {
    #[error("task indices ({action}, {object}) outside the network's arities")]
    BadTask { action: usize, object: usize },
    #[error("observation {channels}x{height}x{width} incompatible with canvas {canvas}")]
    BadObservation {
        channels: usize,
        height: usize,
        width: usize,
        canvas: usize,
    },
    #[error("analogy margins must be positive (tau_dis={tau_dis}, tau_diff={tau_diff})")]
    BadMargin { tau_dis: f64, tau_diff: f64 },
    #[error("{name} must be non-negative, got {value}")]
    BadWeight { name: &'static str, value: f64 },
    #[error("{what}: lengths differ ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
}
