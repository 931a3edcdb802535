//! Instruction-executing meta controller: context encoder, instruction
//! memory with pointer shifts, factored subtask policy, learned update
//! gate with soft and hard rules, and the hierarchical (low/high) context
//! split.

use thiserror::Error;

pub mod loss;
pub mod memory;
pub mod net;
pub mod step;

pub use loss::{meta_loss, MetaLossWeights, MetaTraceStep};
pub use memory::{build_memory, retrieve, shift_pointer, shift_pointer_graph, InstructionMemory};
pub use net::{HeadKind, MetaConfig, MetaNet};
pub use step::{meta_step, MetaRecurrent, MetaStepResult, StepDiagnostics, StepMode, StepOverrides};

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("instruction list is empty")]
    EmptyInstructions,
    #[error("{got} instructions exceed the configured maximum {max}")]
    TooManyInstructions { got: usize, max: usize },
    #[error("pointer length {pointer} does not match memory size {memory}")]
    PointerLength { pointer: usize, memory: usize },
    #[error("shift vector must have 3 entries, got {0}")]
    ShiftArity(usize),
    #[error("task indices ({action}, {object}) outside the network's arities")]
    BadTask { action: usize, object: usize },
    #[error("hard-mode gate must be 0 or 1, got {0}")]
    BadHardGate(f64),
    #[error("hard copy step before any subtask was chosen")]
    CopyWithoutSubtask,
    #[error("{mode} trace mismatch: {what}")]
    TraceMismatch { mode: &'static str, what: &'static str },
    #[error("{what}: lengths differ ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error(transparent)]
    Task(#[from] task_space::TaskError),
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
}
