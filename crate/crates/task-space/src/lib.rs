//! The subtask parameter space: train/unseen splits, analogy quadruple
//! enumeration for the contrastive losses, instruction sampling, and
//! bag-of-words sentence encoding.

use thiserror::Error;

pub mod analogy;
pub mod sentence;
pub mod space;
pub mod split;

pub use analogy::{analogy_holds, enumerate_analogies, AnalogyBatch};
pub use sentence::{bow_counts, encode_ids, sample_instructions, EmbeddingMatrix, Sentence, Template, Vocabulary, TEMPLATES};
pub use space::{Scenario, TaskParams, TaskSpace};
pub use split::{build_split, load_split, save_split, split_from_toml, split_to_toml, Group, TaskSplit};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("invalid holdout fraction {0}; must be strictly between 0 and 0.5")]
    BadHoldout(f64),
    #[error("holdout is infeasible: {0}")]
    InfeasibleHoldout(String),
    #[error("task index out of range: {0}")]
    BadIndex(String),
    #[error("component is not one-hot: {0}")]
    NotOneHot(String),
    #[error("unknown word id {0}")]
    UnknownWord(usize),
    #[error("unknown word {0:?}")]
    UnknownWordName(String),
    #[error("instruction count must be >= 1")]
    EmptySample,
    #[error("analogy budget must be >= 1")]
    EmptyBudget,
    #[error("no valid instruction candidates under the given constraints")]
    NoCandidates,
    #[error("split file error: {0}")]
    SplitFile(String),
    #[error("grid error: {0}")]
    Grid(#[from] gridworld::GridError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
