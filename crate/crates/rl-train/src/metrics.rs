//! Line-delimited training metrics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::TrainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub term_accuracy: f64,
    /// Mean gate value; None for skill training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_update_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curriculum_tier: Option<usize>,
    /// Stage-specific scalar: mean per-step KL during distillation, mean
    /// episode loss otherwise.
    pub aux: f64,
}

pub fn write_metrics(metrics: &[IterationMetrics], out: &mut impl Write) -> Result<(), TrainError> {
    for m in metrics {
        let line = serde_json::to_string(m)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}
