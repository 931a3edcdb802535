//! Meta-controller training objectives for the two update modes.

use skill_net::{AnalogyTerms, PROB_FLOOR};
use tensor_core::{Graph, Tensor};
use task_space::TaskParams;

use crate::step::{MetaStepResult, StepMode};
use crate::MetaError;

/// Per-step record consumed by [`meta_loss`]; extracted from a
/// [`MetaStepResult`] plus what the sampler knew at the time.
pub struct MetaTraceStep {
    pub update_prob: Tensor,
    pub c_tensor: Tensor,
    pub c: f64,
    pub forced_c: bool,
    pub action_dist: Option<Tensor>,
    pub object_dist: Option<Tensor>,
    pub shift_dist: Option<Tensor>,
    pub shift_sample: Option<usize>,
    pub g: TaskParams,
    pub g_prev: Option<TaskParams>,
    pub value: Tensor,
}

impl MetaTraceStep {
    pub fn from_result(result: &MetaStepResult, g_prev: Option<TaskParams>) -> Self {
        MetaTraceStep {
            update_prob: result.update_prob.clone(),
            c_tensor: result.c_tensor.clone(),
            c: result.diag.c,
            forced_c: result.diag.forced_c,
            action_dist: result.action_dist.clone(),
            object_dist: result.object_dist.clone(),
            shift_dist: result.shift_dist.clone(),
            shift_sample: result.diag.shift_sample,
            g: result.g,
            g_prev,
            value: result.value.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MetaLossWeights {
    /// L1 penalty on the update probability (hard mode only).
    pub eta: f64,
    pub value_weight: f64,
    pub entropy_weight: f64,
    pub xi: f64,
    pub rho_dis: f64,
    pub rho_diff: f64,
}

impl Default for MetaLossWeights {
    fn default() -> Self {
        MetaLossWeights {
            eta: 0.001,
            value_weight: 0.5,
            entropy_weight: 0.0,
            xi: 1.0,
            rho_dis: 1.0,
            rho_diff: 1.0,
        }
    }
}

fn log_selected(g: &mut Graph, dist: &Tensor, index: usize) -> Result<Tensor, MetaError> {
    let clamped = g.clamp_min(dist, PROB_FLOOR)?;
    let logs = g.log(&clamped)?;
    Ok(g.select(&logs, index)?)
}

fn entropy_penalty(g: &mut Graph, dist: &Tensor, weight: f64) -> Result<Tensor, MetaError> {
    let clamped = g.clamp_min(dist, PROB_FLOOR)?;
    let logs = g.log(&clamped)?;
    let terms = g.mul(dist, &logs)?;
    let neg_entropy = g.sum_all(&terms)?;
    Ok(g.scale(&neg_entropy, weight)?)
}

/// Episode loss for the meta controller.
///
/// Hard: gated REINFORCE on the goal factors and the shift, REINFORCE on
/// the gate itself, the eta L1 update penalty, value regression, analogy.
/// Soft: log of the mixture probability of each sampled factor, value
/// regression, analogy. The mixture keeps the whole term differentiable
/// through c.
#[allow(clippy::too_many_arguments)]
pub fn meta_loss(
    g: &mut Graph,
    mode: StepMode,
    steps: &[MetaTraceStep],
    advantages: &[f64],
    returns: &[f64],
    analogy: Option<&AnalogyTerms>,
    w: &MetaLossWeights,
) -> Result<Tensor, MetaError> {
    if steps.len() != advantages.len() || steps.len() != returns.len() {
        return Err(MetaError::LengthMismatch {
            what: "steps vs advantages/returns",
            left: steps.len(),
            right: advantages.len().min(returns.len()),
        });
    }
    let mut loss = Tensor::scalar(0.0).expect("zero is finite");

    for (i, step) in steps.iter().enumerate() {
        let adv = advantages[i];
        match mode {
            StepMode::Hard => {
                if step.c == 1.0 {
                    let a_dist = step.action_dist.as_ref().ok_or(MetaError::TraceMismatch {
                        mode: "hard",
                        what: "update step lacks goal distributions",
                    })?;
                    let o_dist = step.object_dist.as_ref().ok_or(MetaError::TraceMismatch {
                        mode: "hard",
                        what: "update step lacks goal distributions",
                    })?;
                    let l_dist = step.shift_dist.as_ref().ok_or(MetaError::TraceMismatch {
                        mode: "hard",
                        what: "update step lacks a shift distribution",
                    })?;
                    let l_idx = step.shift_sample.ok_or(MetaError::TraceMismatch {
                        mode: "hard",
                        what: "update step lacks a shift sample",
                    })?;
                    let log_a = log_selected(g, a_dist, step.g.action)?;
                    let log_o = log_selected(g, o_dist, step.g.object)?;
                    let log_l = log_selected(g, l_dist, l_idx)?;
                    let sum = g.add(&log_a, &log_o)?;
                    let sum = g.add(&sum, &log_l)?;
                    let term = g.scale(&sum, -adv * step.c)?;
                    loss = g.add(&loss, &term)?;
                    if w.entropy_weight != 0.0 {
                        let ea = entropy_penalty(g, a_dist, w.entropy_weight)?;
                        let eo = entropy_penalty(g, o_dist, w.entropy_weight)?;
                        loss = g.add(&loss, &ea)?;
                        loss = g.add(&loss, &eo)?;
                    }
                }
                // REINFORCE on the gate decision itself, except where it
                // was forced.
                if !step.forced_c {
                    let prob_c = if step.c == 1.0 {
                        step.update_prob.clone()
                    } else {
                        g.one_minus(&step.update_prob)?
                    };
                    let clamped = g.clamp_min(&prob_c, PROB_FLOOR)?;
                    let log_c = g.log(&clamped)?;
                    let term = g.scale(&log_c, -adv)?;
                    loss = g.add(&loss, &term)?;
                }
                if w.eta != 0.0 {
                    // update_prob is a probability, so its L1 norm is itself.
                    let pen = g.scale(&step.update_prob, w.eta)?;
                    loss = g.add(&loss, &pen)?;
                }
            }
            StepMode::Soft => {
                let a_dist = step.action_dist.as_ref().ok_or(MetaError::TraceMismatch {
                    mode: "soft",
                    what: "step lacks goal distributions",
                })?;
                let o_dist = step.object_dist.as_ref().ok_or(MetaError::TraceMismatch {
                    mode: "soft",
                    what: "step lacks goal distributions",
                })?;
                let factors: [(usize, &Tensor, Option<usize>); 2] = [
                    (step.g.action, a_dist, step.g_prev.map(|t| t.action)),
                    (step.g.object, o_dist, step.g_prev.map(|t| t.object)),
                ];
                for (chosen, dist, prev) in factors {
                    let pi = g.select(dist, chosen)?;
                    let update_mass = g.scalar_mul(&step.c_tensor, &pi)?;
                    let indicator = match prev {
                        Some(j) if j == chosen => 1.0,
                        _ => 0.0,
                    };
                    let copy_weight = g.one_minus(&step.c_tensor)?;
                    let copy_mass = g.scale(&copy_weight, indicator)?;
                    let mixture = g.add(&update_mass, &copy_mass)?;
                    let clamped = g.clamp_min(&mixture, PROB_FLOOR)?;
                    let log_mix = g.log(&clamped)?;
                    let term = g.scale(&log_mix, -adv)?;
                    loss = g.add(&loss, &term)?;
                }
                if w.entropy_weight != 0.0 {
                    let ea = entropy_penalty(g, a_dist, w.entropy_weight)?;
                    let eo = entropy_penalty(g, o_dist, w.entropy_weight)?;
                    loss = g.add(&loss, &ea)?;
                    loss = g.add(&loss, &eo)?;
                }
            }
        }
        if w.value_weight != 0.0 {
            let err = g.add_scalar(&step.value, -returns[i])?;
            let sq = g.mul(&err, &err)?;
            let sq = g.scale(&sq, w.value_weight)?;
            loss = g.add(&loss, &sq)?;
        }
    }

    if w.xi != 0.0 {
        if let Some(terms) = analogy {
            let dis = g.scale(&terms.dis, w.rho_dis)?;
            let diff = g.scale(&terms.diff, w.rho_diff)?;
            let am = g.add(&terms.sim, &dis)?;
            let am = g.add(&am, &diff)?;
            let am = g.scale(&am, w.xi)?;
            loss = g.add(&loss, &am)?;
        }
    }
    Ok(loss)
}
