//! One meta-controller step in soft or hard update mode.
//!
//! Soft mode follows the differentiable update rule: the gate weight
//! c = sigma(phi_update) merges candidate and previous updater state, the
//! shift softmax itself convolves the pointer, and each goal factor is
//! sampled from the mixture c*pi + (1-c)*previous. Hard mode samples c as
//! a Bernoulli and either copies the updater state wholesale or commits a
//! sampled shift and goal. The low context units advance every step in
//! both modes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tensor_core::{Graph, Tensor};
use task_space::TaskParams;

use crate::memory::{retrieve, shift_pointer_graph, InstructionMemory};
use crate::net::MetaNet;
use crate::MetaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Soft,
    Hard,
}

/// Forced choices for tests, gradient checks, and the ablation baselines.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepOverrides {
    /// Replace the gate value (soft weight or hard sample).
    pub force_c: Option<f64>,
    /// Replace the shift with a one-hot at this index (0 -> -1, 1 -> 0, 2 -> +1).
    pub force_l: Option<usize>,
    /// Replace goal sampling.
    pub force_g: Option<TaskParams>,
}

/// Recurrent meta state between steps. Tensors are graph outputs during
/// soft training and plain values otherwise.
#[derive(Clone)]
pub struct MetaRecurrent {
    pub pointer: Tensor,
    pub retrieved: Tensor,
    pub h_low: Tensor,
    pub h_high: Tensor,
    pub cell_low: Tensor,
    pub cell_high: Tensor,
    pub g_prev: Option<TaskParams>,
    pub b_prev: f64,
    pub c_prev: f64,
    /// Set until the first step runs; the first decision is forced to c=1.
    pub first: bool,
}

impl MetaRecurrent {
    /// Initial state: pointer one-hot on the first instruction, retrieval
    /// of that column, null previous subtask, b = 0.
    pub fn initial(
        g: &mut Graph,
        net: &MetaNet,
        memory: &InstructionMemory,
    ) -> Result<Self, MetaError> {
        let k = memory.len();
        let mut p0 = vec![0.0; k];
        p0[0] = 1.0;
        let pointer = Tensor::from_vec(&[k], p0)?;
        let retrieved = retrieve(g, memory, &pointer)?;
        let cfg = &net.config;
        Ok(MetaRecurrent {
            pointer,
            retrieved,
            h_low: Tensor::zeros(&[cfg.low_dim()]),
            h_high: Tensor::zeros(&[cfg.high_dim()]),
            cell_low: Tensor::zeros(&[cfg.low_dim()]),
            cell_high: Tensor::zeros(&[cfg.high_dim()]),
            g_prev: None,
            b_prev: 0.0,
            c_prev: 1.0,
            first: true,
        })
    }

    pub fn h_full(&self, g: &mut Graph) -> Result<Tensor, MetaError> {
        Ok(g.concat(&[&self.h_low, &self.h_high])?)
    }
}

/// Non-tensor facts about one step.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub c: f64,
    pub update_prob: f64,
    pub shift: [f64; 3],
    pub shift_sample: Option<usize>,
    pub pointer: Vec<f64>,
    pub forced_c: bool,
}

/// Everything one step produces: the next state, the chosen subtask, and
/// the graph tensors the losses need.
pub struct MetaStepResult {
    pub state: MetaRecurrent,
    pub g: TaskParams,
    pub diag: StepDiagnostics,
    /// sigma(phi_update), always present.
    pub update_prob: Tensor,
    /// Gate weight actually used, as a tensor (constant when forced/sampled).
    pub c_tensor: Tensor,
    /// Candidate goal factor distributions; absent on hard copy steps.
    pub action_dist: Option<Tensor>,
    pub object_dist: Option<Tensor>,
    /// Shift softmax; absent on hard copy steps.
    pub shift_dist: Option<Tensor>,
    pub value: Tensor,
}

fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = probs.iter().sum();
    let draw: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn onehot_tensor(arity: usize, hot: usize) -> Tensor {
    let mut v = vec![0.0; arity];
    v[hot] = 1.0;
    Tensor::from_vec(&[arity], v).expect("one-hot is finite")
}

#[allow(clippy::too_many_arguments)]
pub fn meta_step(
    net: &MetaNet,
    g: &mut Graph,
    mode: StepMode,
    obs: &Tensor,
    b: f64,
    state: &MetaRecurrent,
    memory: &InstructionMemory,
    rng: &mut ChaCha8Rng,
    ov: &StepOverrides,
) -> Result<MetaStepResult, MetaError> {
    if memory.len() != state.pointer.numel() {
        return Err(MetaError::PointerLength {
            pointer: state.pointer.numel(),
            memory: memory.len(),
        });
    }

    let joint = net.joint_embed(g, &state.retrieved, state.g_prev, b)?;
    let s = net.context_encode(g, obs, &joint)?;
    let h_prev = state.h_full(g)?;
    let c_prev_cell = g.concat(&[&state.cell_low, &state.cell_high])?;
    let update_prob = net.update_gate(g, &s, &h_prev)?;
    let update_prob_val = update_prob.item()?;

    // Candidate context always advances (the low units need it).
    let (h_cand, cell_cand) = net.context_lstm(g, &s, &joint, &h_prev, &c_prev_cell)?;
    let low = net.config.low_dim();
    let high = net.config.high_dim();
    let h_cand_low = g.slice(&h_cand, 0, low)?;
    let h_cand_high = g.slice(&h_cand, low, high)?;
    let cell_cand_low = g.slice(&cell_cand, 0, low)?;
    let cell_cand_high = g.slice(&cell_cand, low, high)?;

    // An explicit override wins over the forced first decision, so gated
    // baselines control every step including the first.
    let forced_c = state.first || ov.force_c.is_some();
    match mode {
        StepMode::Soft => {
            let (c_tensor, c_val) = if let Some(fc) = ov.force_c {
                (Tensor::scalar(fc)?, fc)
            } else if state.first {
                (Tensor::scalar(1.0)?, 1.0)
            } else {
                (update_prob.clone(), update_prob_val)
            };

            let shift = net.shift_dist(g, &h_cand)?;
            let l_used = match ov.force_l {
                Some(idx) => onehot_tensor(3, idx),
                None => shift.clone(),
            };
            let p_cand = shift_pointer_graph(g, &l_used, &state.pointer)?;
            let r_cand = retrieve(g, memory, &p_cand)?;

            // Merge update/copy branches with c as the weight.
            let one_minus_c = g.one_minus(&c_tensor)?;
            let merge = |g: &mut Graph, cand: &Tensor, prev: &Tensor| -> Result<Tensor, MetaError> {
                let a = g.scalar_mul(&c_tensor, cand)?;
                let b = g.scalar_mul(&one_minus_c, prev)?;
                Ok(g.add(&a, &b)?)
            };
            let pointer = merge(g, &p_cand, &state.pointer)?;
            let retrieved = merge(g, &r_cand, &state.retrieved)?;
            let h_high_new = merge(g, &h_cand_high, &state.h_high)?;
            let cell_high_new = merge(g, &cell_cand_high, &state.cell_high)?;

            let goal_hidden = net.goal_hidden(g, &h_cand, &r_cand)?;
            let (action_dist, object_dist) = net.goal_dists(g, &goal_hidden)?;

            // Sample each factor from c*pi + (1-c)*one_hot(g_prev).
            let sample_factor = |dist: &Tensor, prev: Option<usize>, rng: &mut ChaCha8Rng| {
                let probs = dist.to_vec();
                let mixed: Vec<f64> = probs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let prev_mass = match prev {
                            Some(j) if j == i => 1.0 - c_val,
                            _ => 0.0,
                        };
                        c_val * p + prev_mass
                    })
                    .collect();
                sample_categorical(&mixed, rng)
            };
            let g_t = match ov.force_g {
                Some(tp) => tp,
                None => TaskParams {
                    action: sample_factor(&action_dist, state.g_prev.map(|t| t.action), rng),
                    object: sample_factor(&object_dist, state.g_prev.map(|t| t.object), rng),
                },
            };

            let h_merged = g.concat(&[&h_cand_low, &h_high_new])?;
            let goal_hidden_cur = net.goal_hidden(g, &h_merged, &retrieved)?;
            let value = net.baseline(g, &pointer, &goal_hidden_cur)?;

            let diag = StepDiagnostics {
                c: c_val,
                update_prob: update_prob_val,
                shift: {
                    let v = shift.to_vec();
                    [v[0], v[1], v[2]]
                },
                shift_sample: ov.force_l,
                pointer: pointer.to_vec(),
                forced_c,
            };
            Ok(MetaStepResult {
                state: MetaRecurrent {
                    pointer,
                    retrieved,
                    h_low: h_cand_low,
                    h_high: h_high_new,
                    cell_low: cell_cand_low,
                    cell_high: cell_high_new,
                    g_prev: Some(g_t),
                    b_prev: b,
                    c_prev: c_val,
                    first: false,
                },
                g: g_t,
                diag,
                update_prob,
                c_tensor,
                action_dist: Some(action_dist),
                object_dist: Some(object_dist),
                shift_dist: Some(shift),
                value,
            })
        }
        StepMode::Hard => {
            let c_val = if let Some(fc) = ov.force_c {
                fc
            } else if state.first {
                1.0
            } else if rng.gen::<f64>() < update_prob_val {
                1.0
            } else {
                0.0
            };
            if c_val != 0.0 && c_val != 1.0 {
                return Err(MetaError::BadHardGate(c_val));
            }
            let c_tensor = Tensor::scalar(c_val)?;

            if c_val == 1.0 {
                let shift = net.shift_dist(g, &h_cand)?;
                let l_idx = match ov.force_l {
                    Some(idx) => idx,
                    None => sample_categorical(&shift.to_vec(), rng),
                };
                let l_onehot = onehot_tensor(3, l_idx);
                let pointer = shift_pointer_graph(g, &l_onehot, &state.pointer)?;
                let retrieved = retrieve(g, memory, &pointer)?;

                let goal_hidden = net.goal_hidden(g, &h_cand, &retrieved)?;
                let (action_dist, object_dist) = net.goal_dists(g, &goal_hidden)?;
                let g_t = match ov.force_g {
                    Some(tp) => tp,
                    None => TaskParams {
                        action: sample_categorical(&action_dist.to_vec(), rng),
                        object: sample_categorical(&object_dist.to_vec(), rng),
                    },
                };
                let value = net.baseline(g, &pointer, &goal_hidden)?;
                let diag = StepDiagnostics {
                    c: 1.0,
                    update_prob: update_prob_val,
                    shift: {
                        let v = shift.to_vec();
                        [v[0], v[1], v[2]]
                    },
                    shift_sample: Some(l_idx),
                    pointer: pointer.to_vec(),
                    forced_c,
                };
                Ok(MetaStepResult {
                    state: MetaRecurrent {
                        pointer,
                        retrieved,
                        h_low: h_cand_low,
                        h_high: h_cand_high,
                        cell_low: cell_cand_low,
                        cell_high: cell_cand_high,
                        g_prev: Some(g_t),
                        b_prev: b,
                        c_prev: 1.0,
                        first: false,
                    },
                    g: g_t,
                    diag,
                    update_prob,
                    c_tensor,
                    action_dist: Some(action_dist),
                    object_dist: Some(object_dist),
                    shift_dist: Some(shift),
                    value,
                })
            } else {
                // Copy branch: updater state and subtask untouched, low
                // context advances.
                let g_t = state.g_prev.ok_or(MetaError::CopyWithoutSubtask)?;
                let h_merged = g.concat(&[&h_cand_low, &state.h_high])?;
                let goal_hidden = net.goal_hidden(g, &h_merged, &state.retrieved)?;
                let value = net.baseline(g, &state.pointer, &goal_hidden)?;
                let diag = StepDiagnostics {
                    c: 0.0,
                    update_prob: update_prob_val,
                    shift: [0.0, 1.0, 0.0],
                    shift_sample: None,
                    pointer: state.pointer.to_vec(),
                    forced_c,
                };
                Ok(MetaStepResult {
                    state: MetaRecurrent {
                        pointer: state.pointer.clone(),
                        retrieved: state.retrieved.clone(),
                        h_low: h_cand_low,
                        h_high: state.h_high.clone(),
                        cell_low: cell_cand_low,
                        cell_high: state.cell_high.clone(),
                        g_prev: Some(g_t),
                        b_prev: b,
                        c_prev: 0.0,
                        first: false,
                    },
                    g: g_t,
                    diag,
                    update_prob,
                    c_tensor,
                    action_dist: None,
                    object_dist: None,
                    shift_dist: None,
                    value,
                })
            }
        }
    }
}
