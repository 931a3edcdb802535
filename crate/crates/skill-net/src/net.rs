//! The parameterized skill network: conv stack over the observation with a
//! task-predicted 1x1 convolution, a task-factored LSTM, and three heads
//! (action distribution, termination probability, value).

use gridworld::{Observation, ACTION_COUNT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tensor_core::{init, Graph, ParamSet, Tensor};
use task_space::{TaskParams, TaskSpace};

use crate::SkillError;

/// Network sizes. The conditioning structure is fixed; only widths vary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkillConfig {
    /// Observations are zero-padded into a canvas x canvas frame so the
    /// weights work across world sizes.
    pub canvas: usize,
    pub obs_channels: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub conv3_channels: usize,
    pub conv4_channels: usize,
    /// Task embedding width D for phi(g) = relu(W1 g1 * W2 g2).
    pub embed_dim: usize,
    /// Factor width of the task-conditioned LSTM weight factorization.
    pub lstm_factor: usize,
    pub lstm_hidden: usize,
}

impl Default for SkillConfig {
    fn default() -> Self {
        SkillConfig {
            canvas: 10,
            obs_channels: 18,
            conv1_channels: 16,
            conv2_channels: 32,
            conv3_channels: 32,
            conv4_channels: 32,
            embed_dim: 32,
            lstm_factor: 64,
            lstm_hidden: 64,
        }
    }
}

impl SkillConfig {
    /// Spatial size after conv2 (stride 2, pad 1) applied to the canvas.
    fn mid(&self) -> usize {
        (self.canvas + 1) / 2
    }

    /// Spatial size after conv4 (stride 2, pad 1).
    fn tail(&self) -> usize {
        (self.mid() + 1) / 2
    }

    pub fn flat_features(&self) -> usize {
        self.conv4_channels * self.tail() * self.tail()
    }
}

/// Zero-pad an observation into a fixed channels x canvas x canvas frame so
/// one set of weights serves every world size.
pub fn obs_to_canvas(
    obs: &Observation,
    channels: usize,
    canvas: usize,
) -> Result<Tensor, SkillError> {
    if obs.channels != channels || obs.height > canvas || obs.width > canvas {
        return Err(SkillError::BadObservation {
            channels: obs.channels,
            height: obs.height,
            width: obs.width,
            canvas,
        });
    }
    let mut data = vec![0.0; channels * canvas * canvas];
    for ch in 0..obs.channels {
        for r in 0..obs.height {
            for col in 0..obs.width {
                data[(ch * canvas + r) * canvas + col] =
                    obs.data[(ch * obs.height + r) * obs.width + col];
            }
        }
    }
    Ok(Tensor::from_vec(&[channels, canvas, canvas], data)?)
}

/// Recurrent state; zeroed at episode start.
#[derive(Clone)]
pub struct SkillState {
    pub h: Tensor,
    pub c: Tensor,
}

impl SkillState {
    pub fn zeros(config: &SkillConfig) -> Self {
        SkillState {
            h: Tensor::zeros(&[config.lstm_hidden]),
            c: Tensor::zeros(&[config.lstm_hidden]),
        }
    }
}

/// One forward step's outputs, all graph tensors.
pub struct SkillStepOutput {
    pub action_dist: Tensor,
    pub term_prob: Tensor,
    pub value: Tensor,
    pub state: SkillState,
}

pub struct SkillNet {
    pub config: SkillConfig,
    pub action_arity: usize,
    pub object_arity: usize,
    params: ParamSet,
}

impl SkillNet {
    pub fn new(config: SkillConfig, space: &TaskSpace, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let c = &config;
        let reg = |name: &str, shape: &[usize], data: Vec<f64>, params: &mut ParamSet| {
            params.register(name, Tensor::param(shape, data).expect("finite init"));
        };

        let conv_k = |rng: &mut ChaCha8Rng, o: usize, i: usize, k: usize| {
            init::fanin_uniform(rng, o, i * k * k)
        };
        reg(
            "conv1.k",
            &[c.conv1_channels, c.obs_channels, 3, 3],
            conv_k(&mut rng, c.conv1_channels, c.obs_channels, 3),
            &mut params,
        );
        reg("conv1.b", &[c.conv1_channels], init::zeros(c.conv1_channels), &mut params);
        reg(
            "conv2.k",
            &[c.conv2_channels, c.conv1_channels, 3, 3],
            conv_k(&mut rng, c.conv2_channels, c.conv1_channels, 3),
            &mut params,
        );
        reg("conv2.b", &[c.conv2_channels], init::zeros(c.conv2_channels), &mut params);
        // conv3 kernel comes from the task embedding.
        reg(
            "conv3.w_k",
            &[c.conv3_channels * c.conv2_channels, c.embed_dim],
            init::fanin_uniform(&mut rng, c.conv3_channels * c.conv2_channels, c.embed_dim),
            &mut params,
        );
        reg("conv3.b", &[c.conv3_channels], init::zeros(c.conv3_channels), &mut params);
        reg(
            "conv4.k",
            &[c.conv4_channels, c.conv3_channels, 3, 3],
            conv_k(&mut rng, c.conv4_channels, c.conv3_channels, 3),
            &mut params,
        );
        reg("conv4.b", &[c.conv4_channels], init::zeros(c.conv4_channels), &mut params);

        let (ta, to) = (space.action_arity(), space.object_arity());
        reg("embed.w1", &[c.embed_dim, ta], init::fanin_uniform(&mut rng, c.embed_dim, ta), &mut params);
        reg("embed.w2", &[c.embed_dim, to], init::fanin_uniform(&mut rng, c.embed_dim, to), &mut params);

        reg(
            "lstm.w_e",
            &[c.lstm_factor, c.embed_dim],
            init::fanin_uniform(&mut rng, c.lstm_factor, c.embed_dim),
            &mut params,
        );
        let flat = c.flat_features();
        reg("lstm.w_ix", &[c.lstm_factor, flat], init::fanin_uniform(&mut rng, c.lstm_factor, flat), &mut params);
        reg(
            "lstm.w_ox",
            &[4 * c.lstm_hidden, c.lstm_factor],
            init::fanin_uniform(&mut rng, 4 * c.lstm_hidden, c.lstm_factor),
            &mut params,
        );
        reg(
            "lstm.w_ih",
            &[c.lstm_factor, c.lstm_hidden],
            init::orthogonal(&mut rng, c.lstm_factor, c.lstm_hidden),
            &mut params,
        );
        reg(
            "lstm.w_oh",
            &[4 * c.lstm_hidden, c.lstm_factor],
            init::orthogonal(&mut rng, 4 * c.lstm_hidden, c.lstm_factor),
            &mut params,
        );
        reg("lstm.b", &[4 * c.lstm_hidden], init::zeros(4 * c.lstm_hidden), &mut params);

        reg(
            "head.action.w",
            &[ACTION_COUNT, c.lstm_hidden],
            init::fanin_uniform(&mut rng, ACTION_COUNT, c.lstm_hidden),
            &mut params,
        );
        reg("head.action.b", &[ACTION_COUNT], init::zeros(ACTION_COUNT), &mut params);
        reg("head.term.w", &[1, c.lstm_hidden], init::fanin_uniform(&mut rng, 1, c.lstm_hidden), &mut params);
        reg("head.term.b", &[1], init::zeros(1), &mut params);
        reg("head.value.w", &[1, c.lstm_hidden], init::fanin_uniform(&mut rng, 1, c.lstm_hidden), &mut params);
        reg("head.value.b", &[1], init::zeros(1), &mut params);

        SkillNet {
            config,
            action_arity: ta,
            object_arity: to,
            params,
        }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    fn p(&self, name: &str) -> &Tensor {
        self.params.get(name).expect("parameter registered in new()")
    }

    /// phi(g) = relu(W1 g1 * W2 g2), with one-hot selection realized as a
    /// table column lookup.
    pub fn task_embed(&self, g: &mut Graph, tp: TaskParams) -> Result<Tensor, SkillError> {
        if tp.action >= self.action_arity || tp.object >= self.object_arity {
            return Err(SkillError::BadTask {
                action: tp.action,
                object: tp.object,
            });
        }
        let onehot = |arity: usize, hot: usize| {
            let mut v = vec![0.0; arity];
            v[hot] = 1.0;
            Tensor::from_vec(&[arity], v).expect("one-hot is finite")
        };
        let g1 = onehot(self.action_arity, tp.action);
        let g2 = onehot(self.object_arity, tp.object);
        let a = g.linear(&g1, self.p("embed.w1"), None)?;
        let b = g.linear(&g2, self.p("embed.w2"), None)?;
        let prod = g.mul(&a, &b)?;
        Ok(g.relu(&prod)?)
    }

    /// Zero-pad the observation into the canvas frame as a constant tensor.
    pub fn obs_tensor(&self, obs: &Observation) -> Result<Tensor, SkillError> {
        obs_to_canvas(obs, self.config.obs_channels, self.config.canvas)
    }

    /// One policy step: conv features conditioned on phi(g), factored LSTM,
    /// then the three heads.
    pub fn forward(
        &self,
        g: &mut Graph,
        obs: &Tensor,
        tp: TaskParams,
        state: &SkillState,
    ) -> Result<SkillStepOutput, SkillError> {
        let c = &self.config;
        let embed = self.task_embed(g, tp)?;

        let x1 = g.conv2d(obs, self.p("conv1.k"), Some(self.p("conv1.b")), 1, 1)?;
        let x1 = g.relu(&x1)?;
        let x2 = g.conv2d(&x1, self.p("conv2.k"), Some(self.p("conv2.b")), 2, 1)?;
        let x2 = g.relu(&x2)?;
        let x3 = g.predicted_conv2d(
            &x2,
            &embed,
            self.p("conv3.w_k"),
            Some(self.p("conv3.b")),
            [c.conv3_channels, c.conv2_channels, 1, 1],
            1,
            0,
        )?;
        let x3 = g.relu(&x3)?;
        let x4 = g.conv2d(&x3, self.p("conv4.k"), Some(self.p("conv4.b")), 2, 1)?;
        let x4 = g.relu(&x4)?;
        let flat = g.reshape(&x4, &[c.flat_features()])?;

        // Factored LSTM: both input and hidden paths share the task factor.
        let factor = g.linear(&embed, self.p("lstm.w_e"), None)?;
        let from_x = g.factored_linear(&flat, self.p("lstm.w_ix"), &factor, self.p("lstm.w_ox"), Some(self.p("lstm.b")))?;
        let from_h = g.factored_linear(&state.h, self.p("lstm.w_ih"), &factor, self.p("lstm.w_oh"), None)?;
        let preact = g.add(&from_x, &from_h)?;
        let (h_new, c_new) = g.lstm_activate(&preact, &state.c)?;

        let logits = g.linear(&h_new, self.p("head.action.w"), Some(self.p("head.action.b")))?;
        let action_dist = g.softmax(&logits)?;
        let term_logit = g.linear(&h_new, self.p("head.term.w"), Some(self.p("head.term.b")))?;
        let term_prob = g.sigmoid(&term_logit)?;
        let value = g.linear(&h_new, self.p("head.value.w"), Some(self.p("head.value.b")))?;

        Ok(SkillStepOutput {
            action_dist,
            term_prob,
            value,
            state: SkillState { h: h_new, c: c_new },
        })
    }
}
