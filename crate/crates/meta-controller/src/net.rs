//! Meta controller network: joint conditioning embedding, conv context
//! encoder with a predicted 1x1 kernel, a conditioned LSTM with a split
//! (low/high) state, and the shift/update/goal/baseline heads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tensor_core::{init, Graph, ParamSet, Tensor};
use task_space::TaskParams;

use crate::MetaError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaConfig {
    pub canvas: usize,
    pub obs_channels: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub conv3_channels: usize,
    /// Width of the previous-subtask embedding phi(g).
    pub task_embed_dim: usize,
    /// Sentence embedding width E (word embedding rows).
    pub sentence_dim: usize,
    /// Joint conditioning embedding over (phi(g_prev), r_prev, b).
    pub joint_dim: usize,
    /// Context feature width fed to the LSTM.
    pub feature_dim: usize,
    /// Factor width of the conditioned LSTM factorization.
    pub lstm_factor: usize,
    /// Total context width; the low (always-updated) part is a quarter.
    pub context_dim: usize,
    pub shift_hidden: usize,
    pub goal_hidden: usize,
    pub max_instructions: usize,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            canvas: 10,
            obs_channels: 18,
            conv1_channels: 16,
            conv2_channels: 32,
            conv3_channels: 32,
            task_embed_dim: 32,
            sentence_dim: 32,
            joint_dim: 64,
            feature_dim: 64,
            lstm_factor: 64,
            context_dim: 64,
            shift_hidden: 64,
            goal_hidden: 64,
            max_instructions: 20,
        }
    }
}

impl MetaConfig {
    /// Low/high split of the context: low units update every step, high
    /// units only under the gate. Ratio 1:3.
    pub fn low_dim(&self) -> usize {
        (self.context_dim / 4).max(1)
    }

    pub fn high_dim(&self) -> usize {
        self.context_dim - self.low_dim()
    }

    fn mid(&self) -> usize {
        (self.canvas + 1) / 2
    }

    fn pooled_dim(&self) -> usize {
        self.conv3_channels
    }
}

/// Output heads: the subtask controller factors goals into (action type,
/// object type); the flat baseline emits primitive actions directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    Subtask,
    Primitive,
}

pub struct MetaNet {
    pub config: MetaConfig,
    pub head: HeadKind,
    pub vocab_size: usize,
    /// Arity of the first goal factor (action type, or 13 primitives).
    pub action_arity: usize,
    /// Arity of the second goal factor (1 for the flat baseline).
    pub object_arity: usize,
    params: ParamSet,
}

impl MetaNet {
    pub fn new(
        config: MetaConfig,
        vocab_size: usize,
        action_arity: usize,
        object_arity: usize,
        head: HeadKind,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let c = &config;
        let reg = |name: &str, shape: &[usize], data: Vec<f64>, params: &mut ParamSet| {
            params.register(name, Tensor::param(shape, data).expect("finite init"));
        };

        reg(
            "word.emb",
            &[c.sentence_dim, vocab_size],
            init::fanin_uniform(&mut rng, c.sentence_dim, vocab_size),
            &mut params,
        );
        // Previous-subtask embedding tables carry one extra null column used
        // before any subtask has been chosen.
        reg(
            "gembed.w1",
            &[c.task_embed_dim, action_arity + 1],
            init::fanin_uniform(&mut rng, c.task_embed_dim, action_arity + 1),
            &mut params,
        );
        reg(
            "gembed.w2",
            &[c.task_embed_dim, object_arity + 1],
            init::fanin_uniform(&mut rng, c.task_embed_dim, object_arity + 1),
            &mut params,
        );
        let joint_in = c.task_embed_dim + c.sentence_dim + 1;
        reg("joint.w", &[c.joint_dim, joint_in], init::fanin_uniform(&mut rng, c.joint_dim, joint_in), &mut params);
        reg("joint.b", &[c.joint_dim], init::zeros(c.joint_dim), &mut params);

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
        reg(
            "conv3.w_k",
            &[c.conv3_channels * c.conv2_channels, c.joint_dim],
            init::fanin_uniform(&mut rng, c.conv3_channels * c.conv2_channels, c.joint_dim),
            &mut params,
        );
        reg("conv3.b", &[c.conv3_channels], init::zeros(c.conv3_channels), &mut params);

        let feat_in = c.pooled_dim() + c.joint_dim;
        reg("feat.w", &[c.feature_dim, feat_in], init::fanin_uniform(&mut rng, c.feature_dim, feat_in), &mut params);
        reg("feat.b", &[c.feature_dim], init::zeros(c.feature_dim), &mut params);

        reg("lstm.w_e", &[c.lstm_factor, c.joint_dim], init::fanin_uniform(&mut rng, c.lstm_factor, c.joint_dim), &mut params);
        reg("lstm.w_ix", &[c.lstm_factor, c.feature_dim], init::fanin_uniform(&mut rng, c.lstm_factor, c.feature_dim), &mut params);
        reg(
            "lstm.w_ox",
            &[4 * c.context_dim, c.lstm_factor],
            init::fanin_uniform(&mut rng, 4 * c.context_dim, c.lstm_factor),
            &mut params,
        );
        reg("lstm.w_ih", &[c.lstm_factor, c.context_dim], init::orthogonal(&mut rng, c.lstm_factor, c.context_dim), &mut params);
        reg(
            "lstm.w_oh",
            &[4 * c.context_dim, c.lstm_factor],
            init::orthogonal(&mut rng, 4 * c.context_dim, c.lstm_factor),
            &mut params,
        );
        reg("lstm.b", &[4 * c.context_dim], init::zeros(4 * c.context_dim), &mut params);

        let update_in = c.feature_dim + c.context_dim;
        reg("update.w", &[1, update_in], init::fanin_uniform(&mut rng, 1, update_in), &mut params);
        reg("update.b", &[1], init::zeros(1), &mut params);

        reg("shift.w1", &[c.shift_hidden, c.context_dim], init::fanin_uniform(&mut rng, c.shift_hidden, c.context_dim), &mut params);
        reg("shift.b1", &[c.shift_hidden], init::zeros(c.shift_hidden), &mut params);
        reg("shift.w2", &[3, c.shift_hidden], init::fanin_uniform(&mut rng, 3, c.shift_hidden), &mut params);
        reg("shift.b2", &[3], init::zeros(3), &mut params);

        let goal_in = c.context_dim + c.sentence_dim;
        reg("goal.w1", &[c.goal_hidden, goal_in], init::fanin_uniform(&mut rng, c.goal_hidden, goal_in), &mut params);
        reg("goal.b1", &[c.goal_hidden], init::zeros(c.goal_hidden), &mut params);
        reg("goal.action.w", &[action_arity, c.goal_hidden], init::fanin_uniform(&mut rng, action_arity, c.goal_hidden), &mut params);
        reg("goal.action.b", &[action_arity], init::zeros(action_arity), &mut params);
        reg("goal.object.w", &[object_arity, c.goal_hidden], init::fanin_uniform(&mut rng, object_arity, c.goal_hidden), &mut params);
        reg("goal.object.b", &[object_arity], init::zeros(object_arity), &mut params);

        // Baseline reads [pointer padded to K_max, presence mask, goal hidden].
        let value_in = 2 * c.max_instructions + c.goal_hidden;
        reg("value.w", &[1, value_in], init::fanin_uniform(&mut rng, 1, value_in), &mut params);
        reg("value.b", &[1], init::zeros(1), &mut params);

        MetaNet {
            config,
            head,
            vocab_size,
            action_arity,
            object_arity,
            params,
        }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub(crate) fn p(&self, name: &str) -> &Tensor {
        self.params.get(name).expect("parameter registered in new()")
    }

    pub fn word_embedding(&self) -> &Tensor {
        self.p("word.emb")
    }

    /// Previous-subtask embedding; `None` selects the learned null column.
    pub fn task_embed(&self, g: &mut Graph, tp: Option<TaskParams>) -> Result<Tensor, MetaError> {
        let (ai, oi) = match tp {
            Some(tp) => {
                if tp.action >= self.action_arity || tp.object >= self.object_arity {
                    return Err(MetaError::BadTask {
                        action: tp.action,
                        object: tp.object,
                    });
                }
                (tp.action, tp.object)
            }
            None => (self.action_arity, self.object_arity),
        };
        let onehot = |arity: usize, hot: usize| {
            let mut v = vec![0.0; arity];
            v[hot] = 1.0;
            Tensor::from_vec(&[arity], v).expect("one-hot is finite")
        };
        let g1 = onehot(self.action_arity + 1, ai);
        let g2 = onehot(self.object_arity + 1, oi);
        let a = g.linear(&g1, self.p("gembed.w1"), None)?;
        let b = g.linear(&g2, self.p("gembed.w2"), None)?;
        let prod = g.mul(&a, &b)?;
        Ok(g.relu(&prod)?)
    }

    /// Joint conditioning embedding over (phi(g_prev), r_prev, b).
    pub fn joint_embed(
        &self,
        g: &mut Graph,
        r_prev: &Tensor,
        g_prev: Option<TaskParams>,
        b: f64,
    ) -> Result<Tensor, MetaError> {
        let phi = self.task_embed(g, g_prev)?;
        let b_t = Tensor::from_vec(&[1], vec![b])?;
        let joint_in = g.concat(&[&phi, r_prev, &b_t])?;
        let pre = g.linear(&joint_in, self.p("joint.w"), Some(self.p("joint.b")))?;
        Ok(g.relu(&pre)?)
    }

    /// s_t: conv features (1x1 kernel predicted from the joint embedding),
    /// spatially mean-pooled, fused with the joint embedding.
    pub fn context_encode(
        &self,
        g: &mut Graph,
        obs: &Tensor,
        joint: &Tensor,
    ) -> Result<Tensor, MetaError> {
        let c = &self.config;
        let x1 = g.conv2d(obs, self.p("conv1.k"), Some(self.p("conv1.b")), 1, 1)?;
        let x1 = g.relu(&x1)?;
        let x2 = g.conv2d(&x1, self.p("conv2.k"), Some(self.p("conv2.b")), 2, 1)?;
        let x2 = g.relu(&x2)?;
        let x3 = g.predicted_conv2d(
            &x2,
            joint,
            self.p("conv3.w_k"),
            Some(self.p("conv3.b")),
            [c.conv3_channels, c.conv2_channels, 1, 1],
            1,
            0,
        )?;
        let x3 = g.relu(&x3)?;
        // Per-channel spatial mean via a constant pooling matrix.
        let m = c.mid();
        let spatial = m * m;
        let mut pool = vec![0.0; c.conv3_channels * c.conv3_channels * spatial];
        for ch in 0..c.conv3_channels {
            for s in 0..spatial {
                pool[ch * (c.conv3_channels * spatial) + ch * spatial + s] = 1.0 / spatial as f64;
            }
        }
        let pool = Tensor::from_vec(&[c.conv3_channels, c.conv3_channels * spatial], pool)?;
        let flat = g.reshape(&x3, &[c.conv3_channels * spatial])?;
        let pooled = g.linear(&flat, &pool, None)?;
        let fused = g.concat(&[&pooled, joint])?;
        let s = g.linear(&fused, self.p("feat.w"), Some(self.p("feat.b")))?;
        Ok(g.relu(&s)?)
    }

    /// Update gate probability sigma(phi_update(s, h_prev)).
    pub fn update_gate(
        &self,
        g: &mut Graph,
        s: &Tensor,
        h_prev: &Tensor,
    ) -> Result<Tensor, MetaError> {
        let input = g.concat(&[s, h_prev])?;
        let logit = g.linear(&input, self.p("update.w"), Some(self.p("update.b")))?;
        Ok(g.sigmoid(&logit)?)
    }

    /// Candidate context update through the conditioned LSTM.
    pub fn context_lstm(
        &self,
        g: &mut Graph,
        s: &Tensor,
        joint: &Tensor,
        h_prev: &Tensor,
        c_prev: &Tensor,
    ) -> Result<(Tensor, Tensor), MetaError> {
        let factor = g.linear(joint, self.p("lstm.w_e"), None)?;
        let from_s = g.factored_linear(s, self.p("lstm.w_ix"), &factor, self.p("lstm.w_ox"), Some(self.p("lstm.b")))?;
        let from_h = g.factored_linear(h_prev, self.p("lstm.w_ih"), &factor, self.p("lstm.w_oh"), None)?;
        let preact = g.add(&from_s, &from_h)?;
        Ok(g.lstm_activate(&preact, c_prev)?)
    }

    /// Shift distribution over {-1, 0, +1} from the candidate context.
    pub fn shift_dist(&self, g: &mut Graph, h: &Tensor) -> Result<Tensor, MetaError> {
        let hid = g.linear(h, self.p("shift.w1"), Some(self.p("shift.b1")))?;
        let hid = g.relu(&hid)?;
        let logits = g.linear(&hid, self.p("shift.w2"), Some(self.p("shift.b2")))?;
        Ok(g.softmax(&logits)?)
    }

    /// Goal hidden layer over (h, r); shared by the factored heads and the
    /// baseline input.
    pub fn goal_hidden(&self, g: &mut Graph, h: &Tensor, r: &Tensor) -> Result<Tensor, MetaError> {
        let input = g.concat(&[h, r])?;
        let hid = g.linear(&input, self.p("goal.w1"), Some(self.p("goal.b1")))?;
        Ok(g.relu(&hid)?)
    }

    /// Factored subtask distributions (action factor, object factor).
    pub fn goal_dists(
        &self,
        g: &mut Graph,
        goal_hidden: &Tensor,
    ) -> Result<(Tensor, Tensor), MetaError> {
        let a_logits = g.linear(goal_hidden, self.p("goal.action.w"), Some(self.p("goal.action.b")))?;
        let o_logits = g.linear(goal_hidden, self.p("goal.object.w"), Some(self.p("goal.object.b")))?;
        Ok((g.softmax(&a_logits)?, g.softmax(&o_logits)?))
    }

    /// Baseline V from [pointer (padded), presence mask, goal hidden].
    pub fn baseline(
        &self,
        g: &mut Graph,
        pointer: &Tensor,
        goal_hidden: &Tensor,
    ) -> Result<Tensor, MetaError> {
        let k_max = self.config.max_instructions;
        let k = pointer.numel();
        if k > k_max {
            return Err(MetaError::TooManyInstructions { got: k, max: k_max });
        }
        let mut mask = vec![0.0; k_max];
        mask[..k].iter_mut().for_each(|v| *v = 1.0);
        let mask = Tensor::from_vec(&[k_max], mask)?;
        let pad = Tensor::zeros(&[k_max - k]);
        let p_padded = if k == k_max {
            pointer.clone()
        } else {
            g.concat(&[pointer, &pad])?
        };
        let input = g.concat(&[&p_padded, &mask, goal_hidden])?;
        Ok(g.linear(&input, self.p("value.w"), Some(self.p("value.b")))?)
    }
}
