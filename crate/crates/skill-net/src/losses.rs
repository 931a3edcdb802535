//! Loss terms: the three contrastive analogy objectives, distillation KL
//! with termination cross-entropy, and the actor-critic assembly.

use tensor_core::{Graph, Tensor};
use task_space::{AnalogyBatch, TaskParams};

use crate::SkillError;

/// Floor applied before every log so zero-probability events stay finite.
pub const PROB_FLOOR: f64 = 1e-12;

/// Closure-based embedding hook so the same loss serves both the skill's
/// and the meta controller's task embeddings.
pub type EmbedFn<'a> = dyn FnMut(&mut Graph, TaskParams) -> Result<Tensor, SkillError> + 'a;

pub struct AnalogyTerms {
    pub sim: Tensor,
    pub dis: Tensor,
    pub diff: Tensor,
}

/// L_sim, L_dis, L_diff over an analogy batch. Empty buckets contribute a
/// zero constant. Differentiable through `embed`.
pub fn analogy_loss(
    g: &mut Graph,
    embed: &mut EmbedFn,
    batch: &AnalogyBatch,
    tau_dis: f64,
    tau_diff: f64,
) -> Result<AnalogyTerms, SkillError> {
    if tau_dis <= 0.0 || tau_diff <= 0.0 {
        return Err(SkillError::BadMargin { tau_dis, tau_diff });
    }
    let zero = || Tensor::scalar(0.0).expect("zero is finite");

    let delta = |g: &mut Graph, embed: &mut EmbedFn, a: TaskParams, b: TaskParams| -> Result<Tensor, SkillError> {
        let ea = embed(g, a)?;
        let eb = embed(g, b)?;
        Ok(g.sub(&ea, &eb)?)
    };

    let mut sim = zero();
    if !batch.sim.is_empty() {
        let mut acc = zero();
        for quad in &batch.sim {
            let d1 = delta(g, embed, quad[0], quad[1])?;
            let d2 = delta(g, embed, quad[2], quad[3])?;
            let gap = g.sub(&d1, &d2)?;
            let sq = g.mul(&gap, &gap)?;
            let term = g.sum_all(&sq)?;
            acc = g.add(&acc, &term)?;
        }
        sim = g.scale(&acc, 1.0 / batch.sim.len() as f64)?;
    }

    let mut dis = zero();
    if !batch.dis.is_empty() {
        let mut acc = zero();
        for quad in &batch.dis {
            let d1 = delta(g, embed, quad[0], quad[1])?;
            let d2 = delta(g, embed, quad[2], quad[3])?;
            let gap = g.sub(&d1, &d2)?;
            let norm = g.l2_norm(&gap)?;
            let hinge_arg = g.scale(&norm, -1.0)?;
            let hinge_arg = g.add_scalar(&hinge_arg, tau_dis)?;
            let hinge = g.relu(&hinge_arg)?;
            let sq = g.mul(&hinge, &hinge)?;
            acc = g.add(&acc, &sq)?;
        }
        dis = g.scale(&acc, 1.0 / batch.dis.len() as f64)?;
    }

    let mut diff = zero();
    if !batch.diff.is_empty() {
        let mut acc = zero();
        for pair in &batch.diff {
            let d = delta(g, embed, pair[0], pair[1])?;
            let norm = g.l2_norm(&d)?;
            let hinge_arg = g.scale(&norm, -1.0)?;
            let hinge_arg = g.add_scalar(&hinge_arg, tau_diff)?;
            let hinge = g.relu(&hinge_arg)?;
            let sq = g.mul(&hinge, &hinge)?;
            acc = g.add(&acc, &sq)?;
        }
        diff = g.scale(&acc, 1.0 / batch.diff.len() as f64)?;
    }

    Ok(AnalogyTerms { sim, dis, diff })
}

/// Binary cross-entropy -[y log p + (1-y) log(1-p)] with both sides clamped.
pub fn binary_cross_entropy(g: &mut Graph, prob: &Tensor, target: f64) -> Result<Tensor, SkillError> {
    let p = g.clamp_min(prob, PROB_FLOOR)?;
    let one_minus = g.one_minus(prob)?;
    let q = g.clamp_min(&one_minus, PROB_FLOOR)?;
    let log_p = g.log(&p)?;
    let log_q = g.log(&q)?;
    let pos = g.scale(&log_p, -target)?;
    let neg = g.scale(&log_q, -(1.0 - target))?;
    Ok(g.add(&pos, &neg)?)
}

/// KL(teacher || student) + alpha * termination cross-entropy. The teacher
/// distribution is a constant; zero student mass is clamped at 1e-12.
pub fn distillation_loss(
    g: &mut Graph,
    teacher_dist: &[f64],
    student_dist: &Tensor,
    term_target: f64,
    term_prob: &Tensor,
    alpha: f64,
) -> Result<Tensor, SkillError> {
    if alpha < 0.0 {
        return Err(SkillError::BadWeight {
            name: "alpha",
            value: alpha,
        });
    }
    if teacher_dist.len() != student_dist.numel() {
        return Err(SkillError::LengthMismatch {
            what: "teacher vs student distribution",
            left: teacher_dist.len(),
            right: student_dist.numel(),
        });
    }
    // KL = sum t (ln t - ln s); the t ln t part is a constant.
    let teacher = Tensor::from_vec(&[teacher_dist.len()], teacher_dist.to_vec())?;
    let s = g.clamp_min(student_dist, PROB_FLOOR)?;
    let log_s = g.log(&s)?;
    let weighted = g.mul(&teacher, &log_s)?;
    let cross = g.sum_all(&weighted)?;
    let neg_cross = g.scale(&cross, -1.0)?;
    let teacher_entropy: f64 = teacher_dist
        .iter()
        .map(|&t| if t > 0.0 { t * t.ln() } else { 0.0 })
        .sum();
    let kl = g.add_scalar(&neg_cross, teacher_entropy)?;
    if alpha == 0.0 {
        return Ok(kl);
    }
    let term = binary_cross_entropy(g, term_prob, term_target)?;
    let term_scaled = g.scale(&term, alpha)?;
    Ok(g.add(&kl, &term_scaled)?)
}

/// Per-step tensors collected during a rollout of the skill.
pub struct AcStep {
    pub action_dist: Tensor,
    pub term_prob: Tensor,
    pub value: Tensor,
    pub action: usize,
    pub term_label: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct AcWeights {
    /// Termination cross-entropy weight.
    pub alpha: f64,
    pub value_weight: f64,
    pub entropy_weight: f64,
    /// Analogy regularizer weight and its inner mixing weights.
    pub xi: f64,
    pub rho_dis: f64,
    pub rho_diff: f64,
}

impl Default for AcWeights {
    fn default() -> Self {
        AcWeights {
            alpha: 0.1,
            value_weight: 0.5,
            entropy_weight: 0.0,
            xi: 1.0,
            rho_dis: 1.0,
            rho_diff: 1.0,
        }
    }
}

/// Actor-critic episode loss:
/// sum_t [ -log pi(a_t) A_t + alpha*term_ce + w_v (V_t - R_t)^2
///         - w_H H(pi_t) ] + xi (L_sim + rho1 L_dis + rho2 L_diff).
pub fn skill_ac_loss(
    g: &mut Graph,
    steps: &[AcStep],
    advantages: &[f64],
    returns: &[f64],
    analogy: Option<&AnalogyTerms>,
    w: &AcWeights,
) -> Result<Tensor, SkillError> {
    if steps.len() != advantages.len() || steps.len() != returns.len() {
        return Err(SkillError::LengthMismatch {
            what: "steps vs advantages/returns",
            left: steps.len(),
            right: advantages.len().min(returns.len()),
        });
    }
    let mut loss = Tensor::scalar(0.0).expect("zero is finite");
    for (i, step) in steps.iter().enumerate() {
        let clamped = g.clamp_min(&step.action_dist, PROB_FLOOR)?;
        let log_dist = g.log(&clamped)?;
        let log_pi = g.select(&log_dist, step.action)?;
        let pg = g.scale(&log_pi, -advantages[i])?;
        loss = g.add(&loss, &pg)?;

        if w.alpha != 0.0 {
            let term = binary_cross_entropy(g, &step.term_prob, step.term_label)?;
            let term = g.scale(&term, w.alpha)?;
            loss = g.add(&loss, &term)?;
        }
        if w.value_weight != 0.0 {
            let err = g.add_scalar(&step.value, -returns[i])?;
            let sq = g.mul(&err, &err)?;
            let sq = g.scale(&sq, w.value_weight)?;
            loss = g.add(&loss, &sq)?;
        }
        if w.entropy_weight != 0.0 {
            let ent_terms = g.mul(&step.action_dist, &log_dist)?;
            let neg_entropy = g.sum_all(&ent_terms)?;
            let bonus = g.scale(&neg_entropy, w.entropy_weight)?;
            loss = g.add(&loss, &bonus)?;
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
