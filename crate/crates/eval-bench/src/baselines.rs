//! Agents: the full meta+skill controller, the three ablation baselines
//! (flat, hierarchical-short, hierarchical-long), and scripted wrappers.

use gridworld::{Action, GridState, Instruction, InstructionKind};
use meta_controller::{
    build_memory, meta_step, HeadKind, InstructionMemory, MetaNet, MetaRecurrent, StepMode,
    StepOverrides,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rl_train::{Agent, GateMode};
use skill_net::{SkillNet, SkillState};
use task_space::{Sentence, TaskParams, Template, Vocabulary};
use tensor_core::Graph;

use crate::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Flat,
    HierShort,
    HierLong,
}

/// Invert the instruction -> sentence mapping for the five templates.
pub fn sentence_from_instruction(ins: &Instruction) -> Option<Sentence> {
    let template = match ins.kind {
        InstructionKind::Visit => Template::Visit,
        InstructionKind::PickUp => Template::PickUp,
        InstructionKind::Transform => Template::Transform,
        InstructionKind::PickUpAll => Template::PickUpAll,
        InstructionKind::TransformAll => Template::TransformAll,
        InstructionKind::InteractWith => return None,
    };
    Some(Sentence {
        template,
        object: ins.object,
    })
}

/// Scripted policy wrappers as rollout agents.
pub struct ShortestPathAgent;

impl Agent for ShortestPathAgent {
    fn reset(&mut self, _state: &GridState) {}
    fn act(&mut self, state: &GridState, _rng: &mut ChaCha8Rng) -> Action {
        crate::scripted::shortest_path_policy(state)
    }
}

pub struct NearOptimalAgent {
    pub engage_radius: u32,
}

impl Agent for NearOptimalAgent {
    fn reset(&mut self, _state: &GridState) {}
    fn act(&mut self, state: &GridState, _rng: &mut ChaCha8Rng) -> Action {
        crate::scripted::near_optimal_policy(state, self.engage_radius)
    }
}

/// Meta controller (optionally with a skill underneath) as an episode
/// agent. Covers the full controller and all three ablation baselines.
pub struct MetaAgent {
    meta: MetaNet,
    skill: Option<SkillNet>,
    vocab: Vocabulary,
    tables: gridworld::Tables,
    mode: StepMode,
    gate: GateMode,
    // per-episode state
    graph: Graph,
    memory: Option<InstructionMemory>,
    mstate: Option<MetaRecurrent>,
    skill_ctx: Option<(TaskParams, SkillState)>,
    pub last_gate: Vec<f64>,
    pub last_b: Vec<f64>,
}

impl MetaAgent {
    pub fn new(
        meta: MetaNet,
        skill: Option<SkillNet>,
        vocab: Vocabulary,
        tables: gridworld::Tables,
        mode: StepMode,
        gate: GateMode,
    ) -> Result<Self, EvalError> {
        if meta.head == HeadKind::Subtask && skill.is_none() {
            return Err(EvalError::MissingSkill);
        }
        Ok(MetaAgent {
            meta,
            skill,
            vocab,
            tables,
            mode,
            gate,
            graph: Graph::inference(),
            memory: None,
            mstate: None,
            skill_ctx: None,
            last_gate: Vec::new(),
            last_b: Vec::new(),
        })
    }

}

impl Agent for MetaAgent {
    fn reset(&mut self, state: &GridState) {
        self.graph = Graph::inference();
        let sentences: Vec<Sentence> = state
            .instructions()
            .iter()
            .filter_map(sentence_from_instruction)
            .collect();
        let memory = build_memory(
            &mut self.graph,
            &sentences,
            &self.vocab,
            &self.tables,
            self.meta.word_embedding(),
            self.meta.config.max_instructions,
        )
        .expect("instruction lists fit the memory");
        self.mstate = Some(
            MetaRecurrent::initial(&mut self.graph, &self.meta, &memory)
                .expect("initial state construction"),
        );
        self.memory = Some(memory);
        self.skill_ctx = None;
        self.last_gate.clear();
        self.last_b.clear();
    }

    fn act(&mut self, state: &GridState, rng: &mut ChaCha8Rng) -> Action {
        let obs = state.observe();
        let g = &mut self.graph;
        let memory = self.memory.as_ref().expect("reset before act");
        let mstate = self.mstate.take().expect("reset before act");

        // Termination bit from the skill for the running subtask.
        let pre = match (&self.skill, &self.skill_ctx) {
            (Some(skill), Some((tp, sstate))) => {
                let mut sg = Graph::inference();
                let obs_s = skill.obs_tensor(&obs).expect("observation fits the canvas");
                let out = skill
                    .forward(&mut sg, &obs_s, *tp, sstate)
                    .expect("skill forward");
                Some((*tp, out))
            }
            _ => None,
        };
        let b = match &pre {
            Some((_, out)) => {
                let p = out.term_prob.item().expect("scalar term prob");
                if rng.gen::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            None => match self.gate {
                GateMode::OnTermination => 1.0,
                _ => 0.0,
            },
        };
        let ov = match self.gate {
            GateMode::Learned => StepOverrides::default(),
            GateMode::AlwaysUpdate => StepOverrides { force_c: Some(1.0), ..Default::default() },
            GateMode::OnTermination => StepOverrides { force_c: Some(b), ..Default::default() },
        };
        let obs_m = skill_net::obs_to_canvas(&obs, self.meta.config.obs_channels, self.meta.config.canvas)
            .expect("observation fits the canvas");
        let out = meta_step(&self.meta, g, self.mode, &obs_m, b, &mstate, memory, rng, &ov)
            .expect("meta step");
        self.last_gate.push(out.diag.c);
        self.last_b.push(b);
        let g_t = out.g;
        self.mstate = Some(out.state);

        match &self.skill {
            // Subtask head: the frozen skill turns g into a primitive action.
            Some(skill) => {
                let (dist, new_state) = match (pre, &self.skill_ctx) {
                    (Some((tp, out)), Some((running, _))) if *running == g_t && tp == g_t => {
                        (out.action_dist.to_vec(), out.state)
                    }
                    _ => {
                        let mut sg = Graph::inference();
                        let obs_s = skill.obs_tensor(&obs).expect("observation fits the canvas");
                        let out = skill
                            .forward(&mut sg, &obs_s, g_t, &SkillState::zeros(&skill.config))
                            .expect("skill forward");
                        (out.action_dist.to_vec(), out.state)
                    }
                };
                self.skill_ctx = Some((g_t, new_state));
                let idx = sample(&dist, rng);
                Action::from_code(idx as u8).expect("13-way action head")
            }
            // Primitive head: the first goal factor is the action itself.
            None => Action::from_code(g_t.action as u8).expect("13-way action head"),
        }
    }
}

fn sample(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = probs.iter().sum();
    let draw = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Assemble one of the ablation agents. Hierarchical kinds require the
/// skill; the flat controller swaps the factored goal head for a 13-way
/// primitive head.
pub fn make_baseline(
    kind: BaselineKind,
    meta: MetaNet,
    skill: Option<SkillNet>,
    vocab: Vocabulary,
    tables: gridworld::Tables,
    mode: StepMode,
) -> Result<MetaAgent, EvalError> {
    match kind {
        BaselineKind::Flat => {
            if meta.head != HeadKind::Primitive {
                return Err(EvalError::WrongHead);
            }
            MetaAgent::new(meta, None, vocab, tables, mode, GateMode::Learned)
        }
        BaselineKind::HierShort => {
            if skill.is_none() {
                return Err(EvalError::MissingSkill);
            }
            MetaAgent::new(meta, skill, vocab, tables, mode, GateMode::AlwaysUpdate)
        }
        BaselineKind::HierLong => {
            if skill.is_none() {
                return Err(EvalError::MissingSkill);
            }
            MetaAgent::new(meta, skill, vocab, tables, mode, GateMode::OnTermination)
        }
    }
}

/// A skill acting alone on a fixed subtask; used to evaluate the
/// parameterized skill itself.
pub struct SkillAgent {
    pub skill: SkillNet,
    pub task: TaskParams,
    state: SkillState,
}

impl SkillAgent {
    pub fn new(skill: SkillNet, task: TaskParams) -> Self {
        let state = SkillState::zeros(&skill.config);
        SkillAgent { skill, task, state }
    }
}

impl Agent for SkillAgent {
    fn reset(&mut self, _state: &GridState) {
        self.state = SkillState::zeros(&self.skill.config);
    }

    fn act(&mut self, state: &GridState, rng: &mut ChaCha8Rng) -> Action {
        let obs = state.observe();
        let mut g = Graph::inference();
        let obs_t = self.skill.obs_tensor(&obs).expect("observation fits the canvas");
        let out = self
            .skill
            .forward(&mut g, &obs_t, self.task, &self.state)
            .expect("skill forward");
        self.state = out.state;
        let idx = sample(&out.action_dist.to_vec(), rng);
        Action::from_code(idx as u8).expect("13-way action head")
    }
}
