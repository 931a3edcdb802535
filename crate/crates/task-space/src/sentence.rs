//! Instruction sentences, the closed vocabulary, and bag-of-words encoding.

use gridworld::{Instruction, InstructionKind, ObjectTypeId, Tables, TaskAction};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::space::TaskParams;
use crate::split::TaskSplit;
use crate::TaskError;

/// The five sentence templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Template {
    Visit,
    PickUp,
    Transform,
    PickUpAll,
    TransformAll,
}

pub const TEMPLATES: [Template; 5] = [
    Template::Visit,
    Template::PickUp,
    Template::Transform,
    Template::PickUpAll,
    Template::TransformAll,
];

impl Template {
    fn words(self) -> &'static [&'static str] {
        match self {
            Template::Visit => &["visit"],
            Template::PickUp => &["pick", "up"],
            Template::Transform => &["transform"],
            Template::PickUpAll => &["pick", "up", "all"],
            Template::TransformAll => &["transform", "all"],
        }
    }

    pub fn task_action(self) -> TaskAction {
        match self {
            Template::Visit => TaskAction::Visit,
            Template::PickUp | Template::PickUpAll => TaskAction::PickUp,
            Template::Transform | Template::TransformAll => TaskAction::Transform,
        }
    }

    pub fn is_all(self) -> bool {
        matches!(self, Template::PickUpAll | Template::TransformAll)
    }

    fn instruction_kind(self) -> InstructionKind {
        match self {
            Template::Visit => InstructionKind::Visit,
            Template::PickUp => InstructionKind::PickUp,
            Template::Transform => InstructionKind::Transform,
            Template::PickUpAll => InstructionKind::PickUpAll,
            Template::TransformAll => InstructionKind::TransformAll,
        }
    }
}

const TEMPLATE_WORDS: [&str; 5] = ["visit", "pick", "up", "transform", "all"];

/// Closed word list: template words first, then object names in table
/// order, so word ids are stable given a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
}

impl Vocabulary {
    pub fn from_tables(tables: &Tables) -> Self {
        let mut words: Vec<String> = TEMPLATE_WORDS.iter().map(|w| w.to_string()).collect();
        words.extend(tables.names().iter().cloned());
        Vocabulary { words }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Result<usize, TaskError> {
        self.words
            .iter()
            .position(|w| w == word)
            .ok_or_else(|| TaskError::UnknownWordName(word.to_string()))
    }

    pub fn word(&self, id: usize) -> Result<&str, TaskError> {
        self.words
            .get(id)
            .map(String::as_str)
            .ok_or(TaskError::UnknownWord(id))
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// One instruction sentence as a word-id list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub template: Template,
    pub object: ObjectTypeId,
}

impl Sentence {
    pub fn word_ids(&self, vocab: &Vocabulary, tables: &Tables) -> Result<Vec<usize>, TaskError> {
        let mut ids = Vec::new();
        for w in self.template.words() {
            ids.push(vocab.id(w)?);
        }
        ids.push(vocab.id(tables.name_of(self.object)?)?);
        Ok(ids)
    }

    pub fn text(&self, tables: &Tables) -> Result<String, TaskError> {
        let mut parts: Vec<&str> = self.template.words().to_vec();
        let name = tables.name_of(self.object)?;
        parts.push(name);
        Ok(parts.join(" "))
    }

    pub fn instruction(&self) -> Instruction {
        Instruction {
            kind: self.template.instruction_kind(),
            object: self.object,
        }
    }
}

/// Word embedding matrix, row-major [embed_dim, vocab]. Column `w` is the
/// embedding of word id `w`, matching `linear(counts)` in the networks.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix<'a> {
    pub embed_dim: usize,
    pub vocab_size: usize,
    pub data: &'a [f64],
}

/// Word-count vector for a sentence; the BoW embedding is `W · counts`.
pub fn bow_counts(ids: &[usize], vocab_size: usize) -> Result<Vec<f64>, TaskError> {
    let mut counts = vec![0.0; vocab_size];
    for &id in ids {
        if id >= vocab_size {
            return Err(TaskError::UnknownWord(id));
        }
        counts[id] += 1.0;
    }
    Ok(counts)
}

/// Sum of word embeddings: order-invariant and additive by construction.
pub fn encode_ids(ids: &[usize], emb: &EmbeddingMatrix) -> Result<Vec<f64>, TaskError> {
    let counts = bow_counts(ids, emb.vocab_size)?;
    let mut out = vec![0.0; emb.embed_dim];
    for (w, &count) in counts.iter().enumerate() {
        if count == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += count * emb.data[i * emb.vocab_size + w];
        }
    }
    Ok(out)
}

/// Sample an executable instruction list. Targets already cleared by an
/// `all` template are never referenced again, which keeps every sampled
/// list completable in order. With `unseen` set, at least one sentence maps
/// to a held-out subtask.
pub fn sample_instructions(
    n: usize,
    split: &TaskSplit,
    unseen: bool,
    seed: u64,
) -> Result<Vec<Sentence>, TaskError> {
    if n == 0 {
        return Err(TaskError::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let task_of = |template: Template, obj_index: usize| -> Option<TaskParams> {
        let action = split
            .space
            .actions
            .iter()
            .position(|a| *a == template.task_action())?;
        Some(TaskParams {
            action,
            object: obj_index,
        })
    };

    let candidate_pool: Vec<(Template, usize, bool)> = TEMPLATES
        .iter()
        .flat_map(|&template| {
            (0..split.space.object_arity()).filter_map(move |obj| {
                let tp = task_of(template, obj)?;
                let in_train = split.is_train(tp);
                let in_unseen = split.unseen.contains(&tp);
                if in_train || (unseen && in_unseen) {
                    Some((template, obj, in_unseen))
                } else {
                    None
                }
            })
        })
        .collect();
    if candidate_pool.is_empty() {
        return Err(TaskError::NoCandidates);
    }

    // Force one unseen-backed sentence when requested and available.
    let must_unseen = unseen && candidate_pool.iter().any(|(_, _, u)| *u);
    let forced_pos = if must_unseen { rng.gen_range(0..n) } else { n };

    let mut cleared: Vec<bool> = vec![false; split.space.object_arity()];
    let mut cleared_count = 0usize;
    let mut out = Vec::with_capacity(n);
    for slot in 0..n {
        let force_unseen = slot == forced_pos;
        let last_slot = slot + 1 == n;
        // An `all` pick is allowed only if it leaves at least one target
        // object for the remaining slots.
        let all_ok = last_slot || cleared_count + 1 < split.space.object_arity();
        let mut pool: Vec<&(Template, usize, bool)> = candidate_pool
            .iter()
            .filter(|(t, obj, u)| {
                !cleared[*obj] && (!force_unseen || *u) && (all_ok || !t.is_all())
            })
            .collect();
        if pool.is_empty() {
            // The forced slot lost all its unseen candidates to earlier
            // `all` clears; fall back to anything still available.
            pool = candidate_pool
                .iter()
                .filter(|(t, obj, _)| !cleared[*obj] && (all_ok || !t.is_all()))
                .collect();
        }
        if pool.is_empty() {
            return Err(TaskError::NoCandidates);
        }
        let (template, obj, _) = *pool[rng.gen_range(0..pool.len())];
        if template.is_all() {
            cleared[obj] = true;
            cleared_count += 1;
        }
        out.push(Sentence {
            template,
            object: split.space.objects[obj],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_is_templates_then_objects() {
        let tables = Tables::default();
        let vocab = Vocabulary::from_tables(&tables);
        assert_eq!(vocab.len(), 5 + 15);
        assert_eq!(vocab.id("visit").unwrap(), 0);
        assert_eq!(vocab.id("all").unwrap(), 4);
        assert_eq!(vocab.word(5).unwrap(), "cow");
        assert!(vocab.id("dragon").is_err());
    }

    #[test]
    fn sentences_render_and_map_to_instructions() {
        let tables = Tables::default();
        let pig = tables.id_of("pig").unwrap();
        let s = Sentence { template: Template::PickUpAll, object: pig };
        assert_eq!(s.text(&tables).unwrap(), "pick up all pig");
        assert_eq!(s.instruction().kind, InstructionKind::PickUpAll);
    }
}
