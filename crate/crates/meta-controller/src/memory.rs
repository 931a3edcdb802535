//! Instruction memory (bag-of-words columns) and the pointer shift.

use gridworld::Tables;
use tensor_core::{Graph, Tensor};
use task_space::{bow_counts, Sentence, Vocabulary};

use crate::MetaError;

/// One E-dimensional column per instruction sentence. Columns are graph
/// tensors so gradients reach the word embedding matrix.
pub struct InstructionMemory {
    pub columns: Vec<Tensor>,
    pub sentences: Vec<Sentence>,
}

impl InstructionMemory {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Build memory columns from sentences: column k = W_m · counts(m_k).
pub fn build_memory(
    g: &mut Graph,
    sentences: &[Sentence],
    vocab: &Vocabulary,
    tables: &Tables,
    word_embedding: &Tensor,
    max_instructions: usize,
) -> Result<InstructionMemory, MetaError> {
    if sentences.is_empty() {
        return Err(MetaError::EmptyInstructions);
    }
    if sentences.len() > max_instructions {
        return Err(MetaError::TooManyInstructions {
            got: sentences.len(),
            max: max_instructions,
        });
    }
    let mut columns = Vec::with_capacity(sentences.len());
    for s in sentences {
        let ids = s.word_ids(vocab, tables)?;
        let counts = bow_counts(&ids, vocab.len())?;
        let counts = Tensor::from_vec(&[vocab.len()], counts)?;
        columns.push(g.linear(&counts, word_embedding, None)?);
    }
    Ok(InstructionMemory {
        columns,
        sentences: sentences.to_vec(),
    })
}

/// Soft retrieval r = M p as a weighted sum of memory columns.
pub fn retrieve(
    g: &mut Graph,
    memory: &InstructionMemory,
    pointer: &Tensor,
) -> Result<Tensor, MetaError> {
    if pointer.numel() != memory.len() {
        return Err(MetaError::PointerLength {
            pointer: pointer.numel(),
            memory: memory.len(),
        });
    }
    let embed_dim = memory.columns[0].numel();
    let mut acc = Tensor::zeros(&[embed_dim]);
    for (k, col) in memory.columns.iter().enumerate() {
        let weight = g.select(pointer, k)?;
        let contrib = g.scalar_mul(&weight, col)?;
        acc = g.add(&acc, &contrib)?;
    }
    Ok(acc)
}

/// Clamped shift convolution on plain values: mass shifted past either end
/// folds onto the boundary index, so a simplex stays a simplex.
/// `l = [shift -1, stay, shift +1]`.
pub fn shift_pointer(l: &[f64; 3], p: &[f64]) -> Vec<f64> {
    let k = p.len();
    let mut out = vec![0.0; k];
    for i in 0..k {
        // stay
        out[i] += l[1] * p[i];
        // shift -1: mass at index i moves to i-1, clamped at 0
        let down = if i == 0 { 0 } else { i - 1 };
        out[down] += l[0] * p[i];
        // shift +1: mass at index i moves to i+1, clamped at k-1
        let up = if i + 1 == k { k - 1 } else { i + 1 };
        out[up] += l[2] * p[i];
    }
    out
}

/// Column-stochastic matrices realizing the two shifted paths; the graph
/// version of the clamped convolution is l0·(D p) + l1·p + l2·(U p).
fn shift_matrices(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut down = vec![0.0; k * k]; // row i receives from column j
    let mut up = vec![0.0; k * k];
    for j in 0..k {
        let d = if j == 0 { 0 } else { j - 1 };
        down[d * k + j] += 1.0;
        let u = if j + 1 == k { k - 1 } else { j + 1 };
        up[u * k + j] += 1.0;
    }
    (down, up)
}

/// Differentiable pointer shift; `l` is a 3-way simplex tensor.
pub fn shift_pointer_graph(
    g: &mut Graph,
    l: &Tensor,
    p: &Tensor,
) -> Result<Tensor, MetaError> {
    if l.numel() != 3 {
        return Err(MetaError::ShiftArity(l.numel()));
    }
    let k = p.numel();
    let (down, up) = shift_matrices(k);
    let down = Tensor::from_vec(&[k, k], down)?;
    let up = Tensor::from_vec(&[k, k], up)?;
    let p_down = g.linear(p, &down, None)?;
    let p_up = g.linear(p, &up, None)?;
    let l0 = g.select(l, 0)?;
    let l1 = g.select(l, 1)?;
    let l2 = g.select(l, 2)?;
    let a = g.scalar_mul(&l0, &p_down)?;
    let b = g.scalar_mul(&l1, p)?;
    let c = g.scalar_mul(&l2, &p_up)?;
    let ab = g.add(&a, &b)?;
    Ok(g.add(&ab, &c)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_shift_is_a_no_op() {
        let p = vec![0.2, 0.5, 0.3];
        assert_eq!(shift_pointer(&[0.0, 1.0, 0.0], &p), p);
    }

    #[test]
    fn pure_plus_one_advances_a_one_hot() {
        let p = vec![0.0, 1.0, 0.0, 0.0];
        assert_eq!(shift_pointer(&[0.0, 0.0, 1.0], &p), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn boundary_mass_folds_back() {
        // one-hot at the last index shifted +1 stays put
        let p = vec![0.0, 0.0, 0.0, 1.0];
        assert_eq!(shift_pointer(&[0.0, 0.0, 1.0], &p), p);
        // hand-expanded mixed shift from the second slot
        let p = vec![0.0, 1.0, 0.0, 0.0];
        let out = shift_pointer(&[0.5, 0.5, 0.0], &p);
        assert_eq!(out, vec![0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn graph_shift_matches_plain_shift() {
        let mut g = Graph::inference();
        let p_vals = vec![0.1, 0.4, 0.25, 0.25];
        let l_vals = [0.3, 0.2, 0.5];
        let p = Tensor::from_vec(&[4], p_vals.clone()).unwrap();
        let l = Tensor::from_vec(&[3], l_vals.to_vec()).unwrap();
        let out = shift_pointer_graph(&mut g, &l, &p).unwrap();
        let plain = shift_pointer(&l_vals, &p_vals);
        for (a, b) in out.to_vec().iter().zip(&plain) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
