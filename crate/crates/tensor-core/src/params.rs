//! Named parameter registry shared by the networks and the optimizer.

use std::collections::HashMap;

use crate::archive::{Archive, ArchiveError};
use crate::tensor::Tensor;
use crate::TensorError;

/// Ordered collection of named trainable tensors. Order is the canonical
/// iteration order for checkpointing and gradient reduction.
#[derive(Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

/// Plain-data snapshot of a ParamSet, safe to move across threads.
#[derive(Clone, Debug)]
pub struct ParamSnapshot {
    pub entries: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, tensor: Tensor) -> Tensor {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name {name:?}"
        );
        tensor.set_requires_grad(true);
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.tensors.push(tensor.clone());
        tensor
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(|n| n.as_str()).zip(self.tensors.iter())
    }

    pub fn total_elements(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    pub fn snapshot(&self) -> ParamSnapshot {
        ParamSnapshot {
            entries: self
                .iter()
                .map(|(n, t)| (n.to_string(), t.shape(), t.to_vec()))
                .collect(),
        }
    }

    /// Overwrite values from a snapshot; names and shapes must match.
    pub fn load_snapshot(&self, snap: &ParamSnapshot) -> Result<(), TensorError> {
        for (name, shape, values) in &snap.entries {
            let t = self.get(name).ok_or_else(|| {
                TensorError::attr("load_snapshot", format!("unknown parameter {name:?}"))
            })?;
            if &t.shape() != shape {
                return Err(TensorError::shape(
                    "load_snapshot",
                    format!("{name:?}: {:?} vs {:?}", t.shape(), shape),
                ));
            }
            t.set_data(values)?;
        }
        Ok(())
    }

    /// Append every parameter to an archive under `prefix/`.
    pub fn store(&self, archive: &mut Archive, prefix: &str) -> Result<(), ArchiveError> {
        for (name, t) in self.iter() {
            archive.push_f64(&format!("{prefix}/{name}"), t.shape(), t.to_vec())?;
        }
        Ok(())
    }

    /// Load every registered parameter from `prefix/` entries.
    pub fn restore(&self, archive: &Archive, prefix: &str) -> Result<(), ArchiveError> {
        for (name, t) in self.iter() {
            let full = format!("{prefix}/{name}");
            let (shape, values) = archive.f64_entry(&full)?;
            if shape != t.shape().as_slice() {
                return Err(ArchiveError::ShapeMismatch {
                    name: full,
                    expected: t.shape(),
                    got: shape.to_vec(),
                });
            }
            t.set_data(values).expect("shape checked above");
        }
        Ok(())
    }
}
