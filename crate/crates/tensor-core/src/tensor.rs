//! Dense 64-bit tensors with an optional gradient slot.
//!
//! A [`Tensor`] is a cheap reference-counted handle. Values are stored
//! row-major. Gradients live next to the data and are populated by
//! [`crate::Graph::backward`].

use std::cell::{Ref, RefCell};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::TensorError;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug)]
pub(crate) struct TensorInner {
    pub id: u64,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

/// Handle to a dense f64 tensor. Clones share the same storage.
#[derive(Clone)]
pub struct Tensor(pub(crate) Rc<RefCell<TensorInner>>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.0.borrow();
        write!(
            f,
            "Tensor(id={}, shape={:?}, grad={})",
            inner.id,
            inner.shape,
            inner.grad.is_some()
        )
    }
}

fn check_finite(data: &[f64], context: &str) -> Result<(), TensorError> {
    for (i, v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(TensorError::NonFinite {
                context: context.to_string(),
                index: i,
                value: *v,
            });
        }
    }
    Ok(())
}

impl Tensor {
    fn new_inner(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Self {
        Tensor(Rc::new(RefCell::new(TensorInner {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad,
            grad: None,
        })))
    }

    /// Constant tensor from raw values. Rejects shape/data mismatch and non-finite values.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(TensorError::DataLength {
                expected: numel,
                got: data.len(),
            });
        }
        check_finite(&data, "tensor construction")?;
        Ok(Self::new_inner(shape.to_vec(), data, false))
    }

    /// Trainable leaf tensor.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        let t = Self::from_vec(shape, data)?;
        t.0.borrow_mut().requires_grad = true;
        Ok(t)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Self::new_inner(shape.to_vec(), vec![0.0; numel], false)
    }

    pub fn scalar(v: f64) -> Result<Self, TensorError> {
        Self::from_vec(&[1], vec![v])
    }

    /// Internal constructor for op outputs; validates finiteness.
    pub(crate) fn output(
        shape: Vec<usize>,
        data: Vec<f64>,
        requires_grad: bool,
        op: &str,
    ) -> Result<Self, TensorError> {
        check_finite(&data, op)?;
        Ok(Self::new_inner(shape, data, requires_grad))
    }

    pub fn id(&self) -> u64 {
        self.0.borrow().id
    }

    pub fn shape(&self) -> Vec<usize> {
        self.0.borrow().shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.0.borrow().data.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.borrow().requires_grad
    }

    pub fn set_requires_grad(&self, flag: bool) {
        self.0.borrow_mut().requires_grad = flag;
    }

    /// Borrow the raw values.
    pub fn data(&self) -> Ref<'_, [f64]> {
        Ref::map(self.0.borrow(), |inner| inner.data.as_slice())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.borrow().data.clone()
    }

    /// Scalar value of a single-element tensor.
    pub fn item(&self) -> Result<f64, TensorError> {
        let inner = self.0.borrow();
        if inner.data.len() != 1 {
            return Err(TensorError::NotScalar {
                shape: inner.shape.clone(),
            });
        }
        Ok(inner.data[0])
    }

    /// Gradient accumulated by the most recent backward pass, if any.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.borrow().grad.clone()
    }

    pub fn clear_grad(&self) {
        self.0.borrow_mut().grad = None;
    }

    /// Overwrite values in place, keeping the shape. Used by optimizers.
    pub fn set_data(&self, data: &[f64]) -> Result<(), TensorError> {
        let mut inner = self.0.borrow_mut();
        if data.len() != inner.data.len() {
            return Err(TensorError::DataLength {
                expected: inner.data.len(),
                got: data.len(),
            });
        }
        check_finite(data, "set_data")?;
        inner.data.copy_from_slice(data);
        Ok(())
    }

    /// Add `delta` to one element; used by the finite-difference checker.
    pub fn nudge(&self, index: usize, delta: f64) {
        let mut inner = self.0.borrow_mut();
        inner.data[index] += delta;
    }

    /// Ensure the grad slot exists (zero-filled) and return a copy of it.
    pub(crate) fn grad_or_zeros(&self) -> Vec<f64> {
        let mut inner = self.0.borrow_mut();
        let n = inner.data.len();
        inner.grad.get_or_insert_with(|| vec![0.0; n]).clone()
    }

    pub(crate) fn accumulate_grad(&self, g: &[f64]) {
        let mut inner = self.0.borrow_mut();
        let n = inner.data.len();
        let slot = inner.grad.get_or_insert_with(|| vec![0.0; n]);
        for (s, v) in slot.iter_mut().zip(g) {
            *s += v;
        }
    }

    pub(crate) fn init_grad_zero(&self) {
        let mut inner = self.0.borrow_mut();
        let n = inner.data.len();
        match &mut inner.grad {
            Some(g) => g.iter_mut().for_each(|v| *v = 0.0),
            None => inner.grad = Some(vec![0.0; n]),
        }
    }

    pub(crate) fn set_grad_one(&self) {
        let mut inner = self.0.borrow_mut();
        inner.grad = Some(vec![1.0]);
    }
}
