//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! Every op appends a node holding its inputs, outputs, and whatever
//! intermediate values the backward rule needs. Graphs are rebuilt per
//! forward pass; `backward` walks the node list once in reverse.

use std::collections::{HashMap, HashSet};

use crate::tensor::Tensor;
use crate::TensorError;

#[derive(Debug, Clone)]
enum OpKind {
    Linear,
    Conv2d { stride: usize, pad: usize },
    LstmActivate,
    EmbeddingLookup { ids: Vec<usize> },
    Softmax,
    Sigmoid,
    Tanh,
    Relu,
    Log,
    ClampMin { min: f64 },
    Concat { offsets: Vec<usize> },
    Add,
    Sub,
    Mul,
    Scale { factor: f64 },
    AddScalar,
    ScalarMul,
    SumAll,
    MeanAll,
    L2Norm,
    Select { index: usize },
    Slice { start: usize, len: usize },
    Reshape,
}

struct Node {
    kind: OpKind,
    inputs: Vec<Tensor>,
    outputs: Vec<Tensor>,
    /// Saved forward intermediates (op-specific layout).
    saved: Vec<Vec<f64>>,
}

/// Gradients of the leaf tensors reachable from a loss, keyed by tensor id.
pub struct Gradients {
    entries: Vec<(u64, Vec<f64>)>,
    index: HashMap<u64, usize>,
}

impl Gradients {
    fn new() -> Self {
        Gradients {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Assemble a gradient map directly, e.g. after reducing per-worker
    /// gradients that were keyed by parameter name.
    pub fn from_entries(entries: Vec<(u64, Vec<f64>)>) -> Self {
        let mut g = Gradients::new();
        for (id, grad) in entries {
            g.insert(id, grad);
        }
        g
    }

    fn insert(&mut self, id: u64, grad: Vec<f64>) {
        if !self.index.contains_key(&id) {
            self.index.insert(id, self.entries.len());
            self.entries.push((id, grad));
        }
    }

    pub fn get(&self, tensor: &Tensor) -> Option<&[f64]> {
        self.index
            .get(&tensor.id())
            .map(|&i| self.entries[i].1.as_slice())
    }

    pub fn get_by_id(&self, id: u64) -> Option<&[f64]> {
        self.index.get(&id).map(|&i| self.entries[i].1.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f64])> {
        self.entries.iter().map(|(id, g)| (*id, g.as_slice()))
    }
}

/// Computation tape. `new()` records ops for backward; `inference()` runs
/// the same math without recording.
pub struct Graph {
    nodes: Vec<Node>,
    recording: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            recording: true,
        }
    }

    pub fn inference() -> Self {
        Graph {
            nodes: Vec::new(),
            recording: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn record(
        &mut self,
        kind: OpKind,
        inputs: &[&Tensor],
        outputs: &[&Tensor],
        saved: Vec<Vec<f64>>,
    ) {
        let track = self.recording && inputs.iter().any(|t| t.requires_grad());
        if !track {
            return;
        }
        for out in outputs {
            out.set_requires_grad(true);
        }
        self.nodes.push(Node {
            kind,
            inputs: inputs.iter().map(|t| (*t).clone()).collect(),
            outputs: outputs.iter().map(|t| (*t).clone()).collect(),
            saved,
        });
    }

    // ---- primitive ops ----

    /// y = W x (+ b). `x`: [n], `w`: [m, n], `b`: [m].
    pub fn linear(
        &mut self,
        x: &Tensor,
        w: &Tensor,
        b: Option<&Tensor>,
    ) -> Result<Tensor, TensorError> {
        let xs = x.shape();
        let ws = w.shape();
        if xs.len() != 1 || ws.len() != 2 || ws[1] != xs[0] {
            return Err(TensorError::shape(
                "linear",
                format!("x {:?} incompatible with w {:?}", xs, ws),
            ));
        }
        let (m, n) = (ws[0], ws[1]);
        if let Some(bias) = b {
            let bs = bias.shape();
            if bs != vec![m] {
                return Err(TensorError::shape(
                    "linear",
                    format!("bias {:?} incompatible with w {:?}", bs, ws),
                ));
            }
        }
        let xd = x.to_vec();
        let wd = w.to_vec();
        let mut y = match b {
            Some(bias) => bias.to_vec(),
            None => vec![0.0; m],
        };
        for i in 0..m {
            let row = &wd[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * xd[j];
            }
            y[i] += acc;
        }
        let out = Tensor::output(vec![m], y, false, "linear")?;
        let mut inputs = vec![x, w];
        if let Some(bias) = b {
            inputs.push(bias);
        }
        self.record(OpKind::Linear, &inputs, &[&out], vec![]);
        Ok(out)
    }

    /// 2-D convolution. `x`: [C, H, W], `k`: [O, C, KH, KW], `b`: [O].
    /// Zero padding `pad` on all spatial sides, stride >= 1, no dilation.
    pub fn conv2d(
        &mut self,
        x: &Tensor,
        k: &Tensor,
        b: Option<&Tensor>,
        stride: usize,
        pad: usize,
    ) -> Result<Tensor, TensorError> {
        if stride == 0 {
            return Err(TensorError::attr("conv2d", "stride must be >= 1"));
        }
        let xs = x.shape();
        let ks = k.shape();
        if xs.len() != 3 || ks.len() != 4 {
            return Err(TensorError::shape(
                "conv2d",
                format!("expected x rank 3 and kernel rank 4, got {:?} / {:?}", xs, ks),
            ));
        }
        let (c, h, w) = (xs[0], xs[1], xs[2]);
        let (o, kc, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
        if kc != c {
            return Err(TensorError::shape(
                "conv2d",
                format!("kernel channels {} != input channels {}", kc, c),
            ));
        }
        if h + 2 * pad < kh || w + 2 * pad < kw {
            return Err(TensorError::shape(
                "conv2d",
                format!("kernel {}x{} larger than padded input {}x{}", kh, kw, h + 2 * pad, w + 2 * pad),
            ));
        }
        if let Some(bias) = b {
            if bias.shape() != vec![o] {
                return Err(TensorError::shape(
                    "conv2d",
                    format!("bias {:?} incompatible with {} output channels", bias.shape(), o),
                ));
            }
        }
        let ho = (h + 2 * pad - kh) / stride + 1;
        let wo = (w + 2 * pad - kw) / stride + 1;
        let xd = x.to_vec();
        let kd = k.to_vec();
        let mut y = vec![0.0; o * ho * wo];
        for oc in 0..o {
            let base = match b {
                Some(bias) => bias.data()[oc],
                None => 0.0,
            };
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = base;
                    for ic in 0..c {
                        for u in 0..kh {
                            let iy = (oy * stride + u) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for v in 0..kw {
                                let ix = (ox * stride + v) as isize - pad as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc += kd[((oc * c + ic) * kh + u) * kw + v]
                                    * xd[(ic * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    y[(oc * ho + oy) * wo + ox] = acc;
                }
            }
        }
        let out = Tensor::output(vec![o, ho, wo], y, false, "conv2d")?;
        let mut inputs = vec![x, k];
        if let Some(bias) = b {
            inputs.push(bias);
        }
        self.record(OpKind::Conv2d { stride, pad }, &inputs, &[&out], vec![]);
        Ok(out)
    }

    /// LSTM gate nonlinearity: preactivations [4H] (gate order i, f, g, o)
    /// and previous cell [H] to (hidden', cell').
    pub fn lstm_activate(
        &mut self,
        preact: &Tensor,
        cell: &Tensor,
    ) -> Result<(Tensor, Tensor), TensorError> {
        let ps = preact.shape();
        let cs = cell.shape();
        if ps.len() != 1 || cs.len() != 1 || ps[0] != 4 * cs[0] {
            return Err(TensorError::shape(
                "lstm_activate",
                format!("preact {:?} must be 4x cell {:?}", ps, cs),
            ));
        }
        let hsize = cs[0];
        let pd = preact.to_vec();
        let cd = cell.to_vec();
        let mut gates = vec![0.0; 4 * hsize]; // i, f, g, o after nonlinearities
        let mut c_new = vec![0.0; hsize];
        let mut h_new = vec![0.0; hsize];
        for j in 0..hsize {
            let i = sigmoid(pd[j]);
            let f = sigmoid(pd[hsize + j]);
            let g = pd[2 * hsize + j].tanh();
            let o = sigmoid(pd[3 * hsize + j]);
            gates[j] = i;
            gates[hsize + j] = f;
            gates[2 * hsize + j] = g;
            gates[3 * hsize + j] = o;
            c_new[j] = f * cd[j] + i * g;
            h_new[j] = o * c_new[j].tanh();
        }
        let h_out = Tensor::output(vec![hsize], h_new, false, "lstm_activate")?;
        let c_out = Tensor::output(vec![hsize], c_new.clone(), false, "lstm_activate")?;
        self.record(
            OpKind::LstmActivate,
            &[preact, cell],
            &[&h_out, &c_out],
            vec![gates, c_new],
        );
        Ok((h_out, c_out))
    }

    /// Single LSTM step with plain weights:
    /// gates = w_x x + w_h h + b, then the usual gate math.
    pub fn lstm_cell(
        &mut self,
        x: &Tensor,
        h: &Tensor,
        cell: &Tensor,
        w_x: &Tensor,
        w_h: &Tensor,
        b: &Tensor,
    ) -> Result<(Tensor, Tensor), TensorError> {
        let from_x = self.linear(x, w_x, None)?;
        let from_h = self.linear(h, w_h, Some(b))?;
        let preact = self.add(&from_x, &from_h)?;
        self.lstm_activate(&preact, cell)
    }

    /// Row lookup: `table` [V, E], output [len(ids), E].
    pub fn embedding_lookup(
        &mut self,
        table: &Tensor,
        ids: &[usize],
    ) -> Result<Tensor, TensorError> {
        let ts = table.shape();
        if ts.len() != 2 {
            return Err(TensorError::shape(
                "embedding_lookup",
                format!("table must be rank 2, got {:?}", ts),
            ));
        }
        let (v, e) = (ts[0], ts[1]);
        for &id in ids {
            if id >= v {
                return Err(TensorError::shape(
                    "embedding_lookup",
                    format!("id {} out of range for table with {} rows", id, v),
                ));
            }
        }
        let td = table.to_vec();
        let mut y = Vec::with_capacity(ids.len() * e);
        for &id in ids {
            y.extend_from_slice(&td[id * e..(id + 1) * e]);
        }
        let out = Tensor::output(vec![ids.len(), e], y, false, "embedding_lookup")?;
        self.record(
            OpKind::EmbeddingLookup { ids: ids.to_vec() },
            &[table],
            &[&out],
            vec![],
        );
        Ok(out)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: &Tensor) -> Result<Tensor, TensorError> {
        let xs = x.shape();
        if xs.is_empty() {
            return Err(TensorError::shape("softmax", "rank 0 input".to_string()));
        }
        let last = xs[xs.len() - 1];
        if last == 0 {
            return Err(TensorError::shape("softmax", "empty last axis".to_string()));
        }
        let xd = x.to_vec();
        let mut y = vec![0.0; xd.len()];
        for row in 0..xd.len() / last {
            let s = &xd[row * last..(row + 1) * last];
            let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (j, v) in s.iter().enumerate() {
                let ev = (v - max).exp();
                y[row * last + j] = ev;
                denom += ev;
            }
            for j in 0..last {
                y[row * last + j] /= denom;
            }
        }
        let out = Tensor::output(xs, y, false, "softmax")?;
        self.record(OpKind::Softmax, &[x], &[&out], vec![]);
        Ok(out)
    }

    pub fn sigmoid(&mut self, x: &Tensor) -> Result<Tensor, TensorError> {
        let y: Vec<f64> = x.data().iter().map(|&v| sigmoid(v)).collect();
        let out = Tensor::output(x.shape(), y, false, "sigmoid")?;
        self.record(OpKind::Sigmoid, &[x], &[&out], vec![]);
        Ok(out)
    }

    pub fn tanh(&mut self, x: &Tensor) -> Result<Tensor, TensorError> {
        let y: Vec<f64> = x.data().iter().map(|v| v.tanh()).collect();
        let out = Tensor::output(x.shape(), y, false, "tanh")?;
        self.record(OpKind::Tanh, &[x], &[&out], vec![]);
        Ok(out)
    }

    pub fn relu(&mut self, x: &Tensor) -> Result<Tensor, TensorError> {
        let y: Vec<f64> = x.data().iter().map(|v| v.max(0.0)).collect();
        let out = Tensor::output(x.shape(), y, false, "relu")?;
        self.record(OpKind::Relu, &[x], &[&out], vec![]);
        Ok(out)
    }

    /// Natural log. Non-positive inputs produce an error via the finiteness
    /// check; clamp first when feeding probabilities.
    pub fn log(&mut self, x: &Tensor) -> Result<Tensor, TensorError> {
        let y: Vec<f64> = x.data().iter().map(|v| v.ln()).collect();
        let out = Tensor::output(x.shape(), y, false, "log")?;
        self.record(OpKind::Log, &[x], &[&out], vec![]);
        Ok(out)
    }

    pub fn clamp_min(&mut self, x: &Tensor, min: f64) -> Result<Tensor, TensorError> {
        let y: Vec<f64> = x.data().iter().map(|v| v.max(min)).collect();
        let out = Tensor::output(x.shape(), y, false, "clamp_min")?;
        self.record(OpKind::ClampMin { min }, &[x], &[&out], vec![]);
        Ok(out)
    }

    /// Concatenate rank-1 tensors.
    pub fn concat(&mut self, parts: &[&Tensor]) -> Result<Tensor, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::shape("concat", "no inputs".to_string()));
        }
        let mut offsets = Vec::with_capacity(parts.len());
        let mut y = Vec::new();
        for p in parts {
            let ps = p.shape();
            if ps.len() != 1 {
                return Err(TensorError::shape(
                    "concat",
                    format!("expected rank-1 inputs, got {:?}", ps),
                ));
            }
            offsets.push(y.len());
            y.extend_from_slice(&p.data());
        }
        let out = Tensor::output(vec![y.len()], y, false, "concat")?;
        self.record(OpKind::Concat { offsets }, parts, &[&out], vec![]);
        Ok(out)
    }

    fn binary_shape_check(op: &str, a: &Tensor, b: &Tensor) -> Result<(), TensorError> {
        if a.shape() != b.shape() {
            return Err(TensorError::shape(
                op,
                format!("{:?} vs {:?}", a.shape(), b.shape()),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
        Self::binary_shape_check("add", a, b)?;
        let y: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(x, z)| x + z).collect();
        let out = Tensor::output(a.shape(), y, false, "add")?;
        self.record(OpKind::Add, &[a, b], &[&out], vec![]);
        Ok(out)
    }

    pub fn sub(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
        Self::binary_shape_check("sub", a, b)?;
        let y: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(x, z)| x - z).collect();
        let out = Tensor::output(a.shape(), y, false, "sub")?;
        self.record(OpKind::Sub, &[a, b], &[&out], vec![]);
        Ok(out)
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
        Self::binary_shape_check("mul", a, b)?;
        let y: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(x, z)| x * z).collect();
        let out = Tensor::output(a.shape(), y, false, "mul")?;
        self.record(OpKind::Mul, &[a, b], &[&out], vec![]);
        Ok(out)
    }

    pub fn scale(&mut self, x: &Tensor, factor: f64) -> Result<Tensor, TensorError> {
        let y: Vec<f64> = x.data().iter().map(|v| v * factor).collect();
        let out = Tensor::output(x.shape(), y, false, "scale")?;
        self.record(OpKind::Scale { factor }, &[x], &[&out], vec![]);
        Ok(out)
    }

    pub fn add_scalar(&mut self, x: &Tensor, offset: f64) -> Result<Tensor, TensorError> {
        let y: Vec<f64> = x.data().iter().map(|v| v + offset).collect();
        let out = Tensor::output(x.shape(), y, false, "add_scalar")?;
        self.record(OpKind::AddScalar, &[x], &[&out], vec![]);
        Ok(out)
    }

    /// Broadcast multiply by a single-element tensor: y = s * x.
    pub fn scalar_mul(&mut self, s: &Tensor, x: &Tensor) -> Result<Tensor, TensorError> {
        if s.numel() != 1 {
            return Err(TensorError::shape(
                "scalar_mul",
                format!("scale must be a single element, got {:?}", s.shape()),
            ));
        }
        let sv = s.data()[0];
        let y: Vec<f64> = x.data().iter().map(|v| v * sv).collect();
        let out = Tensor::output(x.shape(), y, false, "scalar_mul")?;
        self.record(OpKind::ScalarMul, &[s, x], &[&out], vec![]);
        Ok(out)
    }

    pub fn sum_all(&mut self, x: &Tensor) -> Result<Tensor, TensorError> {
        let y = x.data().iter().sum();
        let out = Tensor::output(vec![1], vec![y], false, "sum_all")?;
        self.record(OpKind::SumAll, &[x], &[&out], vec![]);
        Ok(out)
    }

    pub fn mean_all(&mut self, x: &Tensor) -> Result<Tensor, TensorError> {
        let n = x.numel();
        if n == 0 {
            return Err(TensorError::shape("mean_all", "empty input".to_string()));
        }
        let y = x.data().iter().sum::<f64>() / n as f64;
        let out = Tensor::output(vec![1], vec![y], false, "mean_all")?;
        self.record(OpKind::MeanAll, &[x], &[&out], vec![]);
        Ok(out)
    }

    /// Euclidean norm to a single element. Subgradient 0 at the origin.
    pub fn l2_norm(&mut self, x: &Tensor) -> Result<Tensor, TensorError> {
        let y = x.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        let out = Tensor::output(vec![1], vec![y], false, "l2_norm")?;
        self.record(OpKind::L2Norm, &[x], &[&out], vec![]);
        Ok(out)
    }

    /// Extract one element as a single-element tensor.
    pub fn select(&mut self, x: &Tensor, index: usize) -> Result<Tensor, TensorError> {
        if index >= x.numel() {
            return Err(TensorError::shape(
                "select",
                format!("index {} out of range for {:?}", index, x.shape()),
            ));
        }
        let y = x.data()[index];
        let out = Tensor::output(vec![1], vec![y], false, "select")?;
        self.record(OpKind::Select { index }, &[x], &[&out], vec![]);
        Ok(out)
    }

    /// Contiguous sub-vector of a rank-1 tensor.
    pub fn slice(&mut self, x: &Tensor, start: usize, len: usize) -> Result<Tensor, TensorError> {
        let xs = x.shape();
        if xs.len() != 1 || start + len > xs[0] {
            return Err(TensorError::shape(
                "slice",
                format!("range {}..{} out of bounds for {:?}", start, start + len, xs),
            ));
        }
        let y = x.data()[start..start + len].to_vec();
        let out = Tensor::output(vec![len], y, false, "slice")?;
        self.record(OpKind::Slice { start, len }, &[x], &[&out], vec![]);
        Ok(out)
    }

    pub fn reshape(&mut self, x: &Tensor, shape: &[usize]) -> Result<Tensor, TensorError> {
        let numel: usize = shape.iter().product();
        if numel != x.numel() {
            return Err(TensorError::shape(
                "reshape",
                format!("cannot reshape {:?} into {:?}", x.shape(), shape),
            ));
        }
        let out = Tensor::output(shape.to_vec(), x.to_vec(), false, "reshape")?;
        self.record(OpKind::Reshape, &[x], &[&out], vec![]);
        Ok(out)
    }

    // ---- composite ops ----

    /// Factored conditioning layer: y = w_out (e ⊙ (w_in x)) + b.
    pub fn factored_linear(
        &mut self,
        x: &Tensor,
        w_in: &Tensor,
        e: &Tensor,
        w_out: &Tensor,
        b: Option<&Tensor>,
    ) -> Result<Tensor, TensorError> {
        let inner = self.linear(x, w_in, None)?;
        let gated = self.mul(&inner, e)?;
        self.linear(&gated, w_out, b)
    }

    /// Convolution whose kernel is predicted from an embedding:
    /// kernel = reshape(w_k · e, kshape), then conv2d(x, kernel, b).
    #[allow(clippy::too_many_arguments)]
    pub fn predicted_conv2d(
        &mut self,
        x: &Tensor,
        e: &Tensor,
        w_k: &Tensor,
        b: Option<&Tensor>,
        kshape: [usize; 4],
        stride: usize,
        pad: usize,
    ) -> Result<Tensor, TensorError> {
        let flat = self.linear(e, w_k, None)?;
        let kernel = self.reshape(&flat, &kshape)?;
        self.conv2d(x, &kernel, b, stride, pad)
    }

    /// 1 - x for a single-element tensor.
    pub fn one_minus(&mut self, x: &Tensor) -> Result<Tensor, TensorError> {
        let neg = self.scale(x, -1.0)?;
        self.add_scalar(&neg, 1.0)
    }

    // ---- backward ----

    /// Reverse pass from a scalar loss. Returns the gradients of every
    /// leaf (requires-grad tensor that is not produced by any node); a
    /// leaf feeding only dead branches gets a zero gradient.
    pub fn backward(&self, loss: &Tensor) -> Result<Gradients, TensorError> {
        if loss.numel() != 1 {
            return Err(TensorError::NotScalar { shape: loss.shape() });
        }

        let mut produced: HashSet<u64> = HashSet::new();
        for node in &self.nodes {
            for out in &node.outputs {
                produced.insert(out.id());
            }
        }

        // Zero grads for every tensor touched by the graph, then seed the loss.
        let mut seen: HashSet<u64> = HashSet::new();
        for node in &self.nodes {
            for t in node.inputs.iter().chain(node.outputs.iter()) {
                if seen.insert(t.id()) {
                    t.init_grad_zero();
                }
            }
        }
        loss.init_grad_zero();
        loss.set_grad_one();

        for node in self.nodes.iter().rev() {
            step_backward(node);
        }

        let mut grads = Gradients::new();
        for node in &self.nodes {
            for input in &node.inputs {
                if input.requires_grad() && !produced.contains(&input.id()) {
                    grads.insert(input.id(), input.grad_or_zeros());
                }
            }
        }
        if self.nodes.is_empty() && loss.requires_grad() {
            grads.insert(loss.id(), vec![1.0]);
        }
        Ok(grads)
    }
}

fn step_backward(node: &Node) {
    let out_grads: Vec<Vec<f64>> = node.outputs.iter().map(|t| t.grad_or_zeros()).collect();
    match &node.kind {
        OpKind::Linear => {
            let g = &out_grads[0];
            let x = &node.inputs[0];
            let w = &node.inputs[1];
            let xd = x.to_vec();
            let wd = w.to_vec();
            let n = xd.len();
            let m = g.len();
            let mut gx = vec![0.0; n];
            let mut gw = vec![0.0; m * n];
            for i in 0..m {
                let gi = g[i];
                if gi == 0.0 {
                    continue;
                }
                for j in 0..n {
                    gx[j] += wd[i * n + j] * gi;
                    gw[i * n + j] += xd[j] * gi;
                }
            }
            x.accumulate_grad(&gx);
            w.accumulate_grad(&gw);
            if node.inputs.len() == 3 {
                node.inputs[2].accumulate_grad(g);
            }
        }
        OpKind::Conv2d { stride, pad } => {
            let g = &out_grads[0];
            let x = &node.inputs[0];
            let k = &node.inputs[1];
            let xs = x.shape();
            let ks = k.shape();
            let (c, h, w) = (xs[0], xs[1], xs[2]);
            let (o, _, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
            let ho = (h + 2 * pad - kh) / stride + 1;
            let wo = (w + 2 * pad - kw) / stride + 1;
            let xd = x.to_vec();
            let kd = k.to_vec();
            let mut gx = vec![0.0; xd.len()];
            let mut gk = vec![0.0; kd.len()];
            let mut gb = vec![0.0; o];
            for oc in 0..o {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let go = g[(oc * ho + oy) * wo + ox];
                        if go == 0.0 {
                            continue;
                        }
                        gb[oc] += go;
                        for ic in 0..c {
                            for u in 0..kh {
                                let iy = (oy * stride + u) as isize - *pad as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for v in 0..kw {
                                    let ix = (ox * stride + v) as isize - *pad as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    let xi = (ic * h + iy as usize) * w + ix as usize;
                                    let ki = ((oc * c + ic) * kh + u) * kw + v;
                                    gx[xi] += kd[ki] * go;
                                    gk[ki] += xd[xi] * go;
                                }
                            }
                        }
                    }
                }
            }
            x.accumulate_grad(&gx);
            k.accumulate_grad(&gk);
            if node.inputs.len() == 3 {
                node.inputs[2].accumulate_grad(&gb);
            }
        }
        OpKind::LstmActivate => {
            let gh = &out_grads[0];
            let gc_out = &out_grads[1];
            let gates = &node.saved[0];
            let c_new = &node.saved[1];
            let hsize = gh.len();
            let c_in = node.inputs[1].to_vec();
            let mut g_preact = vec![0.0; 4 * hsize];
            let mut g_cin = vec![0.0; hsize];
            for j in 0..hsize {
                let i = gates[j];
                let f = gates[hsize + j];
                let g = gates[2 * hsize + j];
                let o = gates[3 * hsize + j];
                let t = c_new[j].tanh();
                let gc_total = gc_out[j] + gh[j] * o * (1.0 - t * t);
                g_preact[j] = gc_total * g * i * (1.0 - i);
                g_preact[hsize + j] = gc_total * c_in[j] * f * (1.0 - f);
                g_preact[2 * hsize + j] = gc_total * i * (1.0 - g * g);
                g_preact[3 * hsize + j] = gh[j] * t * o * (1.0 - o);
                g_cin[j] = gc_total * f;
            }
            node.inputs[0].accumulate_grad(&g_preact);
            node.inputs[1].accumulate_grad(&g_cin);
        }
        OpKind::EmbeddingLookup { ids } => {
            let g = &out_grads[0];
            let table = &node.inputs[0];
            let ts = table.shape();
            let e = ts[1];
            let mut gt = vec![0.0; ts[0] * e];
            for (r, &id) in ids.iter().enumerate() {
                for j in 0..e {
                    gt[id * e + j] += g[r * e + j];
                }
            }
            table.accumulate_grad(&gt);
        }
        OpKind::Softmax => {
            let g = &out_grads[0];
            let y = node.outputs[0].to_vec();
            let shape = node.outputs[0].shape();
            let last = shape[shape.len() - 1];
            let mut gx = vec![0.0; y.len()];
            for row in 0..y.len() / last {
                let off = row * last;
                let mut dot = 0.0;
                for j in 0..last {
                    dot += g[off + j] * y[off + j];
                }
                for j in 0..last {
                    gx[off + j] = y[off + j] * (g[off + j] - dot);
                }
            }
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::Sigmoid => {
            let g = &out_grads[0];
            let y = node.outputs[0].to_vec();
            let gx: Vec<f64> = g.iter().zip(&y).map(|(gv, yv)| gv * yv * (1.0 - yv)).collect();
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::Tanh => {
            let g = &out_grads[0];
            let y = node.outputs[0].to_vec();
            let gx: Vec<f64> = g.iter().zip(&y).map(|(gv, yv)| gv * (1.0 - yv * yv)).collect();
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::Relu => {
            let g = &out_grads[0];
            let x = node.inputs[0].to_vec();
            let gx: Vec<f64> = g
                .iter()
                .zip(&x)
                .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                .collect();
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::Log => {
            let g = &out_grads[0];
            let x = node.inputs[0].to_vec();
            let gx: Vec<f64> = g.iter().zip(&x).map(|(gv, xv)| gv / xv).collect();
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::ClampMin { min } => {
            let g = &out_grads[0];
            let x = node.inputs[0].to_vec();
            let gx: Vec<f64> = g
                .iter()
                .zip(&x)
                .map(|(gv, xv)| if *xv > *min { *gv } else { 0.0 })
                .collect();
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::Concat { offsets } => {
            let g = &out_grads[0];
            for (idx, input) in node.inputs.iter().enumerate() {
                let start = offsets[idx];
                let len = input.numel();
                input.accumulate_grad(&g[start..start + len]);
            }
        }
        OpKind::Add => {
            let g = &out_grads[0];
            node.inputs[0].accumulate_grad(g);
            node.inputs[1].accumulate_grad(g);
        }
        OpKind::Sub => {
            let g = &out_grads[0];
            node.inputs[0].accumulate_grad(g);
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            node.inputs[1].accumulate_grad(&neg);
        }
        OpKind::Mul => {
            let g = &out_grads[0];
            let a = node.inputs[0].to_vec();
            let b = node.inputs[1].to_vec();
            let ga: Vec<f64> = g.iter().zip(&b).map(|(gv, bv)| gv * bv).collect();
            let gb: Vec<f64> = g.iter().zip(&a).map(|(gv, av)| gv * av).collect();
            node.inputs[0].accumulate_grad(&ga);
            node.inputs[1].accumulate_grad(&gb);
        }
        OpKind::Scale { factor } => {
            let g = &out_grads[0];
            let gx: Vec<f64> = g.iter().map(|v| v * factor).collect();
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::AddScalar => {
            node.inputs[0].accumulate_grad(&out_grads[0]);
        }
        OpKind::ScalarMul => {
            let g = &out_grads[0];
            let s = node.inputs[0].to_vec()[0];
            let x = node.inputs[1].to_vec();
            let gs: f64 = g.iter().zip(&x).map(|(gv, xv)| gv * xv).sum();
            let gx: Vec<f64> = g.iter().map(|v| v * s).collect();
            node.inputs[0].accumulate_grad(&[gs]);
            node.inputs[1].accumulate_grad(&gx);
        }
        OpKind::SumAll => {
            let g = out_grads[0][0];
            let gx = vec![g; node.inputs[0].numel()];
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::MeanAll => {
            let n = node.inputs[0].numel();
            let g = out_grads[0][0] / n as f64;
            let gx = vec![g; n];
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::L2Norm => {
            let g = out_grads[0][0];
            let norm = node.outputs[0].to_vec()[0];
            let x = node.inputs[0].to_vec();
            let gx: Vec<f64> = if norm > 0.0 {
                x.iter().map(|v| g * v / norm).collect()
            } else {
                vec![0.0; x.len()]
            };
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::Select { index } => {
            let g = out_grads[0][0];
            let mut gx = vec![0.0; node.inputs[0].numel()];
            gx[*index] = g;
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::Slice { start, len } => {
            let g = &out_grads[0];
            let mut gx = vec![0.0; node.inputs[0].numel()];
            gx[*start..*start + *len].copy_from_slice(&g[..*len]);
            node.inputs[0].accumulate_grad(&gx);
        }
        OpKind::Reshape => {
            node.inputs[0].accumulate_grad(&out_grads[0]);
        }
    }
}
