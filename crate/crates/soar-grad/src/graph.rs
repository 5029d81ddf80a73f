use std::cell::RefCell;
use std::rc::Rc;

use crate::{Scalar, Tensor};

/// Recorded operation of a node, holding whatever forward state its adjoint
/// rule needs. Parent ids live in `Node::parents`.
pub(crate) enum Op<S: Scalar> {
    Leaf,
    Add,
    Sub,
    Mul,
    AddScalar,
    Scale(S),
    Matmul { m: usize, k: usize, n: usize },
    Transpose,
    Concat { axis: usize },
    MeanAxis { axis: usize },
    SumAll,
    MeanAll,
    Relu,
    Exp,
    Log,
    Sqrt,
    Hardswish,
    Softmax { axis: usize },
    LayerNorm { xhat: Vec<S>, inv_std: Vec<S> },
    BatchNormTrain { ch_axis: usize, xhat: Vec<S>, inv_std: Vec<S> },
    BatchNormEval { ch_axis: usize, xhat: Vec<S>, inv_std: Vec<S> },
    Conv2d { stride: usize, pad: [usize; 2] },
    GatherRows { indices: Vec<usize> },
    AddRow,
    MulRow,
    DropPath { kept: bool, scale: S },
    CosineSim { dot: S, nu: S, nv: S },
    CrossEntropyLogits { labels: Vec<usize>, probs: Vec<S> },
    Reshape,
}

impl<S: Scalar> Op<S> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::AddScalar => "add_scalar",
            Op::Scale(_) => "scale",
            Op::Matmul { .. } => "matmul",
            Op::Transpose => "transpose",
            Op::Concat { .. } => "concat",
            Op::MeanAxis { .. } => "mean_axis",
            Op::SumAll => "sum_all",
            Op::MeanAll => "mean_all",
            Op::Relu => "relu",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Sqrt => "sqrt",
            Op::Hardswish => "hardswish",
            Op::Softmax { .. } => "softmax",
            Op::LayerNorm { .. } => "layer_norm",
            Op::BatchNormTrain { .. } => "batch_norm_train",
            Op::BatchNormEval { .. } => "batch_norm_eval",
            Op::Conv2d { .. } => "conv2d",
            Op::GatherRows { .. } => "gather_rows",
            Op::AddRow => "add_row",
            Op::MulRow => "mul_row",
            Op::DropPath { .. } => "drop_path",
            Op::CosineSim { .. } => "cosine_similarity",
            Op::CrossEntropyLogits { .. } => "cross_entropy_logits",
            Op::Reshape => "reshape",
        }
    }
}

pub(crate) struct Node<S: Scalar> {
    pub shape: Vec<usize>,
    pub values: Vec<S>,
    pub grad: Option<Vec<S>>,
    pub parents: Vec<usize>,
    pub op: Op<S>,
    pub needs_grad: bool,
}

pub(crate) struct Inner<S: Scalar> {
    pub nodes: Vec<Node<S>>,
    pub check_finite: bool,
}

/// A tape of tensor operations. Handles to it (`Tensor`) share the tape via
/// reference counting; construction and backward are single-threaded.
pub struct Graph<S: Scalar> {
    pub(crate) inner: Rc<RefCell<Inner<S>>>,
}

impl<S: Scalar> Clone for Graph<S> {
    fn clone(&self) -> Self {
        Graph {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Graph {
            inner: Rc::new(RefCell::new(Inner {
                nodes: Vec::new(),
                check_finite: true,
            })),
        }
    }

    /// Disables the per-op NaN/Inf assertion (on by default); training loops
    /// that watch the loss themselves can trade the scan away.
    pub fn set_check_finite(&self, on: bool) {
        self.inner.borrow_mut().check_finite = on;
    }

    pub fn same_graph(&self, other: &Graph<S>) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Differentiable input.
    pub fn leaf(&self, shape: &[usize], values: Vec<S>) -> Tensor<S> {
        self.push_node(shape.to_vec(), values, vec![], Op::Leaf, true)
    }

    /// Non-differentiable input (data, detached activations).
    pub fn constant(&self, shape: &[usize], values: Vec<S>) -> Tensor<S> {
        self.push_node(shape.to_vec(), values, vec![], Op::Leaf, false)
    }

    pub fn scalar(&self, value: S) -> Tensor<S> {
        self.constant(&[1], vec![value])
    }

    pub(crate) fn push_node(
        &self,
        shape: Vec<usize>,
        values: Vec<S>,
        parents: Vec<usize>,
        op: Op<S>,
        leaf_needs_grad: bool,
    ) -> Tensor<S> {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "{}: shape {:?} does not match {} values",
            op.name(),
            shape,
            values.len()
        );
        let mut inner = self.inner.borrow_mut();
        let needs_grad = if parents.is_empty() {
            leaf_needs_grad
        } else {
            parents.iter().any(|&p| inner.nodes[p].needs_grad)
        };
        if inner.check_finite {
            assert!(
                values.iter().all(|v| v.is_finite()),
                "{} produced a non-finite value",
                op.name()
            );
        }
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            shape,
            values,
            grad: None,
            parents,
            op,
            needs_grad,
        });
        Tensor {
            graph: self.clone(),
            id,
        }
    }
}

/// (product before axis, length of axis, product after axis).
pub(crate) fn outer_axis_inner(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    assert!(axis < shape.len(), "axis {axis} out of range for {shape:?}");
    (
        shape[..axis].iter().product(),
        shape[axis],
        shape[axis + 1..].iter().product(),
    )
}

impl<S: Scalar> Graph<S> {
    /// Reverse-mode sweep from a scalar root: nodes were pushed in
    /// topological order, so one pass in decreasing id over the reachable
    /// set applies every adjoint with plain accumulation. Gradients land in
    /// the nodes and are read back through `Tensor::grad`.
    pub(crate) fn backward_from(&self, root: usize) {
        let mut inner = self.inner.borrow_mut();
        let check_finite = inner.check_finite;
        assert_eq!(
            inner.nodes[root].values.len(),
            1,
            "backward requires a scalar root, got shape {:?}",
            inner.nodes[root].shape
        );
        for n in inner.nodes.iter_mut() {
            n.grad = None;
        }

        let nodes = &inner.nodes;
        let mut reachable = vec![false; nodes.len()];
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if reachable[i] || !nodes[i].needs_grad {
                continue;
            }
            reachable[i] = true;
            stack.extend(nodes[i].parents.iter().copied());
        }

        let mut grads: Vec<Option<Vec<S>>> = vec![None; nodes.len()];
        grads[root] = Some(vec![S::one()]);

        for i in (0..=root).rev() {
            if !reachable[i] {
                continue;
            }
            let Some(dy) = grads[i].take() else { continue };
            accumulate_parents(nodes, i, &dy, &mut grads);
            if check_finite {
                assert!(
                    dy.iter().all(|v| v.is_finite()),
                    "{} produced a non-finite gradient",
                    nodes[i].op.name()
                );
            }
            grads[i] = Some(dy);
        }

        drop(stack);
        let inner = &mut *inner;
        for (node, g) in inner.nodes.iter_mut().zip(grads) {
            node.grad = g;
        }
    }
}

fn grad_buf<'a, S: Scalar>(
    grads: &'a mut [Option<Vec<S>>],
    nodes: &[Node<S>],
    id: usize,
) -> &'a mut Vec<S> {
    grads[id].get_or_insert_with(|| vec![S::zero(); nodes[id].values.len()])
}

/// Applies node `i`'s adjoint rule, scattering `dy` into its parents.
fn accumulate_parents<S: Scalar>(
    nodes: &[Node<S>],
    i: usize,
    dy: &[S],
    grads: &mut [Option<Vec<S>>],
) {
    let node = &nodes[i];
    let ps = &node.parents;
    let wants = |p: usize| nodes[p].needs_grad;
    match &node.op {
        Op::Leaf => {}
        Op::Add => {
            // Duplicate parents (x + x) accumulate once per slot, as they must.
            for &p in ps {
                if wants(p) {
                    let g = grad_buf(grads, nodes, p);
                    for (gv, &d) in g.iter_mut().zip(dy) {
                        *gv += d;
                    }
                }
            }
        }
        Op::Sub => {
            if wants(ps[0]) {
                let g = grad_buf(grads, nodes, ps[0]);
                for (gv, &d) in g.iter_mut().zip(dy) {
                    *gv += d;
                }
            }
            if wants(ps[1]) {
                let g = grad_buf(grads, nodes, ps[1]);
                for (gv, &d) in g.iter_mut().zip(dy) {
                    *gv -= d;
                }
            }
        }
        Op::Mul => {
            for (me, other) in [(ps[0], ps[1]), (ps[1], ps[0])] {
                if wants(me) {
                    let ov = &nodes[other].values;
                    let g = grad_buf(grads, nodes, me);
                    for k in 0..dy.len() {
                        g[k] += dy[k] * ov[k];
                    }
                }
            }
        }
        Op::AddScalar => {
            if wants(ps[0]) {
                let g = grad_buf(grads, nodes, ps[0]);
                for (gv, &d) in g.iter_mut().zip(dy) {
                    *gv += d;
                }
            }
        }
        Op::Scale(c) => {
            if wants(ps[0]) {
                let c = *c;
                let g = grad_buf(grads, nodes, ps[0]);
                for (gv, &d) in g.iter_mut().zip(dy) {
                    *gv += c * d;
                }
            }
        }
        Op::Matmul { m, k, n } => {
            let (m, kk, n) = (*m, *k, *n);
            if wants(ps[0]) {
                let b = &nodes[ps[1]].values;
                let g = grad_buf(grads, nodes, ps[0]);
                for r in 0..m {
                    for c in 0..kk {
                        let mut acc = S::zero();
                        for j in 0..n {
                            acc += dy[r * n + j] * b[c * n + j];
                        }
                        g[r * kk + c] += acc;
                    }
                }
            }
            if wants(ps[1]) {
                let a = &nodes[ps[0]].values;
                let g = grad_buf(grads, nodes, ps[1]);
                for c in 0..kk {
                    for j in 0..n {
                        let mut acc = S::zero();
                        for r in 0..m {
                            acc += a[r * kk + c] * dy[r * n + j];
                        }
                        g[c * n + j] += acc;
                    }
                }
            }
        }
        Op::Transpose => {
            if wants(ps[0]) {
                let [rows, cols] = nodes[ps[0]].shape[..] else {
                    unreachable!()
                };
                let g = grad_buf(grads, nodes, ps[0]);
                for r in 0..rows {
                    for c in 0..cols {
                        g[r * cols + c] += dy[c * rows + r];
                    }
                }
            }
        }
        Op::Concat { axis } => {
            let (outer, total_axis, inner) = outer_axis_inner(&node.shape, *axis);
            let mut offset = 0usize;
            for &p in ps {
                let part_axis = nodes[p].shape[*axis];
                if wants(p) {
                    let g = grad_buf(grads, nodes, p);
                    for o in 0..outer {
                        for a in 0..part_axis {
                            let src = ((o * total_axis) + offset + a) * inner;
                            let dst = (o * part_axis + a) * inner;
                            for k in 0..inner {
                                g[dst + k] += dy[src + k];
                            }
                        }
                    }
                }
                offset += part_axis;
            }
        }
        Op::MeanAxis { axis } => {
            if wants(ps[0]) {
                let (outer, len, inner) = outer_axis_inner(&nodes[ps[0]].shape, *axis);
                let inv = S::one() / S::from_f64(len as f64);
                let g = grad_buf(grads, nodes, ps[0]);
                for o in 0..outer {
                    for l in 0..len {
                        for k in 0..inner {
                            g[(o * len + l) * inner + k] += dy[o * inner + k] * inv;
                        }
                    }
                }
            }
        }
        Op::SumAll => {
            if wants(ps[0]) {
                let g = grad_buf(grads, nodes, ps[0]);
                for gv in g.iter_mut() {
                    *gv += dy[0];
                }
            }
        }
        Op::MeanAll => {
            if wants(ps[0]) {
                let n = nodes[ps[0]].values.len();
                let d = dy[0] / S::from_f64(n as f64);
                let g = grad_buf(grads, nodes, ps[0]);
                for gv in g.iter_mut() {
                    *gv += d;
                }
            }
        }
        Op::Relu => {
            if wants(ps[0]) {
                let x = &nodes[ps[0]].values;
                let g = grad_buf(grads, nodes, ps[0]);
                for k in 0..dy.len() {
                    if x[k] > S::zero() {
                        g[k] += dy[k];
                    }
                }
            }
        }
        Op::Exp => {
            if wants(ps[0]) {
                let y = &node.values;
                let g = grad_buf(grads, nodes, ps[0]);
                for k in 0..dy.len() {
                    g[k] += dy[k] * y[k];
                }
            }
        }
        Op::Log => {
            if wants(ps[0]) {
                let x = &nodes[ps[0]].values;
                let g = grad_buf(grads, nodes, ps[0]);
                for k in 0..dy.len() {
                    g[k] += dy[k] / x[k];
                }
            }
        }
        Op::Sqrt => {
            if wants(ps[0]) {
                let y = &node.values;
                let two = S::from_f64(2.0);
                let g = grad_buf(grads, nodes, ps[0]);
                for k in 0..dy.len() {
                    g[k] += dy[k] / (two * y[k]);
                }
            }
        }
        Op::Hardswish => {
            if wants(ps[0]) {
                let x = &nodes[ps[0]].values;
                let three = S::from_f64(3.0);
                let six = S::from_f64(6.0);
                let two = S::from_f64(2.0);
                let g = grad_buf(grads, nodes, ps[0]);
                for k in 0..dy.len() {
                    let slope = if x[k] < -three {
                        S::zero()
                    } else if x[k] > three {
                        S::one()
                    } else {
                        (two * x[k] + three) / six
                    };
                    g[k] += dy[k] * slope;
                }
            }
        }
        Op::Softmax { axis } => {
            if wants(ps[0]) {
                let y = &node.values;
                let [rows, cols] = node.shape[..] else {
                    unreachable!()
                };
                let g = grad_buf(grads, nodes, ps[0]);
                if *axis == 1 {
                    for r in 0..rows {
                        let row = r * cols;
                        let mut s = S::zero();
                        for j in 0..cols {
                            s += dy[row + j] * y[row + j];
                        }
                        for j in 0..cols {
                            g[row + j] += y[row + j] * (dy[row + j] - s);
                        }
                    }
                } else {
                    for c in 0..cols {
                        let mut s = S::zero();
                        for r in 0..rows {
                            s += dy[r * cols + c] * y[r * cols + c];
                        }
                        for r in 0..rows {
                            let k = r * cols + c;
                            g[k] += y[k] * (dy[k] - s);
                        }
                    }
                }
            }
        }
        Op::LayerNorm { xhat, inv_std } => {
            let [n_rows, cols] = node.shape[..] else {
                unreachable!()
            };
            let gain = &nodes[ps[1]].values;
            if wants(ps[0]) {
                let inv_c = S::one() / S::from_f64(cols as f64);
                let g = grad_buf(grads, nodes, ps[0]);
                for r in 0..n_rows {
                    let row = r * cols;
                    let mut m1 = S::zero();
                    let mut m2 = S::zero();
                    for j in 0..cols {
                        let dxh = dy[row + j] * gain[j];
                        m1 += dxh;
                        m2 += dxh * xhat[row + j];
                    }
                    m1 *= inv_c;
                    m2 *= inv_c;
                    for j in 0..cols {
                        let dxh = dy[row + j] * gain[j];
                        g[row + j] += inv_std[r] * (dxh - m1 - xhat[row + j] * m2);
                    }
                }
            }
            if wants(ps[1]) {
                let g = grad_buf(grads, nodes, ps[1]);
                for r in 0..n_rows {
                    for j in 0..cols {
                        g[j] += dy[r * cols + j] * xhat[r * cols + j];
                    }
                }
            }
            if wants(ps[2]) {
                let g = grad_buf(grads, nodes, ps[2]);
                for r in 0..n_rows {
                    for j in 0..cols {
                        g[j] += dy[r * cols + j];
                    }
                }
            }
        }
        Op::BatchNormTrain {
            ch_axis,
            xhat,
            inv_std,
        } => {
            let lay = BnLayout::new(&node.shape, *ch_axis);
            let gain = &nodes[ps[1]].values;
            if wants(ps[0]) {
                let inv_n = S::one() / S::from_f64(lay.batch as f64);
                let g = grad_buf(grads, nodes, ps[0]);
                for c in 0..lay.channels {
                    let mut m1 = S::zero();
                    let mut m2 = S::zero();
                    for b in 0..lay.batch {
                        let k = lay.idx(c, b);
                        let dxh = dy[k] * gain[c];
                        m1 += dxh;
                        m2 += dxh * xhat[k];
                    }
                    m1 *= inv_n;
                    m2 *= inv_n;
                    for b in 0..lay.batch {
                        let k = lay.idx(c, b);
                        let dxh = dy[k] * gain[c];
                        g[k] += inv_std[c] * (dxh - m1 - xhat[k] * m2);
                    }
                }
            }
            bn_affine_grads(nodes, ps, dy, xhat, lay, grads);
        }
        Op::BatchNormEval {
            ch_axis,
            xhat,
            inv_std,
        } => {
            let lay = BnLayout::new(&node.shape, *ch_axis);
            let gain = &nodes[ps[1]].values;
            if wants(ps[0]) {
                let g = grad_buf(grads, nodes, ps[0]);
                for c in 0..lay.channels {
                    for b in 0..lay.batch {
                        let k = lay.idx(c, b);
                        g[k] += dy[k] * gain[c] * inv_std[c];
                    }
                }
            }
            bn_affine_grads(nodes, ps, dy, xhat, lay, grads);
        }
        Op::Conv2d { stride, pad } => {
            let [ci, h, w] = nodes[ps[0]].shape[..] else {
                unreachable!()
            };
            let [co, _, kh, kw] = nodes[ps[1]].shape[..] else {
                unreachable!()
            };
            let [_, ho, wo] = node.shape[..] else {
                unreachable!()
            };
            let (s, pt, pl) = (*stride, pad[0] as isize, pad[1] as isize);
            if wants(ps[0]) {
                let kern = &nodes[ps[1]].values;
                let g = grad_buf(grads, nodes, ps[0]);
                for o in 0..co {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let d = dy[(o * ho + oy) * wo + ox];
                            for c in 0..ci {
                                for ky in 0..kh {
                                    let iy = (oy * s + ky) as isize - pt;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    for kx in 0..kw {
                                        let ix = (ox * s + kx) as isize - pl;
                                        if ix < 0 || ix >= w as isize {
                                            continue;
                                        }
                                        g[(c * h + iy as usize) * w + ix as usize] +=
                                            d * kern[((o * ci + c) * kh + ky) * kw + kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if wants(ps[1]) {
                let x = &nodes[ps[0]].values;
                let g = grad_buf(grads, nodes, ps[1]);
                for o in 0..co {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let d = dy[(o * ho + oy) * wo + ox];
                            for c in 0..ci {
                                for ky in 0..kh {
                                    let iy = (oy * s + ky) as isize - pt;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    for kx in 0..kw {
                                        let ix = (ox * s + kx) as isize - pl;
                                        if ix < 0 || ix >= w as isize {
                                            continue;
                                        }
                                        g[((o * ci + c) * kh + ky) * kw + kx] +=
                                            d * x[(c * h + iy as usize) * w + ix as usize];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if ps.len() == 3 && wants(ps[2]) {
                let g = grad_buf(grads, nodes, ps[2]);
                for o in 0..co {
                    for k in 0..ho * wo {
                        g[o] += dy[o * ho * wo + k];
                    }
                }
            }
        }
        Op::GatherRows { indices } => {
            if wants(ps[0]) {
                let cols = node.shape[1];
                let g = grad_buf(grads, nodes, ps[0]);
                for (r, &src) in indices.iter().enumerate() {
                    for j in 0..cols {
                        g[src * cols + j] += dy[r * cols + j];
                    }
                }
            }
        }
        Op::AddRow => {
            let [n_rows, cols] = node.shape[..] else {
                unreachable!()
            };
            if wants(ps[0]) {
                let g = grad_buf(grads, nodes, ps[0]);
                for (gv, &d) in g.iter_mut().zip(dy) {
                    *gv += d;
                }
            }
            if wants(ps[1]) {
                let g = grad_buf(grads, nodes, ps[1]);
                for r in 0..n_rows {
                    for j in 0..cols {
                        g[j] += dy[r * cols + j];
                    }
                }
            }
        }
        Op::MulRow => {
            let [n_rows, cols] = node.shape[..] else {
                unreachable!()
            };
            if wants(ps[0]) {
                let row = &nodes[ps[1]].values;
                let g = grad_buf(grads, nodes, ps[0]);
                for r in 0..n_rows {
                    for j in 0..cols {
                        g[r * cols + j] += dy[r * cols + j] * row[j];
                    }
                }
            }
            if wants(ps[1]) {
                let x = &nodes[ps[0]].values;
                let g = grad_buf(grads, nodes, ps[1]);
                for r in 0..n_rows {
                    for j in 0..cols {
                        g[j] += dy[r * cols + j] * x[r * cols + j];
                    }
                }
            }
        }
        Op::DropPath { kept, scale } => {
            if *kept && wants(ps[0]) {
                let c = *scale;
                let g = grad_buf(grads, nodes, ps[0]);
                for (gv, &d) in g.iter_mut().zip(dy) {
                    *gv += c * d;
                }
            }
        }
        Op::CosineSim { dot, nu, nv } => {
            let denom = *nu * *nv + S::from_f64(1e-8);
            let d = dy[0];
            let u = &nodes[ps[0]].values;
            let v = &nodes[ps[1]].values;
            if wants(ps[0]) {
                let coef = if *nu > S::zero() {
                    *dot * *nv / (*nu * denom * denom)
                } else {
                    S::zero()
                };
                let g = grad_buf(grads, nodes, ps[0]);
                for k in 0..u.len() {
                    g[k] += d * (v[k] / denom - coef * u[k]);
                }
            }
            if wants(ps[1]) {
                let coef = if *nv > S::zero() {
                    *dot * *nu / (*nv * denom * denom)
                } else {
                    S::zero()
                };
                let g = grad_buf(grads, nodes, ps[1]);
                for k in 0..v.len() {
                    g[k] += d * (u[k] / denom - coef * v[k]);
                }
            }
        }
        Op::CrossEntropyLogits { labels, probs } => {
            if wants(ps[0]) {
                let classes = nodes[ps[0]].shape[1];
                let inv_n = S::one() / S::from_f64(labels.len() as f64);
                let d = dy[0];
                let g = grad_buf(grads, nodes, ps[0]);
                for (r, &y) in labels.iter().enumerate() {
                    for j in 0..classes {
                        let onehot = if j == y { S::one() } else { S::zero() };
                        g[r * classes + j] += d * (probs[r * classes + j] - onehot) * inv_n;
                    }
                }
            }
        }
        Op::Reshape => {
            if wants(ps[0]) {
                let g = grad_buf(grads, nodes, ps[0]);
                for (gv, &d) in g.iter_mut().zip(dy) {
                    *gv += d;
                }
            }
        }
    }
}

/// Channel/batch indexing for 2D batch norm: statistics run over the
/// non-channel axis.
#[derive(Clone, Copy)]
pub(crate) struct BnLayout {
    pub channels: usize,
    pub batch: usize,
    cols: usize,
    ch_axis: usize,
}

impl BnLayout {
    pub fn new(shape: &[usize], ch_axis: usize) -> Self {
        let [rows, cols] = shape[..] else {
            panic!("batch norm expects a 2D tensor, got {shape:?}")
        };
        let (channels, batch) = match ch_axis {
            1 => (cols, rows),
            0 => (rows, cols),
            _ => panic!("batch norm channel axis must be 0 or 1"),
        };
        BnLayout {
            channels,
            batch,
            cols,
            ch_axis,
        }
    }

    #[inline]
    pub fn idx(&self, c: usize, b: usize) -> usize {
        match self.ch_axis {
            1 => b * self.cols + c,
            _ => c * self.cols + b,
        }
    }
}

fn bn_affine_grads<S: Scalar>(
    nodes: &[Node<S>],
    ps: &[usize],
    dy: &[S],
    xhat: &[S],
    lay: BnLayout,
    grads: &mut [Option<Vec<S>>],
) {
    if nodes[ps[1]].needs_grad {
        let g = grad_buf(grads, nodes, ps[1]);
        for c in 0..lay.channels {
            for b in 0..lay.batch {
                let k = lay.idx(c, b);
                g[c] += dy[k] * xhat[k];
            }
        }
    }
    if nodes[ps[2]].needs_grad {
        let g = grad_buf(grads, nodes, ps[2]);
        for c in 0..lay.channels {
            for b in 0..lay.batch {
                g[c] += dy[lay.idx(c, b)];
            }
        }
    }
}
