use rand::Rng;

use crate::graph::{outer_axis_inner, BnLayout, Op};
use crate::{Graph, Scalar};

/// Handle to one node of a graph. Cheap to clone; all arithmetic methods
/// record a new node and return its handle. Shape mismatches and non-finite
/// values (when the graph's finite check is on) panic, since both are
/// programming errors rather than data conditions.
pub struct Tensor<S: Scalar> {
    pub(crate) graph: Graph<S>,
    pub(crate) id: usize,
}

impl<S: Scalar> Clone for Tensor<S> {
    fn clone(&self) -> Self {
        Tensor {
            graph: self.graph.clone(),
            id: self.id,
        }
    }
}

impl<S: Scalar> Tensor<S> {
    pub fn graph(&self) -> Graph<S> {
        self.graph.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.inner.borrow().nodes[self.id].shape.clone()
    }

    pub fn len(&self) -> usize {
        self.graph.inner.borrow().nodes[self.id].values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<S> {
        self.graph.inner.borrow().nodes[self.id].values.clone()
    }

    /// Gradient populated by the latest backward sweep, if this node was
    /// reached.
    pub fn grad(&self) -> Option<Vec<S>> {
        self.graph.inner.borrow().nodes[self.id].grad.clone()
    }

    pub fn scalar_value(&self) -> S {
        let inner = self.graph.inner.borrow();
        let v = &inner.nodes[self.id].values;
        assert_eq!(v.len(), 1, "scalar_value on non-scalar tensor");
        v[0]
    }

    /// Same values as a fresh non-differentiable leaf: gradient flow stops.
    pub fn detach(&self) -> Tensor<S> {
        let (shape, values) = {
            let inner = self.graph.inner.borrow();
            let n = &inner.nodes[self.id];
            (n.shape.clone(), n.values.clone())
        };
        self.graph.constant(&shape, values)
    }

    /// Reverse-mode sweep from this scalar; gradients are read back with
    /// `grad()`.
    pub fn backward(&self) {
        self.graph.backward_from(self.id);
    }

    fn assert_same_graph(&self, other: &Tensor<S>) {
        assert!(
            self.graph.same_graph(&other.graph),
            "tensors belong to different graphs"
        );
    }

    fn zip_elementwise(&self, other: &Tensor<S>, op: Op<S>, f: impl Fn(S, S) -> S) -> Tensor<S> {
        self.assert_same_graph(other);
        let (shape, values) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let b = &inner.nodes[other.id];
            assert_eq!(
                a.shape,
                b.shape,
                "{:?} vs {:?} in elementwise op",
                a.shape,
                b.shape
            );
            let values = a
                .values
                .iter()
                .zip(&b.values)
                .map(|(&x, &y)| f(x, y))
                .collect();
            (a.shape.clone(), values)
        };
        self.graph
            .push_node(shape, values, vec![self.id, other.id], op, false)
    }

    fn map_unary(&self, op: Op<S>, f: impl Fn(S) -> S) -> Tensor<S> {
        let (shape, values) = {
            let inner = self.graph.inner.borrow();
            let n = &inner.nodes[self.id];
            (n.shape.clone(), n.values.iter().map(|&x| f(x)).collect())
        };
        self.graph.push_node(shape, values, vec![self.id], op, false)
    }

    pub fn add(&self, other: &Tensor<S>) -> Tensor<S> {
        self.zip_elementwise(other, Op::Add, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor<S>) -> Tensor<S> {
        self.zip_elementwise(other, Op::Sub, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor<S>) -> Tensor<S> {
        self.zip_elementwise(other, Op::Mul, |a, b| a * b)
    }

    pub fn add_scalar(&self, c: S) -> Tensor<S> {
        self.map_unary(Op::AddScalar, |x| x + c)
    }

    pub fn scale(&self, c: S) -> Tensor<S> {
        self.map_unary(Op::Scale(c), |x| c * x)
    }

    pub fn relu(&self) -> Tensor<S> {
        self.map_unary(Op::Relu, |x| if x > S::zero() { x } else { S::zero() })
    }

    pub fn exp(&self) -> Tensor<S> {
        self.map_unary(Op::Exp, |x| x.exp())
    }

    pub fn log(&self) -> Tensor<S> {
        self.map_unary(Op::Log, |x| x.ln())
    }

    pub fn sqrt(&self) -> Tensor<S> {
        self.map_unary(Op::Sqrt, |x| x.sqrt())
    }

    /// x * clamp(x + 3, 0, 6) / 6.
    pub fn hardswish(&self) -> Tensor<S> {
        let three = S::from_f64(3.0);
        let six = S::from_f64(6.0);
        self.map_unary(Op::Hardswish, |x| {
            x * (x + three).max(S::zero()).min(six) / six
        })
    }

    pub fn matmul(&self, other: &Tensor<S>) -> Tensor<S> {
        self.assert_same_graph(other);
        let (m, k, n, values) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let b = &inner.nodes[other.id];
            let [m, k] = a.shape[..] else {
                panic!("matmul lhs must be 2D, got {:?}", a.shape)
            };
            let [k2, n] = b.shape[..] else {
                panic!("matmul rhs must be 2D, got {:?}", b.shape)
            };
            assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
            let mut values = vec![S::zero(); m * n];
            for r in 0..m {
                for c in 0..k {
                    let av = a.values[r * k + c];
                    if av == S::zero() {
                        continue;
                    }
                    let brow = &b.values[c * n..(c + 1) * n];
                    let out = &mut values[r * n..(r + 1) * n];
                    for j in 0..n {
                        out[j] += av * brow[j];
                    }
                }
            }
            (m, k, n, values)
        };
        self.graph.push_node(
            vec![m, n],
            values,
            vec![self.id, other.id],
            Op::Matmul { m, k, n },
            false,
        )
    }

    pub fn transpose(&self) -> Tensor<S> {
        let (rows, cols, values) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let [rows, cols] = a.shape[..] else {
                panic!("transpose expects 2D, got {:?}", a.shape)
            };
            let mut values = vec![S::zero(); rows * cols];
            for r in 0..rows {
                for c in 0..cols {
                    values[c * rows + r] = a.values[r * cols + c];
                }
            }
            (rows, cols, values)
        };
        self.graph
            .push_node(vec![cols, rows], values, vec![self.id], Op::Transpose, false)
    }

    /// Removes `axis`, averaging over it.
    pub fn mean_axis(&self, axis: usize) -> Tensor<S> {
        let (out_shape, values) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let (outer, len, inner_sz) = outer_axis_inner(&a.shape, axis);
            assert!(len > 0, "mean over empty axis");
            let mut out_shape = a.shape.clone();
            out_shape.remove(axis);
            let inv = S::one() / S::from_f64(len as f64);
            let mut values = vec![S::zero(); outer * inner_sz];
            for o in 0..outer {
                for l in 0..len {
                    for k in 0..inner_sz {
                        values[o * inner_sz + k] += a.values[(o * len + l) * inner_sz + k] * inv;
                    }
                }
            }
            (out_shape, values)
        };
        self.graph
            .push_node(out_shape, values, vec![self.id], Op::MeanAxis { axis }, false)
    }

    pub fn sum_all(&self) -> Tensor<S> {
        let total = {
            let inner = self.graph.inner.borrow();
            inner.nodes[self.id]
                .values
                .iter()
                .fold(S::zero(), |acc, &x| acc + x)
        };
        self.graph
            .push_node(vec![1], vec![total], vec![self.id], Op::SumAll, false)
    }

    pub fn mean_all(&self) -> Tensor<S> {
        let mean = {
            let inner = self.graph.inner.borrow();
            let v = &inner.nodes[self.id].values;
            assert!(!v.is_empty(), "mean of empty tensor");
            v.iter().fold(S::zero(), |acc, &x| acc + x) / S::from_f64(v.len() as f64)
        };
        self.graph
            .push_node(vec![1], vec![mean], vec![self.id], Op::MeanAll, false)
    }

    /// Max-subtracted softmax along one axis of a 2D tensor.
    pub fn softmax(&self, axis: usize) -> Tensor<S> {
        let (shape, values) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let [rows, cols] = a.shape[..] else {
                panic!("softmax expects 2D, got {:?}", a.shape)
            };
            assert!(axis < 2, "softmax axis must be 0 or 1");
            let mut values = vec![S::zero(); rows * cols];
            let (lanes, len, stride, base): (usize, usize, usize, usize) = if axis == 1 {
                (rows, cols, 1, cols)
            } else {
                (cols, rows, cols, 1)
            };
            for lane in 0..lanes {
                let at = |i: usize| lane * base + i * stride;
                let mut m = a.values[at(0)];
                for i in 1..len {
                    m = m.max(a.values[at(i)]);
                }
                let mut sum = S::zero();
                for i in 0..len {
                    let e = (a.values[at(i)] - m).exp();
                    values[at(i)] = e;
                    sum += e;
                }
                for i in 0..len {
                    values[at(i)] /= sum;
                }
            }
            (a.shape.clone(), values)
        };
        self.graph
            .push_node(shape, values, vec![self.id], Op::Softmax { axis }, false)
    }

    /// Per-row standardization over the feature (last) axis with epsilon
    /// 1e-5, then the per-feature affine `gain * xhat + bias`.
    pub fn layer_norm(&self, gain: &Tensor<S>, bias: &Tensor<S>) -> Tensor<S> {
        self.assert_same_graph(gain);
        self.assert_same_graph(bias);
        let eps = S::from_f64(1e-5);
        let (shape, values, xhat, inv_std) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let g = &inner.nodes[gain.id].values;
            let b = &inner.nodes[bias.id].values;
            let [rows, cols] = a.shape[..] else {
                panic!("layer_norm expects 2D, got {:?}", a.shape)
            };
            assert_eq!(g.len(), cols, "layer_norm gain length");
            assert_eq!(b.len(), cols, "layer_norm bias length");
            let inv_c = S::one() / S::from_f64(cols as f64);
            let mut values = vec![S::zero(); rows * cols];
            let mut xhat = vec![S::zero(); rows * cols];
            let mut inv_std = vec![S::zero(); rows];
            for r in 0..rows {
                let row = &a.values[r * cols..(r + 1) * cols];
                let mean = row.iter().fold(S::zero(), |acc, &x| acc + x) * inv_c;
                let var = row
                    .iter()
                    .fold(S::zero(), |acc, &x| acc + (x - mean) * (x - mean))
                    * inv_c;
                let istd = S::one() / (var + eps).sqrt();
                inv_std[r] = istd;
                for j in 0..cols {
                    let xh = (row[j] - mean) * istd;
                    xhat[r * cols + j] = xh;
                    values[r * cols + j] = xh * g[j] + b[j];
                }
            }
            (a.shape.clone(), values, xhat, inv_std)
        };
        self.graph.push_node(
            shape,
            values,
            vec![self.id, gain.id, bias.id],
            Op::LayerNorm { xhat, inv_std },
            false,
        )
    }

    /// Batch norm over the non-channel axis of a 2D tensor using batch
    /// statistics (biased variance, epsilon 1e-5). Returns the output along
    /// with the batch mean and variance per channel, so the caller can fold
    /// running-statistic updates after the step.
    pub fn batch_norm_train(
        &self,
        gain: &Tensor<S>,
        bias: &Tensor<S>,
        ch_axis: usize,
    ) -> (Tensor<S>, Vec<S>, Vec<S>) {
        self.assert_same_graph(gain);
        self.assert_same_graph(bias);
        let eps = S::from_f64(1e-5);
        let (shape, values, xhat, inv_std, means, vars) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let g = &inner.nodes[gain.id].values;
            let b = &inner.nodes[bias.id].values;
            let lay = BnLayout::new(&a.shape, ch_axis);
            assert_eq!(g.len(), lay.channels, "batch_norm gain length");
            assert_eq!(b.len(), lay.channels, "batch_norm bias length");
            assert!(lay.batch > 0, "batch_norm over empty batch");
            let inv_n = S::one() / S::from_f64(lay.batch as f64);
            let mut values = vec![S::zero(); a.values.len()];
            let mut xhat = vec![S::zero(); a.values.len()];
            let mut inv_std = vec![S::zero(); lay.channels];
            let mut means = vec![S::zero(); lay.channels];
            let mut vars = vec![S::zero(); lay.channels];
            for c in 0..lay.channels {
                let mut mean = S::zero();
                for bi in 0..lay.batch {
                    mean += a.values[lay.idx(c, bi)];
                }
                mean *= inv_n;
                let mut var = S::zero();
                for bi in 0..lay.batch {
                    let d = a.values[lay.idx(c, bi)] - mean;
                    var += d * d;
                }
                var *= inv_n;
                let istd = S::one() / (var + eps).sqrt();
                means[c] = mean;
                vars[c] = var;
                inv_std[c] = istd;
                for bi in 0..lay.batch {
                    let k = lay.idx(c, bi);
                    let xh = (a.values[k] - mean) * istd;
                    xhat[k] = xh;
                    values[k] = xh * g[c] + b[c];
                }
            }
            (a.shape.clone(), values, xhat, inv_std, means, vars)
        };
        let out = self.graph.push_node(
            shape,
            values,
            vec![self.id, gain.id, bias.id],
            Op::BatchNormTrain {
                ch_axis,
                xhat,
                inv_std,
            },
            false,
        );
        (out, means, vars)
    }

    /// Batch norm with frozen running statistics.
    pub fn batch_norm_eval(
        &self,
        gain: &Tensor<S>,
        bias: &Tensor<S>,
        running_mean: &[S],
        running_var: &[S],
        ch_axis: usize,
    ) -> Tensor<S> {
        self.assert_same_graph(gain);
        self.assert_same_graph(bias);
        let eps = S::from_f64(1e-5);
        let (shape, values, xhat, inv_std) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let g = &inner.nodes[gain.id].values;
            let b = &inner.nodes[bias.id].values;
            let lay = BnLayout::new(&a.shape, ch_axis);
            assert_eq!(running_mean.len(), lay.channels, "running mean length");
            assert_eq!(running_var.len(), lay.channels, "running var length");
            assert_eq!(g.len(), lay.channels, "batch_norm gain length");
            assert_eq!(b.len(), lay.channels, "batch_norm bias length");
            let mut values = vec![S::zero(); a.values.len()];
            let mut xhat = vec![S::zero(); a.values.len()];
            let mut inv_std = vec![S::zero(); lay.channels];
            for c in 0..lay.channels {
                let istd = S::one() / (running_var[c] + eps).sqrt();
                inv_std[c] = istd;
                for bi in 0..lay.batch {
                    let k = lay.idx(c, bi);
                    let xh = (a.values[k] - running_mean[c]) * istd;
                    xhat[k] = xh;
                    values[k] = xh * g[c] + b[c];
                }
            }
            (a.shape.clone(), values, xhat, inv_std)
        };
        self.graph.push_node(
            shape,
            values,
            vec![self.id, gain.id, bias.id],
            Op::BatchNormEval {
                ch_axis,
                xhat,
                inv_std,
            },
            false,
        )
    }

    /// 2D cross-correlation with "same" zero padding before striding:
    /// output spatial size is ceil(input / stride). Input [Ci, H, W],
    /// kernels [Co, Ci, KH, KW], optional per-output-channel bias [Co].
    pub fn conv2d(&self, kernels: &Tensor<S>, bias: Option<&Tensor<S>>, stride: usize) -> Tensor<S> {
        self.assert_same_graph(kernels);
        if let Some(b) = bias {
            self.assert_same_graph(b);
        }
        assert!(stride >= 1, "conv2d stride must be >= 1");
        let (out_shape, values, pad) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let k = &inner.nodes[kernels.id];
            let [ci, h, w] = a.shape[..] else {
                panic!("conv2d input must be [C, H, W], got {:?}", a.shape)
            };
            let [co, kci, kh, kw] = k.shape[..] else {
                panic!("conv2d kernels must be [Co, Ci, KH, KW], got {:?}", k.shape)
            };
            assert_eq!(ci, kci, "conv2d channel mismatch");
            let ho = h.div_ceil(stride);
            let wo = w.div_ceil(stride);
            let pad_h = ((ho - 1) * stride + kh).saturating_sub(h);
            let pad_w = ((wo - 1) * stride + kw).saturating_sub(w);
            let (pt, pl) = (pad_h / 2, pad_w / 2);
            let bias_vals = bias.map(|b| {
                let bv = &inner.nodes[b.id];
                assert_eq!(bv.shape, vec![co], "conv2d bias must be [Co]");
                bv.values.clone()
            });
            let mut values = vec![S::zero(); co * ho * wo];
            for o in 0..co {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = bias_vals.as_ref().map_or(S::zero(), |b| b[o]);
                        for c in 0..ci {
                            for ky in 0..kh {
                                let iy = (oy * stride + ky) as isize - pt as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ix = (ox * stride + kx) as isize - pl as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    acc += a.values[(c * h + iy as usize) * w + ix as usize]
                                        * k.values[((o * ci + c) * kh + ky) * kw + kx];
                                }
                            }
                        }
                        values[(o * ho + oy) * wo + ox] = acc;
                    }
                }
            }
            (vec![co, ho, wo], values, [pt, pl])
        };
        let mut parents = vec![self.id, kernels.id];
        if let Some(b) = bias {
            parents.push(b.id);
        }
        self.graph
            .push_node(out_shape, values, parents, Op::Conv2d { stride, pad }, false)
    }

    /// Row selection with repetition allowed; gradient scatter-adds.
    pub fn gather_rows(&self, indices: &[usize]) -> Tensor<S> {
        let (cols, values) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let [rows, cols] = a.shape[..] else {
                panic!("gather_rows expects 2D, got {:?}", a.shape)
            };
            let mut values = Vec::with_capacity(indices.len() * cols);
            for &r in indices {
                assert!(r < rows, "gather_rows index {r} out of {rows}");
                values.extend_from_slice(&a.values[r * cols..(r + 1) * cols]);
            }
            (cols, values)
        };
        self.graph.push_node(
            vec![indices.len(), cols],
            values,
            vec![self.id],
            Op::GatherRows {
                indices: indices.to_vec(),
            },
            false,
        )
    }

    fn row_broadcast(&self, row: &Tensor<S>, op: Op<S>, f: impl Fn(S, S) -> S) -> Tensor<S> {
        self.assert_same_graph(row);
        let (shape, values) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let r = &inner.nodes[row.id];
            let [rows, cols] = a.shape[..] else {
                panic!("row broadcast expects 2D, got {:?}", a.shape)
            };
            assert_eq!(r.values.len(), cols, "row length {} != {cols}", r.values.len());
            let mut values = vec![S::zero(); rows * cols];
            for ri in 0..rows {
                for j in 0..cols {
                    values[ri * cols + j] = f(a.values[ri * cols + j], r.values[j]);
                }
            }
            (a.shape.clone(), values)
        };
        self.graph
            .push_node(shape, values, vec![self.id, row.id], op, false)
    }

    /// Adds a per-feature row vector to every row.
    pub fn add_row(&self, row: &Tensor<S>) -> Tensor<S> {
        self.row_broadcast(row, Op::AddRow, |a, b| a + b)
    }

    /// Multiplies every row by a per-feature row vector.
    pub fn mul_row(&self, row: &Tensor<S>) -> Tensor<S> {
        self.row_broadcast(row, Op::MulRow, |a, b| a * b)
    }

    /// Stochastic depth on a whole tensor (one sample's residual branch):
    /// in train mode the branch is dropped with probability `rate` and
    /// survivors are scaled by 1/(1-rate); eval mode and rate 0 are the
    /// identity.
    pub fn drop_path<R: Rng>(&self, rate: f64, train: bool, rng: &mut R) -> Tensor<S> {
        assert!((0.0..1.0).contains(&rate), "drop_path rate in [0, 1)");
        if !train || rate == 0.0 {
            return self.clone();
        }
        let kept = !rng.gen_bool(rate);
        let scale = S::from_f64(1.0 / (1.0 - rate));
        let (shape, values) = {
            let inner = self.graph.inner.borrow();
            let n = &inner.nodes[self.id];
            let values = if kept {
                n.values.iter().map(|&x| x * scale).collect()
            } else {
                vec![S::zero(); n.values.len()]
            };
            (n.shape.clone(), values)
        };
        self.graph
            .push_node(shape, values, vec![self.id], Op::DropPath { kept, scale }, false)
    }

    /// u.v / (|u| |v| + 1e-8) of two equally sized 1D tensors, as a scalar.
    pub fn cosine_similarity(&self, other: &Tensor<S>) -> Tensor<S> {
        self.assert_same_graph(other);
        let (dot, nu, nv) = {
            let inner = self.graph.inner.borrow();
            let u = &inner.nodes[self.id];
            let v = &inner.nodes[other.id];
            assert_eq!(u.shape.len(), 1, "cosine_similarity expects 1D tensors");
            assert_eq!(u.shape, v.shape, "cosine_similarity length mismatch");
            let mut dot = S::zero();
            let mut uu = S::zero();
            let mut vv = S::zero();
            for (&a, &b) in u.values.iter().zip(&v.values) {
                dot += a * b;
                uu += a * a;
                vv += b * b;
            }
            (dot, uu.sqrt(), vv.sqrt())
        };
        let value = dot / (nu * nv + S::from_f64(1e-8));
        self.graph.push_node(
            vec![1],
            vec![value],
            vec![self.id, other.id],
            Op::CosineSim { dot, nu, nv },
            false,
        )
    }

    /// Mean cross-entropy of logit rows against integer labels, computed as
    /// logsumexp(row) - row[label] with the row max detached for stability.
    pub fn cross_entropy_logits(&self, labels: &[usize]) -> Tensor<S> {
        let (loss, probs) = {
            let inner = self.graph.inner.borrow();
            let a = &inner.nodes[self.id];
            let [rows, cols] = a.shape[..] else {
                panic!("cross_entropy_logits expects 2D, got {:?}", a.shape)
            };
            assert_eq!(labels.len(), rows, "one label per logit row");
            let mut probs = vec![S::zero(); rows * cols];
            let mut total = S::zero();
            for (r, &y) in labels.iter().enumerate() {
                assert!(y < cols, "label {y} out of {cols} classes");
                let row = &a.values[r * cols..(r + 1) * cols];
                let m = row.iter().fold(row[0], |acc, &x| acc.max(x));
                let mut sum = S::zero();
                for j in 0..cols {
                    let e = (row[j] - m).exp();
                    probs[r * cols + j] = e;
                    sum += e;
                }
                for j in 0..cols {
                    probs[r * cols + j] /= sum;
                }
                total += m + sum.ln() - row[y];
            }
            (total / S::from_f64(rows as f64), probs)
        };
        self.graph.push_node(
            vec![1],
            vec![loss],
            vec![self.id],
            Op::CrossEntropyLogits {
                labels: labels.to_vec(),
                probs,
            },
            false,
        )
    }

    pub fn reshape(&self, new_shape: &[usize]) -> Tensor<S> {
        let values = {
            let inner = self.graph.inner.borrow();
            let n = &inner.nodes[self.id];
            assert_eq!(
                n.values.len(),
                new_shape.iter().product::<usize>(),
                "reshape {:?} -> {:?}",
                n.shape,
                new_shape
            );
            n.values.clone()
        };
        self.graph
            .push_node(new_shape.to_vec(), values, vec![self.id], Op::Reshape, false)
    }
}

/// Concatenates tensors along `axis`; all other dims must agree.
pub fn concat<S: Scalar>(parts: &[Tensor<S>], axis: usize) -> Tensor<S> {
    assert!(!parts.is_empty(), "concat of zero tensors");
    let graph = parts[0].graph();
    let (out_shape, values) = {
        let inner = graph.inner.borrow();
        let base = inner.nodes[parts[0].id].shape.clone();
        assert!(axis < base.len(), "concat axis {axis} out of range");
        let mut axis_total = 0usize;
        for p in parts {
            assert!(
                graph.same_graph(&p.graph),
                "concat tensors belong to different graphs"
            );
            let s = &inner.nodes[p.id].shape;
            assert_eq!(s.len(), base.len(), "concat rank mismatch");
            for (d, (&a, &b)) in s.iter().zip(&base).enumerate() {
                assert!(
                    d == axis || a == b,
                    "concat dim {d} mismatch: {a} vs {b}"
                );
            }
            axis_total += s[axis];
        }
        let mut out_shape = base.clone();
        out_shape[axis] = axis_total;
        let (outer, _, inner_sz) = outer_axis_inner(&out_shape, axis);
        let mut values = vec![S::zero(); outer * axis_total * inner_sz];
        let mut offset = 0usize;
        for p in parts {
            let n = &inner.nodes[p.id];
            let part_axis = n.shape[axis];
            for o in 0..outer {
                for a in 0..part_axis {
                    let src = (o * part_axis + a) * inner_sz;
                    let dst = ((o * axis_total) + offset + a) * inner_sz;
                    values[dst..dst + inner_sz].copy_from_slice(&n.values[src..src + inner_sz]);
                }
            }
            offset += part_axis;
        }
        (out_shape, values)
    };
    let parents = parts.iter().map(|p| p.id).collect();
    graph.push_node(out_shape, values, parents, Op::Concat { axis }, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn matmul_identity_returns_input() {
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let eye = g.constant(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(x.matmul(&eye).values(), x.values());
    }

    #[test]
    fn matmul_against_hand_product() {
        let g: Graph<f64> = Graph::new();
        let a = g.leaf(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let b = g.leaf(&[2, 2], vec![5.0, 6.0, 7.0, 8.0]);
        assert_eq!(a.matmul(&b).values(), vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[3], vec![-1.0, 0.0, 2.0]);
        assert_eq!(x.relu().values(), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn softmax_uniform_and_shift_invariant() {
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[1, 2], vec![0.0, 0.0]);
        assert_eq!(x.softmax(1).values(), vec![0.5, 0.5]);

        let y = g.leaf(&[2, 3], vec![0.3, -1.0, 2.0, 4.0, 4.5, -0.2]);
        let shifted = y.add_scalar(17.5);
        let a = y.softmax(1).values();
        let b = shifted.softmax(1).values();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
        for row in a.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        let cols = y.softmax(0).values();
        for c in 0..3 {
            assert!((cols[c] + cols[3 + c] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_constant_row_returns_bias() {
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[1, 4], vec![5.0; 4]);
        let gain = g.leaf(&[4], vec![2.0; 4]);
        let bias = g.leaf(&[4], vec![0.1, 0.2, 0.3, 0.4]);
        let y = x.layer_norm(&gain, &bias).values();
        for (v, b) in y.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((v - b).abs() < 1e-9, "constant row normalizes to zero");
        }
    }

    #[test]
    fn layer_norm_standardizes_rows() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let g: Graph<f64> = Graph::new();
        let vals: Vec<f64> = (0..40).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let x = g.leaf(&[5, 8], vals);
        let gain = g.constant(&[8], vec![1.0; 8]);
        let bias = g.constant(&[8], vec![0.0; 8]);
        let y = x.layer_norm(&gain, &bias).values();
        for row in y.chunks(8) {
            let mean = row.iter().sum::<f64>() / 8.0;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn batch_norm_eval_identity_stats_returns_input() {
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[3, 2], vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.5]);
        let gain = g.leaf(&[2], vec![1.0, 1.0]);
        let bias = g.leaf(&[2], vec![0.0, 0.0]);
        let y = x.batch_norm_eval(&gain, &bias, &[0.0, 0.0], &[1.0, 1.0], 1);
        for (a, b) in y.values().iter().zip(x.values()) {
            assert!((a - b).abs() < 1e-5, "eps 1e-5 is the only deviation");
        }
    }

    #[test]
    fn batch_norm_train_centers_each_channel() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let g: Graph<f64> = Graph::new();
        let vals: Vec<f64> = (0..24).map(|_| rng.gen_range(-3.0..5.0)).collect();
        let x = g.leaf(&[6, 4], vals);
        let gain = g.leaf(&[4], vec![1.0; 4]);
        let bias = g.leaf(&[4], vec![0.0; 4]);
        let (y, means, vars) = x.batch_norm_train(&gain, &bias, 1);
        let yv = y.values();
        for c in 0..4 {
            let col: Vec<f64> = (0..6).map(|r| yv[r * 4 + c]).collect();
            let mean = col.iter().sum::<f64>() / 6.0;
            assert!(mean.abs() < 1e-6);
            assert!(vars[c] >= 0.0);
            let xv = x.values();
            let xmean = (0..6).map(|r| xv[r * 4 + c]).sum::<f64>() / 6.0;
            assert!((means[c] - xmean).abs() < 1e-12);
        }
    }

    #[test]
    fn conv2d_identity_kernel_returns_input() {
        let g: Graph<f64> = Graph::new();
        let vals: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let x = g.leaf(&[1, 3, 4], vals.clone());
        let k = g.leaf(&[1, 1, 1, 1], vec![1.0]);
        assert_eq!(x.conv2d(&k, None, 1).values(), vals);
    }

    #[test]
    fn conv2d_box_kernel_sums_interior() {
        // All-ones 2x2 kernel on constant input: interior outputs see four
        // taps; same-padding edges see fewer.
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[1, 4, 4], vec![1.5; 16]);
        let k = g.leaf(&[1, 1, 2, 2], vec![1.0; 4]);
        let y = x.conv2d(&k, None, 1);
        assert_eq!(y.shape(), vec![1, 4, 4]);
        let v = y.values();
        for oy in 0..3 {
            for ox in 0..3 {
                assert_eq!(v[oy * 4 + ox], 6.0, "4 taps x 1.5 at ({oy},{ox})");
            }
        }
        assert_eq!(v[15], 1.5, "bottom-right corner keeps one tap");
    }

    #[test]
    fn conv2d_stride_two_halves_output() {
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[2, 6, 6], vec![0.25; 72]);
        let k = g.leaf(&[3, 2, 3, 3], vec![0.1; 54]);
        let b = g.leaf(&[3], vec![1.0, 2.0, 3.0]);
        let y = x.conv2d(&k, Some(&b), 2);
        assert_eq!(y.shape(), vec![3, 3, 3]);
        // Center output: full 3x3x2 window = 18 taps x 0.25 x 0.1 + bias.
        let v = y.values();
        assert!((v[4] - (18.0 * 0.25 * 0.1 + 1.0)).abs() < 1e-12);
        assert!((v[9 + 4] - (18.0 * 0.25 * 0.1 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn hardswish_known_points() {
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[4], vec![0.0, 3.0, -3.0, -4.0]);
        let y = x.hardswish().values();
        assert_eq!(y[0], 0.0);
        assert_eq!(y[1], 3.0);
        assert_eq!(y[2], 0.0);
        assert_eq!(y[3], 0.0);
    }

    #[test]
    fn cosine_similarity_endpoints() {
        let g: Graph<f64> = Graph::new();
        let u = g.leaf(&[3], vec![1.0, -2.0, 0.5]);
        let m = u.scale(-1.0);
        assert!((u.cosine_similarity(&u).scalar_value() - 1.0).abs() < 1e-7);
        assert!((u.cosine_similarity(&m).scalar_value() + 1.0).abs() < 1e-7);
    }

    #[test]
    fn cross_entropy_uniform_logits_is_log_k() {
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[2, 4], vec![0.7; 8]);
        let loss = x.cross_entropy_logits(&[1, 3]).scalar_value();
        assert!((loss - (4.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn gather_add_row_mul_row_semantics() {
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(x.gather_rows(&[2, 0, 2]).values(), vec![5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        let row = g.leaf(&[2], vec![10.0, -1.0]);
        assert_eq!(x.add_row(&row).values(), vec![11.0, 1.0, 13.0, 3.0, 15.0, 5.0]);
        assert_eq!(x.mul_row(&row).values(), vec![10.0, -2.0, 30.0, -4.0, 50.0, -6.0]);
    }

    #[test]
    fn reductions_and_reshape() {
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(x.mean_axis(0).values(), vec![2.5, 3.5, 4.5]);
        assert_eq!(x.mean_axis(1).values(), vec![2.0, 5.0]);
        assert_eq!(x.sum_all().scalar_value(), 21.0);
        assert_eq!(x.mean_all().scalar_value(), 3.5);
        assert_eq!(x.reshape(&[3, 2]).shape(), vec![3, 2]);
        assert_eq!(x.transpose().values(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn concat_axis_blocks() {
        let g: Graph<f64> = Graph::new();
        let a = g.leaf(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let b = g.leaf(&[1, 2], vec![5.0, 6.0]);
        assert_eq!(concat(&[a.clone(), b], 0).values(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let c = g.leaf(&[2, 1], vec![7.0, 8.0]);
        assert_eq!(concat(&[a, c], 1).values(), vec![1.0, 2.0, 7.0, 3.0, 4.0, 8.0]);
    }

    #[test]
    fn drop_path_identity_cases() {
        let g: Graph<f64> = Graph::new();
        let x = g.leaf(&[3], vec![1.0, 2.0, 3.0]);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert_eq!(x.drop_path(0.0, true, &mut rng).values(), x.values());
        assert_eq!(x.drop_path(0.6, false, &mut rng).values(), x.values());
    }

    #[test]
    fn drop_path_monte_carlo_mean_is_unbiased() {
        let rate = 0.3;
        let trials = 10_000usize;
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let mut sum = 0.0f64;
        for _ in 0..trials {
            let g: Graph<f64> = Graph::new();
            let x = g.leaf(&[1], vec![2.0]);
            sum += x.drop_path(rate, true, &mut rng).scalar_value();
        }
        let mean = sum / trials as f64;
        // Per draw: 0 w.p. rate, else 2/(1-rate); variance 4 rate/(1-rate).
        let sigma = (4.0 * rate / (1.0 - rate) / trials as f64).sqrt();
        assert!(
            (mean - 2.0).abs() < 3.0 * sigma,
            "mean {mean} vs 2.0 (3 sigma {})",
            3.0 * sigma
        );
    }
}
