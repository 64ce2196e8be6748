//! Dynamically recorded computation graph with reverse-mode differentiation.
//!
//! A [`Graph`] is built fresh for every forward pass. Leaves are either
//! parameters borrowed (by value) from a [`ParamStore`], differentiable
//! inputs, or constants. [`Graph::backward`] walks the tape in reverse and
//! adds `d root / d param` into each parameter's gradient buffer.
//!
//! Shape errors in op construction are programming errors and panic.

use std::cell::RefCell;

use super::linalg::{self, ConvGeom};
use super::{ParamId, ParamStore, Tensor};
use crate::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf { param: Option<ParamId> },
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    BroadcastRows(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Clamp(Var, f64, f64),
    LogSoftmax(Var),
    LogSigmoid(Var),
    Reshape(Var),
    AddChannelBias(Var, Var),
    Conv2d { x: Var, w: Var, geom: ConvGeom },
    ConvTranspose2d { x: Var, w: Var, geom: ConvGeom },
}

struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

/// Per-node adjoints produced by [`Graph::gradients`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Adjoint of `v`, or `None` when `v` does not influence the root or
    /// was recorded without gradient tracking.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, shape: Vec<usize>, value: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        Var(nodes.len() - 1)
    }

    fn needs(&self, vs: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vs.iter().any(|v| nodes[v.0].needs_grad)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].shape.clone()
    }

    /// Copy of the value at `v`.
    pub fn value(&self, v: Var) -> Tensor {
        let nodes = self.nodes.borrow();
        let n = &nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node shape")
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[v.0].value.len(), 1, "scalar() on non-scalar node");
        nodes[v.0].value[0]
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[a.0];
            (n.shape.clone(), n.value.iter().map(|&x| f(x)).collect())
        };
        let needs = self.needs(&[a]);
        self.push(shape, value, op, needs)
    }

    fn binary_same(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op, name: &str) -> Var {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let (na, nb) = (&nodes[a.0], &nodes[b.0]);
            assert_eq!(na.shape, nb.shape, "{name}: shape mismatch");
            (
                na.shape.clone(),
                na.value.iter().zip(&nb.value).map(|(&x, &y)| f(x, y)).collect(),
            )
        };
        let needs = self.needs(&[a, b]);
        self.push(shape, value, op, needs)
    }

    // ---- leaves ----

    /// Constant leaf: never receives a gradient.
    pub fn constant(&self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Leaf { param: None }, false)
    }

    /// Differentiable leaf not tied to any parameter (its adjoint is
    /// available through [`Graph::gradients`]).
    pub fn input(&self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Leaf { param: None }, true)
    }

    /// Parameter leaf. Gradients flow back into `store` on backward when the
    /// parameter has `requires_grad` set.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var {
        let t = store.get(id);
        self.push(
            t.shape().to_vec(),
            t.data().to_vec(),
            Op::Leaf { param: Some(id) },
            t.requires_grad(),
        )
    }

    /// Parameter value used as a constant: the gradient boundary used to
    /// freeze one player of the adversarial game.
    pub fn frozen_param(&self, store: &ParamStore, id: ParamId) -> Var {
        self.constant(store.get(id).clone())
    }

    /// Stop-gradient: a constant leaf holding the current value of `v`.
    pub fn detach(&self, v: Var) -> Var {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            (nodes[v.0].shape.clone(), nodes[v.0].value.clone())
        };
        self.push(shape, value, Op::Leaf { param: None }, false)
    }

    // ---- arithmetic ----

    /// `[n,k] x [k,m] -> [n,m]`.
    pub fn matmul(&self, a: Var, b: Var) -> Var {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let (na, nb) = (&nodes[a.0], &nodes[b.0]);
            assert!(
                na.shape.len() == 2 && nb.shape.len() == 2 && na.shape[1] == nb.shape[0],
                "matmul: incompatible shapes {:?} x {:?}",
                na.shape,
                nb.shape
            );
            let (n, k, m) = (na.shape[0], na.shape[1], nb.shape[1]);
            let mut out = vec![0.0; n * m];
            linalg::gemm(n, k, m, &na.value, false, &nb.value, false, &mut out, false);
            (vec![n, m], out)
        };
        let needs = self.needs(&[a, b]);
        self.push(shape, value, Op::MatMul(a, b), needs)
    }

    pub fn add(&self, a: Var, b: Var) -> Var {
        self.binary_same(a, b, |x, y| x + y, Op::Add(a, b), "add")
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        self.binary_same(a, b, |x, y| x - y, Op::Sub(a, b), "sub")
    }

    /// Elementwise product.
    pub fn mul(&self, a: Var, b: Var) -> Var {
        self.binary_same(a, b, |x, y| x * y, Op::Mul(a, b), "mul")
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn neg(&self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn square(&self, a: Var) -> Var {
        self.mul(a, a)
    }

    pub fn relu(&self, a: Var) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(a))
    }

    pub fn exp(&self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Log(a))
    }

    /// Clamp into `[lo, hi]`; the derivative is zero outside the open interval.
    pub fn clamp(&self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    /// `log(sigmoid(x))`, evaluated stably.
    pub fn log_sigmoid(&self, a: Var) -> Var {
        self.unary(a, log_sigmoid, Op::LogSigmoid(a))
    }

    /// Sum of every element, as a `[1]` tensor.
    pub fn sum(&self, a: Var) -> Var {
        let s = {
            let nodes = self.nodes.borrow();
            nodes[a.0].value.iter().sum::<f64>()
        };
        let needs = self.needs(&[a]);
        self.push(vec![1], vec![s], Op::Sum(a), needs)
    }

    pub fn mean(&self, a: Var) -> Var {
        let n = self.nodes.borrow()[a.0].value.len();
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    /// Repeats a `[m]` (or `[1,m]`) row `rows` times into `[rows, m]`.
    pub fn broadcast_rows(&self, a: Var, rows: usize) -> Var {
        let (m, value) = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            let m = *na.shape.last().unwrap();
            assert_eq!(na.value.len(), m, "broadcast_rows expects a single row");
            let mut v = Vec::with_capacity(rows * m);
            for _ in 0..rows {
                v.extend_from_slice(&na.value);
            }
            (m, v)
        };
        let needs = self.needs(&[a]);
        self.push(vec![rows, m], value, Op::BroadcastRows(a), needs)
    }

    /// `x [n,m] + b [m]` broadcast over rows.
    pub fn add_row(&self, x: Var, b: Var) -> Var {
        let n = self.nodes.borrow()[x.0].shape[0];
        let bb = self.broadcast_rows(b, n);
        self.add(x, bb)
    }

    /// Concatenates rank-2 tensors along columns.
    pub fn concat_cols(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let n = nodes[parts[0].0].shape[0];
            let widths: Vec<usize> = parts
                .iter()
                .map(|p| {
                    let s = &nodes[p.0].shape;
                    assert!(s.len() == 2 && s[0] == n, "concat_cols: bad shape {s:?}");
                    s[1]
                })
                .collect();
            let total: usize = widths.iter().sum();
            let mut v = Vec::with_capacity(n * total);
            for r in 0..n {
                for (p, &w) in parts.iter().zip(&widths) {
                    v.extend_from_slice(&nodes[p.0].value[r * w..(r + 1) * w]);
                }
            }
            (vec![n, total], v)
        };
        let needs = self.needs(parts);
        self.push(shape, value, Op::ConcatCols(parts.to_vec()), needs)
    }

    /// Columns `start..start+width` of a rank-2 tensor.
    pub fn slice_cols(&self, a: Var, start: usize, width: usize) -> Var {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            assert!(na.shape.len() == 2 && start + width <= na.shape[1], "slice_cols out of range");
            let (n, m) = (na.shape[0], na.shape[1]);
            let mut v = Vec::with_capacity(n * width);
            for r in 0..n {
                v.extend_from_slice(&na.value[r * m + start..r * m + start + width]);
            }
            (vec![n, width], v)
        };
        let needs = self.needs(&[a]);
        self.push(shape, value, Op::SliceCols(a, start), needs)
    }

    /// Row-wise log-softmax of a rank-2 tensor.
    pub fn log_softmax(&self, a: Var) -> Var {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            assert_eq!(na.shape.len(), 2);
            let m = na.shape[1];
            let mut v = na.value.clone();
            for row in v.chunks_mut(m) {
                let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = mx + row.iter().map(|x| (x - mx).exp()).sum::<f64>().ln();
                row.iter_mut().for_each(|x| *x -= lse);
            }
            (na.shape.clone(), v)
        };
        let needs = self.needs(&[a]);
        self.push(shape, value, Op::LogSoftmax(a), needs)
    }

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Var {
        let value = {
            let nodes = self.nodes.borrow();
            assert_eq!(
                nodes[a.0].value.len(),
                shape.iter().product::<usize>(),
                "reshape: element count changes"
            );
            nodes[a.0].value.clone()
        };
        let needs = self.needs(&[a]);
        self.push(shape.to_vec(), value, Op::Reshape(a), needs)
    }

    /// `x [n,c,h,w] + b [c]`.
    pub fn add_channel_bias(&self, x: Var, b: Var) -> Var {
        let (shape, value) = {
            let nodes = self.nodes.borrow();
            let (nx, nb) = (&nodes[x.0], &nodes[b.0]);
            assert_eq!(nx.shape.len(), 4);
            let c = nx.shape[1];
            assert_eq!(nb.value.len(), c, "add_channel_bias: bias length");
            let hw = nx.shape[2] * nx.shape[3];
            let mut v = nx.value.clone();
            for (i, blk) in v.chunks_mut(hw).enumerate() {
                let bias = nb.value[i % c];
                blk.iter_mut().for_each(|p| *p += bias);
            }
            (nx.shape.clone(), v)
        };
        let needs = self.needs(&[x, b]);
        self.push(shape, value, Op::AddChannelBias(x, b), needs)
    }

    /// 2-D convolution. `x` is `[n,c,h,w]`, `w` is `[o,c,k,k]`.
    pub fn conv2d(&self, x: Var, w: Var, stride: usize, pad: usize) -> Var {
        let (geom, shape, value) = {
            let nodes = self.nodes.borrow();
            let (nx, nw) = (&nodes[x.0], &nodes[w.0]);
            assert!(nx.shape.len() == 4 && nw.shape.len() == 4, "conv2d expects rank-4");
            assert_eq!(nx.shape[1], nw.shape[1], "conv2d: channel mismatch");
            assert_eq!(nw.shape[2], nw.shape[3], "conv2d: square kernels only");
            let geom = ConvGeom {
                channels: nx.shape[1],
                height: nx.shape[2],
                width: nx.shape[3],
                kernel: nw.shape[2],
                stride,
                pad,
            };
            let (n, o) = (nx.shape[0], nw.shape[0]);
            let (oh, ow) = (geom.out_height(), geom.out_width());
            let img = geom.channels * geom.height * geom.width;
            let per_out = o * oh * ow;
            let mut out = vec![0.0; n * per_out];
            crate::exec::for_each_chunk_mut(&mut out, per_out, |i, dst| {
                let mut cols = vec![0.0; geom.col_rows() * geom.col_cols()];
                linalg::im2col(&geom, &nx.value[i * img..(i + 1) * img], &mut cols);
                linalg::gemm(o, geom.col_rows(), geom.col_cols(), &nw.value, false, &cols, false, dst, false);
            });
            (geom, vec![n, o, oh, ow], out)
        };
        let needs = self.needs(&[x, w]);
        self.push(shape, value, Op::Conv2d { x, w, geom }, needs)
    }

    /// Transposed 2-D convolution (the adjoint of [`Graph::conv2d`] in its
    /// data argument). `x` is `[n,c_in,h,w]`, `w` is `[c_in,c_out,k,k]`; the
    /// output is `[n, c_out, (h-1)*stride - 2*pad + k, ...]`.
    pub fn conv_transpose2d(&self, x: Var, w: Var, stride: usize, pad: usize) -> Var {
        let (geom, shape, value) = {
            let nodes = self.nodes.borrow();
            let (nx, nw) = (&nodes[x.0], &nodes[w.0]);
            assert!(nx.shape.len() == 4 && nw.shape.len() == 4, "conv_transpose2d expects rank-4");
            assert_eq!(nx.shape[1], nw.shape[0], "conv_transpose2d: channel mismatch");
            assert_eq!(nw.shape[2], nw.shape[3]);
            let k = nw.shape[2];
            let (n, cin, h, wd) = (nx.shape[0], nx.shape[1], nx.shape[2], nx.shape[3]);
            let cout = nw.shape[1];
            let geom = ConvGeom {
                channels: cout,
                height: (h - 1) * stride + k - 2 * pad,
                width: (wd - 1) * stride + k - 2 * pad,
                kernel: k,
                stride,
                pad,
            };
            assert_eq!(geom.out_height(), h);
            assert_eq!(geom.out_width(), wd);
            let per_out = cout * geom.height * geom.width;
            let mut out = vec![0.0; n * per_out];
            crate::exec::for_each_chunk_mut(&mut out, per_out, |i, dst| {
                let mut cols = vec![0.0; geom.col_rows() * geom.col_cols()];
                linalg::gemm(
                    geom.col_rows(),
                    cin,
                    h * wd,
                    &nw.value,
                    true,
                    &nx.value[i * cin * h * wd..(i + 1) * cin * h * wd],
                    false,
                    &mut cols,
                    false,
                );
                linalg::col2im(&geom, &cols, dst);
            });
            (geom, vec![n, cout, geom.height, geom.width], out)
        };
        let needs = self.needs(&[x, w]);
        self.push(shape, value, Op::ConvTranspose2d { x, w, geom }, needs)
    }

    // ---- differentiation ----

    /// Adjoints of every tracked node with respect to the scalar `root`.
    pub fn gradients(&self, root: Var) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let rn = &nodes[root.0];
        if rn.value.len() != 1 {
            return Err(Error::NonScalarRoot(rn.shape.clone()));
        }
        for (i, n) in nodes.iter().enumerate().take(root.0 + 1) {
            if n.value.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "graph node {i} (shape {:?}) holds a non-finite value",
                    n.shape
                )));
            }
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &nodes[i];
            if !node.needs_grad {
                continue;
            }
            let mut acc = |v: Var, g: Vec<f64>| {
                if !nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(buf) => add_into(buf, &g),
                    slot @ None => *slot = Some(g),
                }
            };
            match &node.op {
                Op::Leaf { .. } => {
                    grads[i] = Some(dy);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (na, nb) = (&nodes[a.0], &nodes[b.0]);
                    let (n, k, m) = (na.shape[0], na.shape[1], nb.shape[1]);
                    if na.needs_grad {
                        let mut da = vec![0.0; n * k];
                        linalg::gemm(n, m, k, &dy, false, &nb.value, true, &mut da, false);
                        acc(*a, da);
                    }
                    if nb.needs_grad {
                        let mut db = vec![0.0; k * m];
                        linalg::gemm(k, n, m, &na.value, true, &dy, false, &mut db, false);
                        acc(*b, db);
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, dy.clone());
                    acc(*b, dy);
                }
                Op::Sub(a, b) => {
                    acc(*b, dy.iter().map(|x| -x).collect());
                    acc(*a, dy);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                    acc(*a, dy.iter().zip(vb).map(|(d, y)| d * y).collect());
                    acc(*b, dy.iter().zip(va).map(|(d, x)| d * x).collect());
                }
                Op::Scale(a, c) => acc(*a, dy.iter().map(|d| d * c).collect()),
                Op::AddScalar(a) | Op::Reshape(a) => acc(*a, dy),
                Op::Relu(a) => {
                    let va = &nodes[a.0].value;
                    acc(*a, dy.iter().zip(va).map(|(d, &x)| if x > 0.0 { *d } else { 0.0 }).collect());
                }
                Op::Exp(a) => acc(*a, dy.iter().zip(&node.value).map(|(d, y)| d * y).collect()),
                Op::Log(a) => {
                    let va = &nodes[a.0].value;
                    acc(*a, dy.iter().zip(va).map(|(d, x)| d / x).collect());
                }
                Op::Clamp(a, lo, hi) => {
                    let va = &nodes[a.0].value;
                    acc(
                        *a,
                        dy.iter()
                            .zip(va)
                            .map(|(d, &x)| if x > *lo && x < *hi { *d } else { 0.0 })
                            .collect(),
                    );
                }
                Op::LogSigmoid(a) => {
                    let va = &nodes[a.0].value;
                    acc(*a, dy.iter().zip(va).map(|(d, &x)| d * sigmoid(-x)).collect());
                }
                Op::Sum(a) => {
                    let n = nodes[a.0].value.len();
                    acc(*a, vec![dy[0]; n]);
                }
                Op::BroadcastRows(a) => {
                    let m = nodes[a.0].value.len();
                    let mut da = vec![0.0; m];
                    for row in dy.chunks(m) {
                        add_into(&mut da, row);
                    }
                    acc(*a, da);
                }
                Op::ConcatCols(parts) => {
                    let n = node.shape[0];
                    let total = node.shape[1];
                    let mut off = 0;
                    for p in parts {
                        let w = nodes[p.0].shape[1];
                        let mut dp = Vec::with_capacity(n * w);
                        for r in 0..n {
                            dp.extend_from_slice(&dy[r * total + off..r * total + off + w]);
                        }
                        acc(*p, dp);
                        off += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let (n, m) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                    let w = node.shape[1];
                    let mut da = vec![0.0; n * m];
                    for r in 0..n {
                        da[r * m + start..r * m + start + w].copy_from_slice(&dy[r * w..(r + 1) * w]);
                    }
                    acc(*a, da);
                }
                Op::LogSoftmax(a) => {
                    let m = node.shape[1];
                    let mut da = dy.clone();
                    for (drow, yrow) in da.chunks_mut(m).zip(node.value.chunks(m)) {
                        let s: f64 = drow.iter().sum();
                        for (d, y) in drow.iter_mut().zip(yrow) {
                            *d -= y.exp() * s;
                        }
                    }
                    acc(*a, da);
                }
                Op::AddChannelBias(x, b) => {
                    let c = node.shape[1];
                    let hw = node.shape[2] * node.shape[3];
                    let mut db = vec![0.0; c];
                    for (j, blk) in dy.chunks(hw).enumerate() {
                        db[j % c] += blk.iter().sum::<f64>();
                    }
                    acc(*b, db);
                    acc(*x, dy);
                }
                Op::Conv2d { x, w, geom } => {
                    let (nx, nw) = (&nodes[x.0], &nodes[w.0]);
                    let n = nx.shape[0];
                    let o = nw.shape[0];
                    let (cr, cc) = (geom.col_rows(), geom.col_cols());
                    let img = geom.channels * geom.height * geom.width;
                    let mut dw = vec![0.0; nw.value.len()];
                    let mut dx = if nx.needs_grad { vec![0.0; nx.value.len()] } else { Vec::new() };
                    let mut cols = vec![0.0; cr * cc];
                    let mut dcols = vec![0.0; cr * cc];
                    for s in 0..n {
                        let dys = &dy[s * o * cc..(s + 1) * o * cc];
                        if nw.needs_grad {
                            linalg::im2col(geom, &nx.value[s * img..(s + 1) * img], &mut cols);
                            linalg::gemm(o, cc, cr, dys, false, &cols, true, &mut dw, true);
                        }
                        if nx.needs_grad {
                            linalg::gemm(cr, o, cc, &nw.value, true, dys, false, &mut dcols, false);
                            linalg::col2im(geom, &dcols, &mut dx[s * img..(s + 1) * img]);
                        }
                    }
                    if nw.needs_grad {
                        acc(*w, dw);
                    }
                    if nx.needs_grad {
                        acc(*x, dx);
                    }
                }
                Op::ConvTranspose2d { x, w, geom } => {
                    let (nx, nw) = (&nodes[x.0], &nodes[w.0]);
                    let n = nx.shape[0];
                    let cin = nx.shape[1];
                    let hw = nx.shape[2] * nx.shape[3];
                    let (cr, cc) = (geom.col_rows(), geom.col_cols());
                    let out_img = geom.channels * geom.height * geom.width;
                    let mut dw = vec![0.0; nw.value.len()];
                    let mut dx = if nx.needs_grad { vec![0.0; nx.value.len()] } else { Vec::new() };
                    let mut dcols = vec![0.0; cr * cc];
                    for s in 0..n {
                        linalg::im2col(geom, &dy[s * out_img..(s + 1) * out_img], &mut dcols);
                        let xs = &nx.value[s * cin * hw..(s + 1) * cin * hw];
                        if nw.needs_grad {
                            linalg::gemm(cin, hw, cr, xs, false, &dcols, true, &mut dw, true);
                        }
                        if nx.needs_grad {
                            linalg::gemm(cin, cr, hw, &nw.value, false, &dcols, false, &mut dx[s * cin * hw..(s + 1) * cin * hw], false);
                        }
                    }
                    if nw.needs_grad {
                        acc(*w, dw);
                    }
                    if nx.needs_grad {
                        acc(*x, dx);
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }

    /// Backpropagates from the scalar `root`, adding each parameter's
    /// gradient into its buffer in `store`. Gradients accumulate across calls
    /// until the store is zeroed.
    pub fn backward(&self, root: Var, store: &mut ParamStore) -> Result<()> {
        let grads = self.gradients(root)?;
        let nodes = self.nodes.borrow();
        for (i, g) in grads.grads.iter().enumerate() {
            if let (Some(g), Op::Leaf { param: Some(id) }) = (g, &nodes[i].op) {
                let t = store.get_mut(*id);
                if t.requires_grad() {
                    t.accumulate_grad(g);
                }
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sigmoid(x: f64) -> f64 {
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}
