//! Small network building blocks over the recorded graph.
//!
//! Every layer lives in a shared [`ParamStore`]; forward passes bind the
//! parameters either as trainable leaves or, with [`Bind::Frozen`], as
//! constants so one player of an adversarial pair can be held fixed.

use crate::numerics::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::rng::StreamRng;

/// How parameters enter the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bind {
    Trainable,
    Frozen,
}

fn bind(g: &Graph, store: &ParamStore, id: ParamId, mode: Bind) -> Var {
    match mode {
        Bind::Trainable => g.param(store, id),
        Bind::Frozen => g.frozen_param(store, id),
    }
}

fn uniform_tensor(shape: &[usize], bound: f64, rng: &mut StreamRng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform_in(-bound, bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("init shape")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Uniform `(-1/sqrt(in), 1/sqrt(in))` initialisation for weights and bias.
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut StreamRng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight = store.add(format!("{name}.weight"), uniform_tensor(&[in_dim, out_dim], bound, rng));
        let bias = store.add(format!("{name}.bias"), uniform_tensor(&[out_dim], bound, rng));
        Linear {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, g: &Graph, store: &ParamStore, x: Var, mode: Bind) -> Var {
        let w = bind(g, store, self.weight, mode);
        let b = bind(g, store, self.bias, mode);
        g.add_row(g.matmul(x, w), b)
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.weight, self.bias]
    }
}

/// Stack of linear layers with ReLU between them.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `widths` lists every layer size including input and output.
    pub fn new(store: &mut ParamStore, name: &str, widths: &[usize], rng: &mut StreamRng) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    /// Forward pass; ReLU after every layer but the last, and after the last
    /// too when `relu_out`.
    pub fn forward(&self, g: &Graph, store: &ParamStore, x: Var, mode: Bind, relu_out: bool) -> Var {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, store, h, mode);
            if i < last || relu_out {
                h = g.relu(h);
            }
        }
        h
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(Linear::params).collect()
    }
}

/// Image shape `channels x height x width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn numel(&self) -> usize {
        self.channels * self.height * self.width
    }
}

#[derive(Clone, Debug, PartialEq)]
struct ConvLayer {
    weight: ParamId,
    bias: ParamId,
}

/// Stride-2, kernel-4, pad-1 convolutions with ReLU: each stage halves the
/// spatial size.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvEncoder {
    layers: Vec<ConvLayer>,
    input: ImageShape,
    channels: Vec<usize>,
}

pub const CONV_KERNEL: usize = 4;

impl ConvEncoder {
    pub fn new(store: &mut ParamStore, name: &str, input: ImageShape, channels: &[usize], rng: &mut StreamRng) -> Self {
        let mut layers = Vec::new();
        let mut cin = input.channels;
        for (i, &cout) in channels.iter().enumerate() {
            let fan_in = cin * CONV_KERNEL * CONV_KERNEL;
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weight = store.add(
                format!("{name}.conv{i}.weight"),
                uniform_tensor(&[cout, cin, CONV_KERNEL, CONV_KERNEL], bound, rng),
            );
            let bias = store.add(format!("{name}.conv{i}.bias"), uniform_tensor(&[cout], bound, rng));
            layers.push(ConvLayer { weight, bias });
            cin = cout;
        }
        ConvEncoder {
            layers,
            input,
            channels: channels.to_vec(),
        }
    }

    pub fn out_dim(&self) -> usize {
        let f = 1 << self.layers.len();
        self.channels.last().copied().unwrap_or(self.input.channels) * (self.input.height / f) * (self.input.width / f)
    }

    /// `x` is `[n, c*h*w]`; returns flattened features `[n, out_dim]`.
    pub fn forward(&self, g: &Graph, store: &ParamStore, x: Var, mode: Bind) -> Var {
        let n = g.shape(x)[0];
        let s = self.input;
        let mut h = g.reshape(x, &[n, s.channels, s.height, s.width]);
        for l in &self.layers {
            let w = bind(g, store, l.weight, mode);
            let b = bind(g, store, l.bias, mode);
            h = g.relu(g.add_channel_bias(g.conv2d(h, w, 2, 1), b));
        }
        g.reshape(h, &[n, self.out_dim()])
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }
}

/// Mirror of [`ConvEncoder`]: transposed convolutions doubling the spatial
/// size at each stage, ReLU between stages, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvDecoder {
    layers: Vec<ConvLayer>,
    /// Shape of the tensor entering the first transposed convolution.
    pub seed_shape: ImageShape,
    pub out_channels: usize,
}

impl ConvDecoder {
    /// `channels` lists the input channel count of every stage (deepest first);
    /// the last stage emits `out_channels`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        output: ImageShape,
        channels: &[usize],
        out_channels: usize,
        rng: &mut StreamRng,
    ) -> Self {
        assert!(!channels.is_empty());
        let f = 1 << channels.len();
        let seed_shape = ImageShape {
            channels: channels[0],
            height: output.height / f,
            width: output.width / f,
        };
        let mut layers = Vec::new();
        for (i, &cin) in channels.iter().enumerate() {
            let cout = channels.get(i + 1).copied().unwrap_or(out_channels);
            let fan_in = cout * CONV_KERNEL * CONV_KERNEL;
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weight = store.add(
                format!("{name}.deconv{i}.weight"),
                uniform_tensor(&[cin, cout, CONV_KERNEL, CONV_KERNEL], bound, rng),
            );
            let bias = store.add(format!("{name}.deconv{i}.bias"), uniform_tensor(&[cout], bound, rng));
            layers.push(ConvLayer { weight, bias });
        }
        ConvDecoder {
            layers,
            seed_shape,
            out_channels,
        }
    }

    /// `h` is `[n, seed_shape.numel()]`; returns `[n, out_channels*H*W]`.
    pub fn forward(&self, g: &Graph, store: &ParamStore, h: Var, mode: Bind) -> Var {
        let n = g.shape(h)[0];
        let s = self.seed_shape;
        let mut x = g.reshape(h, &[n, s.channels, s.height, s.width]);
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let w = bind(g, store, l.weight, mode);
            let b = bind(g, store, l.bias, mode);
            x = g.add_channel_bias(g.conv_transpose2d(x, w, 2, 1), b);
            if i < last {
                x = g.relu(x);
            }
        }
        let shape = g.shape(x);
        g.reshape(x, &[n, shape[1..].iter().product()])
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }
}
