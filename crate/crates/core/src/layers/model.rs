//! Whole models: selection policy, a layer stack, invariant pooling and an
//! MLP head.

use serde::{Deserialize, Serialize};

use crate::autograd::{Params, Tape, Tensor, Var};
use crate::graph::Graph;
use crate::policy::{apply_policy, PolicyKind};
use crate::rng::{self, Prng};

use super::ops::{bag_tensor, BagOps};
use super::{layer_forward, LayerError, LayerKind, LayerSpec, Result, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PoolingKind {
    /// Sum each subgraph, map every subgraph sum through `phi`, sum.
    SubgraphReadoutDeepsets,
    /// Sum of the root representations.
    RootPool,
    /// Sum each subgraph into its root node, run a Morris layer on the
    /// original graph, sum.
    NgnnOuter,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingSpec {
    pub kind: PoolingKind,
    /// Per-subgraph sums only over subgraph members.
    #[serde(default = "yes")]
    pub masked: bool,
    /// Hidden widths of `phi`, each followed by relu.
    #[serde(default)]
    pub phi: Vec<usize>,
    /// Widths of the head; relu between layers, none after the last. Empty
    /// means the pooled embedding is the output.
    #[serde(default)]
    pub head: Vec<usize>,
}

impl PoolingSpec {
    pub fn root_pool(head: Vec<usize>) -> PoolingSpec {
        PoolingSpec { kind: PoolingKind::RootPool, masked: true, phi: Vec::new(), head }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub policy: PolicyKind,
    /// Width of the input node features, before any marking channel.
    pub d_in: usize,
    pub layers: Vec<LayerSpec>,
    pub pooling: PoolingSpec,
}

impl ModelConfig {
    /// Parameter names and shapes in initialisation order.
    pub fn param_shapes(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let mut width = self.policy.feature_width(self.d_in);
        let mut out = Vec::new();
        for (l, spec) in self.layers.iter().enumerate() {
            if spec.kind == LayerKind::Morris {
                return Err(LayerError::ShapeMismatch("node-level layers cannot run on a bag".into()));
            }
            if spec.d_in != width {
                return Err(LayerError::ShapeMismatch(format!("layer {l} takes width {}, gets {width}", spec.d_in)));
            }
            out.extend(spec.param_shapes()?.into_iter().map(|(n, s)| (format!("l{l}.{n}"), s)));
            width = spec.d_out;
        }
        match self.pooling.kind {
            PoolingKind::RootPool => {}
            PoolingKind::SubgraphReadoutDeepsets => {
                for (l, &w) in self.pooling.phi.iter().enumerate() {
                    out.push((format!("pool.phi{l}.w"), vec![w, width]));
                    out.push((format!("pool.phi{l}.b"), vec![w]));
                    width = w;
                }
            }
            PoolingKind::NgnnOuter => {
                out.push(("pool.outer.w1".into(), vec![width, width]));
                out.push(("pool.outer.w2".into(), vec![width, width]));
            }
        }
        for (l, &w) in self.pooling.head.iter().enumerate() {
            out.push((format!("head.w{l}"), vec![w, width]));
            out.push((format!("head.b{l}"), vec![w]));
            width = w;
        }
        Ok(out)
    }

    /// Width of the model output.
    pub fn output_width(&self) -> usize {
        let mut w = self.layers.last().map_or(self.policy.feature_width(self.d_in), |l| l.d_out);
        if self.pooling.kind == PoolingKind::SubgraphReadoutDeepsets {
            w = *self.pooling.phi.last().unwrap_or(&w);
        }
        *self.pooling.head.last().unwrap_or(&w)
    }

    /// Weights from `N(0, 1/fan_in)` on the weights substream of `seed`,
    /// biases zero.
    pub fn init_params(&self, seed: u64) -> Result<Params> {
        let mut r: Prng = rng::stream(seed, rng::WEIGHTS);
        let mut p = Params::new();
        for (name, shape) in self.param_shapes()? {
            let t = if shape.len() == 2 {
                let sd = 1.0 / (shape[1].max(1) as f64).sqrt();
                Tensor { data: (0..shape[0] * shape[1]).map(|_| sd * rng::normal(&mut r)).collect(), shape }
            } else {
                Tensor::zeros(&shape)
            };
            p.insert(name, t);
        }
        Ok(p)
    }
}

/// An assembled model; weights fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Params,
}

pub fn assemble_model(config: ModelConfig, params: Params) -> Result<Model> {
    for (name, shape) in config.param_shapes()? {
        match params.get(&name) {
            Some(t) if t.shape == shape => {}
            Some(t) => return Err(LayerError::ShapeMismatch(format!("{name}: {:?}, expected {shape:?}", t.shape))),
            None => return Err(LayerError::ShapeMismatch(format!("missing parameter {name}"))),
        }
    }
    Ok(Model { config, params })
}

/// Bag operators and input features of one graph, reusable across passes.
pub struct Prepared {
    pub ops: BagOps,
    pub x: Tensor,
}

pub fn prepare(config: &ModelConfig, g: &Graph) -> Result<Prepared> {
    if g.d() != config.d_in {
        return Err(LayerError::ShapeMismatch(format!("graph has {} feature channels, model expects {}", g.d(), config.d_in)));
    }
    let bag = apply_policy(g, config.policy)?;
    Ok(Prepared { ops: BagOps::new(&bag), x: bag_tensor(&bag) })
}

fn sum_rows(t: &mut Tape, x: Var) -> Result<Var> {
    let d = t.shape(x)[1];
    let s = t.sum_axis(x, 0)?;
    Ok(t.reshape(s, &[1, d])?)
}

/// Forward pass on the tape; returns `[1, output_width]`.
pub fn forward_tape(t: &mut Tape, config: &ModelConfig, params: &Params, prep: &Prepared) -> Result<Var> {
    let ops = &prep.ops;
    let mut x = t.constant(prep.x.clone());
    for (l, spec) in config.layers.iter().enumerate() {
        x = layer_forward(t, params, &format!("l{l}."), spec, ops, x)?;
    }
    let s = Scope { params, prefix: "" };
    let readout = if config.pooling.masked { &ops.member_readout } else { &ops.readout };
    let mut h = match config.pooling.kind {
        PoolingKind::RootPool => {
            let roots = t.spmm(&ops.diag, x)?;
            sum_rows(t, roots)?
        }
        PoolingKind::SubgraphReadoutDeepsets => {
            let mut z = t.spmm(readout, x)?;
            for l in 0..config.pooling.phi.len() {
                let (w, b) = (s.get(t, &format!("pool.phi{l}.w"))?, s.get(t, &format!("pool.phi{l}.b"))?);
                z = t.linear(z, w, Some(b))?;
                z = t.relu(z);
            }
            sum_rows(t, z)?
        }
        PoolingKind::NgnnOuter => {
            let z = t.spmm(readout, x)?;
            let a = s.lin(t, z, "pool.outer.w1")?;
            let m = t.spmm(&ops.orig_adj, z)?;
            let b = s.lin(t, m, "pool.outer.w2")?;
            let z = t.add(a, b)?;
            let z = t.relu(z);
            sum_rows(t, z)?
        }
    };
    let depth = config.pooling.head.len();
    for l in 0..depth {
        let (w, b) = (s.get(t, &format!("head.w{l}"))?, s.get(t, &format!("head.b{l}"))?);
        h = t.linear(h, w, Some(b))?;
        if l + 1 < depth {
            h = t.relu(h);
        }
    }
    Ok(h)
}

/// Graph-level output vector.
pub fn model_forward(model: &Model, g: &Graph) -> Result<Vec<f64>> {
    let prep = prepare(&model.config, g)?;
    let mut t = Tape::new();
    let y = forward_tape(&mut t, &model.config, &model.params, &prep)?;
    Ok(t.value(y).data.clone())
}
