//! Equivariant layers on bags of subgraphs: the Morris message-passing
//! update, the classic subgraph-network baselines, 2-IGN and ReIGN(2)
//! layers, SUN in linear and expressive form, model assembly, and the weight
//! constructions that express one family through another.
//!
//! Every layer maps a `[n*n, d_in]` tape value (row `k*n + i` is node `i` in
//! subgraph `k`) to `[n*n, d_out]`. Parameters are looked up by name under a
//! caller-chosen prefix, so a whole model lives in one [`Params`] map.

mod model;
mod ops;
mod sun;
mod terms;
mod transpile;

pub use model::{assemble_model, forward_tape, model_forward, prepare, Model, ModelConfig, PoolingKind, PoolingSpec, Prepared};
pub use ops::{bag_tensor, node_tensor, with_features, BagOps};
pub use terms::{term_chain, ReignTerm, TermId, Variant};
pub use transpile::{reign_stack_from_sun, reign_weights_from, sun_weights_from};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autograd::{AutogradError, Params, Tape, Tensor, Var};
use crate::policy::{PolicyError, SubgraphBag};
use crate::rng::{self, Prng};

#[derive(Debug, Error, PartialEq)]
pub enum LayerError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("membership-masked aggregation needs an ego-net bag")]
    MissingMembership,
    #[error("2-IGN layers pool globally only, got {0}")]
    NotAllowedInIGN2(String),
    #[error("bad term: {0}")]
    BadTerm(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Autograd(#[from] AutogradError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

pub type Result<T> = std::result::Result<T, LayerError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LayerKind {
    Morris,
    Ds,
    Dss,
    Gnnak,
    GnnakCtx,
    Idgnn,
    NgnnInner,
    Ign2,
    Reign2,
    SunLinear,
    SunExpressive,
}

impl LayerKind {
    pub const BASELINES: [LayerKind; 6] =
        [LayerKind::Ds, LayerKind::Dss, LayerKind::Gnnak, LayerKind::GnnakCtx, LayerKind::Idgnn, LayerKind::NgnnInner];
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub d_in: usize,
    pub d_out: usize,
    #[serde(default)]
    pub activation: Activation,
    /// ReIGN(2) / 2-IGN terms updating the roots.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub on_terms: Vec<ReignTerm>,
    /// ReIGN(2) / 2-IGN terms updating the non-roots.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub off_terms: Vec<ReignTerm>,
    /// Separate root and non-root biases (ReIGN(2) / 2-IGN only).
    #[serde(default)]
    pub bias: bool,
    /// Number of inner DS layers of a GNN-AK block.
    #[serde(default = "one")]
    pub inner_depth: usize,
    /// GNN-AK pooling restricted to subgraph members.
    #[serde(default)]
    pub masked: bool,
    /// GIN-style `(1 + eps)` self weight of expressive SUN; not trained.
    #[serde(default)]
    pub eps: f64,
    /// Aggregation across subgraphs in SUN.
    #[serde(default)]
    pub vertical: Aggregation,
}

impl LayerSpec {
    /// Defaults: relu, except GNN-AK blocks whose pooling step is linear.
    pub fn new(kind: LayerKind, d_in: usize, d_out: usize) -> LayerSpec {
        let activation = match kind {
            LayerKind::Gnnak | LayerKind::GnnakCtx => Activation::Identity,
            _ => Activation::Relu,
        };
        LayerSpec {
            kind,
            d_in,
            d_out,
            activation,
            on_terms: Vec::new(),
            off_terms: Vec::new(),
            bias: false,
            inner_depth: 1,
            masked: false,
            eps: 0.0,
            vertical: Aggregation::Sum,
        }
    }

    pub fn with_activation(mut self, a: Activation) -> LayerSpec {
        self.activation = a;
        self
    }

    /// Every term with every variant, each with its own weight, plus biases.
    pub fn reign_full(d_in: usize, d_out: usize) -> LayerSpec {
        let expand = |ids: &[TermId], tag: &str| -> Vec<ReignTerm> {
            let mut v = Vec::new();
            for &id in ids {
                if id.is_aggregated() {
                    for var in Variant::ALL {
                        let w = format!("{tag}.{}.{}", id.name(), serde_json::to_value(var).expect("variant").as_str().expect("str"));
                        v.push(ReignTerm::agg(id, var, &w));
                    }
                } else {
                    v.push(ReignTerm::plain(id, &format!("{tag}.{}", id.name())));
                }
            }
            v
        };
        LayerSpec {
            on_terms: expand(&TermId::ON, "on"),
            off_terms: expand(&TermId::OFF, "off"),
            bias: true,
            ..LayerSpec::new(LayerKind::Reign2, d_in, d_out)
        }
    }

    /// The fifteen-term linear equivariant layer with biases.
    pub fn ign2_full(d_in: usize, d_out: usize) -> LayerSpec {
        let mk = |ids: &[TermId], tag: &str| -> Vec<ReignTerm> {
            ids.iter()
                .map(|&id| {
                    let w = format!("{tag}.{}", id.name());
                    if id.is_aggregated() {
                        ReignTerm::agg(id, Variant::Global, &w)
                    } else {
                        ReignTerm::plain(id, &w)
                    }
                })
                .collect()
        };
        LayerSpec {
            on_terms: mk(&TermId::ON, "on"),
            off_terms: mk(&TermId::OFF, "off"),
            bias: true,
            ..LayerSpec::new(LayerKind::Ign2, d_in, d_out)
        }
    }

    fn validate(&self) -> Result<()> {
        for t in &self.on_terms {
            t.validate(true)?;
        }
        for t in &self.off_terms {
            t.validate(false)?;
        }
        match self.kind {
            LayerKind::Ign2 => {
                if let Some(t) = self.on_terms.iter().chain(&self.off_terms).find(|t| t.variant.is_some_and(|v| v != Variant::Global)) {
                    return Err(LayerError::NotAllowedInIGN2(format!("{} with a local variant", t.id.name())));
                }
            }
            LayerKind::Reign2 => {}
            _ => {
                if !self.on_terms.is_empty() || !self.off_terms.is_empty() || self.bias {
                    return Err(LayerError::BadTerm(format!("{:?} layers take no term lists", self.kind)));
                }
            }
        }
        if matches!(self.kind, LayerKind::Gnnak | LayerKind::GnnakCtx) && self.inner_depth == 0 {
            return Err(LayerError::ShapeMismatch("GNN-AK needs at least one inner layer".into()));
        }
        Ok(())
    }

    /// Parameter names and shapes, weights as `[out, in]`.
    pub fn param_shapes(&self) -> Result<Vec<(String, Vec<usize>)>> {
        self.validate()?;
        let (i, o) = (self.d_in, self.d_out);
        let w = |name: &str| (name.to_string(), vec![o, i]);
        let mlp = |name: &str| {
            vec![
                (format!("{name}.w1"), vec![o, i]),
                (format!("{name}.b1"), vec![o]),
                (format!("{name}.w2"), vec![o, o]),
                (format!("{name}.b2"), vec![o]),
            ]
        };
        let shapes = match self.kind {
            LayerKind::Morris | LayerKind::Ds | LayerKind::NgnnInner => vec![w("w1"), w("w2")],
            LayerKind::Dss => vec![w("w1_1"), w("w1_2"), w("w2_1"), w("w2_2")],
            LayerKind::Idgnn => vec![w("w1"), w("w2"), w("w3")],
            LayerKind::Gnnak | LayerKind::GnnakCtx => (0..self.inner_depth)
                .flat_map(|l| {
                    let d = if l == 0 { i } else { o };
                    [(format!("ds{l}.w1"), vec![o, d]), (format!("ds{l}.w2"), vec![o, d])]
                })
                .collect(),
            LayerKind::Ign2 | LayerKind::Reign2 => {
                let mut v: Vec<(String, Vec<usize>)> = Vec::new();
                for t in self.on_terms.iter().chain(&self.off_terms) {
                    if !v.iter().any(|(n, _)| n == &t.weight) {
                        v.push(w(&t.weight));
                    }
                }
                if self.bias {
                    v.push(("b_on".into(), vec![o]));
                    v.push(("b_off".into(), vec![o]));
                }
                v
            }
            LayerKind::SunLinear => ["u0", "u1", "u2", "u3", "u4", "u5", "u6", "u2r", "u3r", "u4r", "u5r", "u6r"].iter().map(|n| w(n)).collect(),
            LayerKind::SunExpressive => ["mu0", "mu1", "mu2", "mu3", "mu2r", "mu3r", "g0", "g1", "g0r", "g1r"].iter().flat_map(|n| mlp(n)).collect(),
        };
        Ok(shapes)
    }

    /// Weights drawn from `N(0, 1/fan_in)`, biases zero.
    pub fn init_params(&self, rng: &mut Prng) -> Result<Params> {
        let mut p = Params::new();
        for (name, shape) in self.param_shapes()? {
            let t = if shape.len() == 2 {
                let sd = 1.0 / (shape[1].max(1) as f64).sqrt();
                Tensor { data: (0..shape[0] * shape[1]).map(|_| sd * rng::normal(rng)).collect(), shape }
            } else {
                Tensor::zeros(&shape)
            };
            p.insert(name, t);
        }
        Ok(p)
    }

    /// Fails unless `params` holds exactly the expected shapes under `prefix`.
    pub fn check_params(&self, params: &Params, prefix: &str) -> Result<()> {
        for (name, shape) in self.param_shapes()? {
            let key = format!("{prefix}{name}");
            match params.get(&key) {
                Some(t) if t.shape == shape => {}
                Some(t) => return Err(LayerError::ShapeMismatch(format!("{key}: {:?}, expected {shape:?}", t.shape))),
                None => return Err(LayerError::ShapeMismatch(format!("missing parameter {key}"))),
            }
        }
        Ok(())
    }
}

/// A layer spec with its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: Params,
}

impl Layer {
    pub fn random(spec: LayerSpec, rng: &mut Prng) -> Result<Layer> {
        let params = spec.init_params(rng)?;
        Ok(Layer { spec, params })
    }

    /// All weights zero.
    pub fn zeros(spec: LayerSpec) -> Result<Layer> {
        let params = spec.param_shapes()?.into_iter().map(|(n, s)| (n, Tensor::zeros(&s))).collect();
        Ok(Layer { spec, params })
    }
}

/// Parameter lookup under a prefix.
pub(crate) struct Scope<'a> {
    pub params: &'a Params,
    pub prefix: &'a str,
}

impl Scope<'_> {
    pub fn get(&self, t: &mut Tape, name: &str) -> Result<Var> {
        Ok(t.param_from(self.params, &format!("{}{name}", self.prefix))?)
    }

    pub fn lin(&self, t: &mut Tape, x: Var, name: &str) -> Result<Var> {
        let w = self.get(t, name)?;
        Ok(t.linear(x, w, None)?)
    }

    /// Two-layer perceptron `w2 relu(w1 x + b1) + b2`.
    pub fn mlp(&self, t: &mut Tape, x: Var, name: &str) -> Result<Var> {
        let (w1, b1) = (self.get(t, &format!("{name}.w1"))?, self.get(t, &format!("{name}.b1"))?);
        let (w2, b2) = (self.get(t, &format!("{name}.w2"))?, self.get(t, &format!("{name}.b2"))?);
        let h = t.linear(x, w1, Some(b1))?;
        let h = t.relu(h);
        Ok(t.linear(h, w2, Some(b2))?)
    }
}

pub(crate) fn activate(t: &mut Tape, x: Var, a: Activation) -> Var {
    match a {
        Activation::Relu => t.relu(x),
        Activation::Identity => x,
    }
}

fn check_input(t: &Tape, spec: &LayerSpec, rows: usize, x: Var) -> Result<()> {
    let s = t.shape(x);
    if s != [rows, spec.d_in] {
        return Err(LayerError::ShapeMismatch(format!("{:?} layer expects [{rows}, {}], got {s:?}", spec.kind, spec.d_in)));
    }
    Ok(())
}

fn ds_update(t: &mut Tape, s: &Scope, ops: &BagOps, x: Var, w1: &str, w2: &str) -> Result<Var> {
    let a = s.lin(t, x, w1)?;
    let m = t.spmm(&ops.sub_adj, x)?;
    let b = s.lin(t, m, w2)?;
    Ok(t.add(a, b)?)
}

/// Runs one layer on the tape. Node-level MORRIS layers take `[n, d_in]`.
pub fn layer_forward(t: &mut Tape, params: &Params, prefix: &str, spec: &LayerSpec, ops: &BagOps, x: Var) -> Result<Var> {
    spec.validate()?;
    let s = Scope { params, prefix };
    let n = ops.n;
    if spec.kind == LayerKind::Morris {
        check_input(t, spec, n, x)?;
        let a = s.lin(t, x, "w1")?;
        let m = t.spmm(&ops.orig_adj, x)?;
        let b = s.lin(t, m, "w2")?;
        let y = t.add(a, b)?;
        return Ok(activate(t, y, spec.activation));
    }
    check_input(t, spec, n * n, x)?;
    let y = match spec.kind {
        LayerKind::Ds | LayerKind::NgnnInner => ds_update(t, &s, ops, x, "w1", "w2")?,
        LayerKind::Dss => {
            let local = ds_update(t, &s, ops, x, "w1_1", "w1_2")?;
            let v = t.spmm(&ops.vertical, x)?;
            let av = t.spmm(&ops.orig_adj, v)?;
            let a = s.lin(t, v, "w2_1")?;
            let b = s.lin(t, av, "w2_2")?;
            let node = t.add(a, b)?;
            let spread = t.spmm(&ops.by_node, node)?;
            t.add(local, spread)?
        }
        LayerKind::Idgnn => {
            let a = s.lin(t, x, "w1")?;
            let m = t.spmm(&ops.sub_adj_no_root, x)?;
            let b = s.lin(t, m, "w2")?;
            let r = t.spmm(&ops.root_msg, x)?;
            let c = s.lin(t, r, "w3")?;
            t.add_all(&[a, b, c])?
        }
        LayerKind::Gnnak | LayerKind::GnnakCtx => {
            if spec.masked && !ops.is_ego() {
                return Err(LayerError::MissingMembership);
            }
            let mut h = x;
            for l in 0..spec.inner_depth {
                let u = ds_update(t, &s, ops, h, &format!("ds{l}.w1"), &format!("ds{l}.w2"))?;
                h = t.relu(u);
            }
            let (readout, vertical) =
                if spec.masked { (&ops.member_readout, &ops.member_vertical) } else { (&ops.readout, &ops.vertical) };
            let root = t.spmm(&ops.diag, h)?;
            let sub = t.spmm(readout, h)?;
            let mut node = t.add(root, sub)?;
            if spec.kind == LayerKind::GnnakCtx {
                let v = t.spmm(vertical, h)?;
                node = t.add(node, v)?;
            }
            t.spmm(&ops.by_node, node)?
        }
        LayerKind::Ign2 | LayerKind::Reign2 => reign_update(t, &s, spec, ops, x)?,
        LayerKind::SunLinear => sun::linear(t, &s, spec, ops, x)?,
        LayerKind::SunExpressive => sun::expressive(t, &s, spec, ops, x)?,
        LayerKind::Morris => unreachable!("handled above"),
    };
    Ok(activate(t, y, spec.activation))
}

#[allow(clippy::too_many_arguments)]
fn sum_terms(t: &mut Tape, s: &Scope, ops: &BagOps, terms: &[ReignTerm], on: bool, x: Var, rows: usize, d_out: usize) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for term in terms {
        let mut chain = term_chain(ops, on, term.id, term.variant)?;
        if term.aggregation == Aggregation::Mean {
            chain = terms::mean_of(chain);
        }
        let m = terms::apply_chain(t, &chain, x)?;
        let y = s.lin(t, m, &term.weight)?;
        acc = Some(match acc {
            Some(a) => t.add(a, y)?,
            None => y,
        });
    }
    Ok(acc.unwrap_or_else(|| t.constant(Tensor::zeros(&[rows, d_out]))))
}

fn add_bias(t: &mut Tape, s: &Scope, x: Var, name: &str) -> Result<Var> {
    let rows = t.shape(x)[0];
    let b = s.get(t, name)?;
    let b = t.broadcast_axis(b, 0, rows)?;
    Ok(t.add(x, b)?)
}

fn reign_update(t: &mut Tape, s: &Scope, spec: &LayerSpec, ops: &BagOps, x: Var) -> Result<Var> {
    let n = ops.n;
    let mut on = sum_terms(t, s, ops, &spec.on_terms, true, x, n, spec.d_out)?;
    let mut off = sum_terms(t, s, ops, &spec.off_terms, false, x, n * n, spec.d_out)?;
    if spec.bias {
        on = add_bias(t, s, on, "b_on")?;
        off = add_bias(t, s, off, "b_off")?;
        off = t.spmm(&ops.off_select, off)?;
    }
    let on = t.spmm(&ops.embed_diag, on)?;
    Ok(t.add(on, off)?)
}

/// Applies one layer to a bag, returning the bag with updated features.
pub fn apply_layer(layer: &Layer, bag: &SubgraphBag) -> Result<SubgraphBag> {
    let ops = BagOps::new(bag);
    let mut t = Tape::new();
    let x = t.constant(bag_tensor(bag));
    let y = layer_forward(&mut t, &layer.params, "", &layer.spec, &ops, x)?;
    with_features(bag, t.value(y))
}

/// Applies a stack of layers in order.
pub fn apply_stack(layers: &[Layer], bag: &SubgraphBag) -> Result<SubgraphBag> {
    let ops = BagOps::new(bag);
    let mut t = Tape::new();
    let mut x = t.constant(bag_tensor(bag));
    for layer in layers {
        x = layer_forward(&mut t, &layer.params, "", &layer.spec, &ops, x)?;
    }
    with_features(bag, t.value(x))
}

fn expect_kind(layer: &Layer, kinds: &[LayerKind]) -> Result<()> {
    if kinds.contains(&layer.spec.kind) {
        Ok(())
    } else {
        Err(LayerError::Unsupported(format!("expected one of {kinds:?}, got {:?}", layer.spec.kind)))
    }
}

pub fn ds_layer(layer: &Layer, bag: &SubgraphBag) -> Result<SubgraphBag> {
    expect_kind(layer, &[LayerKind::Ds])?;
    apply_layer(layer, bag)
}

pub fn dss_layer(layer: &Layer, bag: &SubgraphBag) -> Result<SubgraphBag> {
    expect_kind(layer, &[LayerKind::Dss])?;
    apply_layer(layer, bag)
}

pub fn gnnak_block(layer: &Layer, bag: &SubgraphBag) -> Result<SubgraphBag> {
    expect_kind(layer, &[LayerKind::Gnnak])?;
    apply_layer(layer, bag)
}

pub fn gnnak_ctx_block(layer: &Layer, bag: &SubgraphBag) -> Result<SubgraphBag> {
    expect_kind(layer, &[LayerKind::GnnakCtx])?;
    apply_layer(layer, bag)
}

pub fn idgnn_layer(layer: &Layer, bag: &SubgraphBag) -> Result<SubgraphBag> {
    expect_kind(layer, &[LayerKind::Idgnn])?;
    apply_layer(layer, bag)
}

pub fn ngnn_inner(layer: &Layer, bag: &SubgraphBag) -> Result<SubgraphBag> {
    expect_kind(layer, &[LayerKind::NgnnInner])?;
    apply_layer(layer, bag)
}

pub fn reign2_layer(layer: &Layer, bag: &SubgraphBag) -> Result<SubgraphBag> {
    expect_kind(layer, &[LayerKind::Reign2])?;
    apply_layer(layer, bag)
}

pub fn sun_layer(layer: &Layer, bag: &SubgraphBag) -> Result<SubgraphBag> {
    expect_kind(layer, &[LayerKind::SunLinear, LayerKind::SunExpressive])?;
    apply_layer(layer, bag)
}

/// 2-IGN layer on an `[n*n, d]` grid of node representations.
pub fn ign2_layer(layer: &Layer, x: &Tensor) -> Result<Tensor> {
    expect_kind(layer, &[LayerKind::Ign2])?;
    let rows = x.rows();
    let n = (rows as f64).sqrt().round() as usize;
    if n * n != rows || x.shape.len() != 2 {
        return Err(LayerError::ShapeMismatch(format!("grid of shape {:?}", x.shape)));
    }
    let ops = BagOps::grid(n);
    let mut t = Tape::new();
    let xv = t.constant(x.clone());
    let y = layer_forward(&mut t, &layer.params, "", &layer.spec, &ops, xv)?;
    Ok(t.value(y).clone())
}

/// `σ(x W1ᵀ + A x W2ᵀ)` on node features `[n, d]` with adjacency `adj[i*n + j]`.
pub fn morris_layer(w1: &Tensor, w2: &Tensor, adj: &[bool], x: &Tensor, act: Activation) -> Result<Tensor> {
    let n = x.rows();
    if adj.len() != n * n || x.shape.len() != 2 {
        return Err(LayerError::ShapeMismatch(format!("adjacency of {} entries for features {:?}", adj.len(), x.shape)));
    }
    let e: Vec<(usize, usize, f64)> = (0..n * n).filter(|&p| adj[p]).map(|p| (p / n, p % n, 1.0)).collect();
    let a = std::rc::Rc::new(crate::autograd::SparseMat::from_triplets(n, n, &e)?);
    let mut t = Tape::new();
    let xv = t.constant(x.clone());
    let (w1, w2) = (t.constant(w1.clone()), t.constant(w2.clone()));
    let p = t.linear(xv, w1, None)?;
    let m = t.spmm(&a, xv)?;
    let q = t.linear(m, w2, None)?;
    let y = t.add(p, q)?;
    let y = activate(&mut t, y, act);
    Ok(t.value(y).clone())
}

#[cfg(test)]
mod tests;
