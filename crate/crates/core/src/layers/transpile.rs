//! Explicit weight choices realising one layer family with another.

use crate::autograd::{Params, Tensor};

use super::terms::{ReignTerm, TermId, Variant};
use super::{Activation, Aggregation, Layer, LayerError, LayerKind, LayerSpec, Result};

fn w<'a>(layer: &'a Layer, name: &str) -> Result<&'a Tensor> {
    layer.params.get(name).ok_or_else(|| LayerError::ShapeMismatch(format!("missing parameter {name}")))
}

fn zeros(rows: usize, cols: usize) -> Tensor {
    Tensor::zeros(&[rows, cols])
}

/// `[a; b]`: output channels of `a` then `b`.
fn vstack(a: &Tensor, b: &Tensor) -> Tensor {
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    Tensor { shape: vec![a.shape[0] + b.shape[0], a.shape[1]], data }
}

/// `[a, b]`: input channels of `a` then `b`.
fn hstack(a: &Tensor, b: &Tensor) -> Tensor {
    let rows = a.shape[0];
    let (ca, cb) = (a.shape[1], b.shape[1]);
    let mut data = Vec::with_capacity(rows * (ca + cb));
    for r in 0..rows {
        data.extend_from_slice(&a.data[r * ca..(r + 1) * ca]);
        data.extend_from_slice(&b.data[r * cb..(r + 1) * cb]);
    }
    Tensor { shape: vec![rows, ca + cb], data }
}

fn plus(a: &Tensor, b: &Tensor) -> Tensor {
    Tensor { shape: a.shape.clone(), data: a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect() }
}

fn scaled_eye(n: usize, c: f64) -> Tensor {
    let mut t = Tensor::eye(n);
    t.data.iter_mut().for_each(|v| *v *= c);
    t
}

/// SUN linear layer with the given nonzero weights.
fn sun(d_in: usize, d_out: usize, act: Activation, set: &[(&str, Tensor)]) -> Result<Layer> {
    let mut layer = Layer::zeros(LayerSpec::new(LayerKind::SunLinear, d_in, d_out).with_activation(act))?;
    for (name, t) in set {
        layer.params.insert(name.to_string(), t.clone());
    }
    layer.spec.check_params(&layer.params, "")?;
    Ok(layer)
}

/// ReIGN(2) layer from `(term, weight)` lists; weight names are derived
/// from the term unless the same name is reused for sharing.
fn reign(d_in: usize, d_out: usize, act: Activation, on: Vec<(ReignTerm, Tensor)>, off: Vec<(ReignTerm, Tensor)>) -> Result<Layer> {
    let mut params = Params::new();
    for (term, t) in on.iter().chain(&off) {
        params.insert(term.weight.clone(), t.clone());
    }
    let spec = LayerSpec {
        on_terms: on.into_iter().map(|(t, _)| t).collect(),
        off_terms: off.into_iter().map(|(t, _)| t).collect(),
        ..LayerSpec::new(LayerKind::Reign2, d_in, d_out).with_activation(act)
    };
    spec.check_params(&params, "")?;
    Ok(Layer { spec, params })
}

fn on(id: TermId, v: Option<Variant>, name: &str) -> ReignTerm {
    let weight = format!("on.{name}");
    match v {
        Some(v) => ReignTerm::agg(id, v, &weight),
        None => ReignTerm::plain(id, &weight),
    }
}

fn off(id: TermId, v: Option<Variant>, name: &str) -> ReignTerm {
    let weight = format!("off.{name}");
    match v {
        Some(v) => ReignTerm::agg(id, v, &weight),
        None => ReignTerm::plain(id, &weight),
    }
}

fn reject_masked(layer: &Layer) -> Result<()> {
    if layer.spec.masked {
        return Err(LayerError::Unsupported("membership-masked GNN-AK pooling has no SUN/ReIGN(2) form here".into()));
    }
    Ok(())
}

/// A stack of linear SUN layers computing the same function as `baseline`.
pub fn sun_weights_from(baseline: &Layer) -> Result<Vec<Layer>> {
    let spec = &baseline.spec;
    spec.check_params(&baseline.params, "")?;
    let (i, o, act) = (spec.d_in, spec.d_out, spec.activation);
    match spec.kind {
        LayerKind::Ds | LayerKind::NgnnInner => {
            let (w1, w2) = (w(baseline, "w1")?, w(baseline, "w2")?);
            Ok(vec![sun(i, o, act, &[("u2r", w1.clone()), ("u2", w1.clone()), ("u4r", w2.clone()), ("u4", w2.clone())])?])
        }
        LayerKind::Dss => {
            let (a, b) = (w(baseline, "w1_1")?, w(baseline, "w1_2")?);
            let (c, d) = (w(baseline, "w2_1")?, w(baseline, "w2_2")?);
            Ok(vec![sun(
                i,
                o,
                act,
                &[
                    ("u2r", a.clone()),
                    ("u2", a.clone()),
                    ("u4r", b.clone()),
                    ("u4", b.clone()),
                    ("u5r", c.clone()),
                    ("u5", c.clone()),
                    ("u6r", d.clone()),
                    ("u6", d.clone()),
                ],
            )?])
        }
        LayerKind::Gnnak | LayerKind::GnnakCtx => {
            reject_masked(baseline)?;
            let mut out = Vec::new();
            for l in 0..spec.inner_depth {
                let (w1, w2) = (w(baseline, &format!("ds{l}.w1"))?, w(baseline, &format!("ds{l}.w2"))?);
                let d = w1.shape[1];
                out.push(sun(d, o, Activation::Relu, &[("u2r", w1.clone()), ("u2", w1.clone()), ("u4r", w2.clone()), ("u4", w2.clone())])?);
            }
            // roots first collect their pooled value, then every copy of node i reads it
            let id = Tensor::eye(o);
            let mut pool = vec![("u2r", id.clone()), ("u3r", id.clone())];
            if spec.kind == LayerKind::GnnakCtx {
                pool.push(("u5r", id.clone()));
            }
            out.push(sun(o, o, Activation::Identity, &pool)?);
            out.push(sun(o, o, act, &[("u2r", id.clone()), ("u0", id)])?);
            Ok(out)
        }
        LayerKind::Idgnn => {
            let (w1, w2, w3) = (w(baseline, "w1")?, w(baseline, "w2")?, w(baseline, "w3")?);
            let first = sun(i, 2 * o, Activation::Identity, &[("u2r", vstack(w1, w3)), ("u2", vstack(w1, w2))])?;
            let keep = hstack(&Tensor::eye(o), &zeros(o, o));
            let msg = hstack(&zeros(o, o), &Tensor::eye(o));
            let second = sun(2 * o, o, act, &[("u2r", keep.clone()), ("u2", keep), ("u4r", msg.clone()), ("u4", msg)])?;
            Ok(vec![first, second])
        }
        k => Err(LayerError::Unsupported(format!("{k:?} is not a subgraph-network baseline"))),
    }
}

fn reign_ds(i: usize, o: usize, act: Activation, w1: &Tensor, w2: &Tensor) -> Result<Layer> {
    // one weight name per role, shared between roots and non-roots
    let own = ReignTerm::plain(TermId::SelfTerm, "w1");
    reign(
        i,
        o,
        act,
        vec![(own.clone(), w1.clone()), (ReignTerm::agg(TermId::On2, Variant::LocalSubgraph, "w2"), w2.clone())],
        vec![(own, w1.clone()), (ReignTerm::agg(TermId::Off3, Variant::LocalSubgraph, "w2"), w2.clone())],
    )
}

/// A stack of ReIGN(2) layers computing the same function as `baseline`.
pub fn reign_weights_from(baseline: &Layer) -> Result<Vec<Layer>> {
    use TermId::*;
    use Variant::*;
    let spec = &baseline.spec;
    spec.check_params(&baseline.params, "")?;
    let (i, o, act) = (spec.d_in, spec.d_out, spec.activation);
    match spec.kind {
        LayerKind::Ds | LayerKind::NgnnInner => Ok(vec![reign_ds(i, o, act, w(baseline, "w1")?, w(baseline, "w2")?)?]),
        LayerKind::Dss => {
            let (a, b) = (w(baseline, "w1_1")?, w(baseline, "w1_2")?);
            let (c, d) = (w(baseline, "w2_1")?, w(baseline, "w2_2")?);
            let (zo, zi, id) = (zeros(o, i), zeros(i, i), Tensor::eye(i));
            // channels [0, o): the local update; [o, o + i): sum over subgraphs
            let first = reign(
                i,
                o + i,
                Activation::Identity,
                vec![
                    (on(SelfTerm, None, "self"), vstack(a, &id)),
                    (on(On2, Some(LocalSubgraph), "msg"), vstack(b, &zi)),
                    (on(On3, Some(Global), "needle"), vstack(&zo, &id)),
                ],
                vec![
                    (off(SelfTerm, None, "self"), vstack(a, &zi)),
                    (off(Off3, Some(LocalSubgraph), "msg"), vstack(b, &zi)),
                    (off(Off2, Some(Global), "needle"), vstack(&zo, &id)),
                    (off(NodeAsRoot, None, "root_copy"), vstack(&zo, &id)),
                ],
            )?;
            let keep = hstack(&Tensor::eye(o), c);
            let msg = hstack(&zeros(o, o), d);
            let second = reign(
                o + i,
                o,
                act,
                vec![(on(SelfTerm, None, "self"), keep.clone()), (on(On2, Some(LocalOriginal), "msg"), msg.clone())],
                vec![(off(SelfTerm, None, "self"), keep), (off(Off3, Some(LocalOriginal), "msg"), msg)],
            )?;
            Ok(vec![first, second])
        }
        LayerKind::Gnnak | LayerKind::GnnakCtx => {
            reject_masked(baseline)?;
            let mut out = Vec::new();
            for l in 0..spec.inner_depth {
                let (w1, w2) = (w(baseline, &format!("ds{l}.w1"))?, w(baseline, &format!("ds{l}.w2"))?);
                out.push(reign_ds(w1.shape[1], o, Activation::Relu, w1, w2)?);
            }
            let ctx = spec.kind == LayerKind::GnnakCtx;
            let copies = if ctx { 3.0 } else { 2.0 };
            let id = Tensor::eye(o);
            let mut on_t = vec![(on(SelfTerm, None, "self"), scaled_eye(o, copies)), (on(On2, Some(Global), "readout"), id.clone())];
            let mut off_t = vec![(off(NodeAsRoot, None, "root_copy"), scaled_eye(o, copies)), (off(Off4, Some(Global), "readout"), id.clone())];
            if ctx {
                on_t.push((on(On3, Some(Global), "needle"), id.clone()));
                off_t.push((off(Off2, Some(Global), "needle"), id));
            }
            out.push(reign(o, o, act, on_t, off_t)?);
            Ok(out)
        }
        LayerKind::Idgnn => {
            let (w1, w2, w3) = (w(baseline, "w1")?, w(baseline, "w2")?, w(baseline, "w3")?);
            let first = reign(
                i,
                2 * o,
                Activation::Identity,
                vec![(on(SelfTerm, None, "self"), vstack(w1, w3))],
                vec![(off(SelfTerm, None, "self"), vstack(w1, w2))],
            )?;
            let keep = hstack(&Tensor::eye(o), &zeros(o, o));
            let msg = hstack(&zeros(o, o), &Tensor::eye(o));
            let second = reign(
                2 * o,
                o,
                act,
                vec![(on(SelfTerm, None, "self"), keep.clone()), (on(On2, Some(LocalSubgraph), "msg"), msg.clone())],
                vec![(off(SelfTerm, None, "self"), keep), (off(Off3, Some(LocalSubgraph), "msg"), msg)],
            )?;
            Ok(vec![first, second])
        }
        k => Err(LayerError::Unsupported(format!("{k:?} is not a subgraph-network baseline"))),
    }
}

/// Two ReIGN(2) layers equal to one linear SUN layer. The first widens to
/// `d_out + d_in` channels holding the pre-activation minus the
/// cross-subgraph terms, plus the sum over subgraphs of each node; the second
/// adds the cross-subgraph terms and applies the activation.
pub fn reign_stack_from_sun(layer: &Layer) -> Result<Vec<Layer>> {
    use TermId::*;
    use Variant::*;
    let spec = &layer.spec;
    if spec.kind != LayerKind::SunLinear {
        return Err(LayerError::Unsupported(format!("{:?} has no ReIGN(2) form here", spec.kind)));
    }
    if spec.vertical != Aggregation::Sum {
        return Err(LayerError::Unsupported("mean pooling across subgraphs".into()));
    }
    spec.check_params(&layer.params, "")?;
    let (i, o) = (spec.d_in, spec.d_out);
    let u = |n: &str| w(layer, n);
    let (zo, zi, id) = (zeros(o, i), zeros(i, i), Tensor::eye(i));
    // subgraph readouts include the root, the global terms exclude it
    let first = reign(
        i,
        o + i,
        Activation::Identity,
        vec![
            (on(SelfTerm, None, "self"), vstack(&plus(u("u2r")?, u("u3r")?), &id)),
            (on(On2, Some(Global), "readout"), vstack(u("u3r")?, &zi)),
            (on(On2, Some(LocalSubgraph), "msg"), vstack(u("u4r")?, &zi)),
            (on(On3, Some(Global), "needle"), vstack(&zo, &id)),
        ],
        vec![
            (off(NodeAsRoot, None, "root_copy"), vstack(u("u0")?, &id)),
            (off(RootOfSubgraph, None, "sub_root"), vstack(&plus(u("u1")?, u("u3")?), &zi)),
            (off(SelfTerm, None, "self"), vstack(u("u2")?, &zi)),
            (off(Off3, Some(Global), "readout"), vstack(u("u3")?, &zi)),
            (off(Off3, Some(LocalSubgraph), "msg"), vstack(u("u4")?, &zi)),
            (off(Off2, Some(Global), "needle"), vstack(&zo, &id)),
        ],
    )?;
    let eye = Tensor::eye(o);
    let second = reign(
        o + i,
        o,
        spec.activation,
        vec![
            (on(SelfTerm, None, "self"), hstack(&eye, u("u5r")?)),
            (on(On2, Some(LocalOriginal), "msg"), hstack(&zeros(o, o), u("u6r")?)),
        ],
        vec![
            (off(SelfTerm, None, "self"), hstack(&eye, u("u5")?)),
            (off(Off3, Some(LocalOriginal), "msg"), hstack(&zeros(o, o), u("u6")?)),
        ],
    )?;
    Ok(vec![first, second])
}
