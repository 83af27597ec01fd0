//! Subgraph Union Network layers: separate weights for roots and non-roots.
//!
//! Root `i` sees itself, messages inside subgraph `i`, the readout of
//! subgraph `i`, its own representations across subgraphs, and original-graph
//! messages of those cross-subgraph pools. Non-root `(k, i)` additionally sees
//! its root-copy `x_i^i` and the root of its subgraph `x_k^k`.

use std::rc::Rc;

use crate::autograd::{SparseMat, Tape, Var};

use super::ops::BagOps;
use super::{Aggregation, LayerSpec, Result, Scope};

/// Quantities shared by both forms, all `[n, d_in]` except `x` and `local`.
struct Pools {
    root: Var,
    readout: Var,
    local: Var,
    root_local: Var,
    vertical: Var,
    orig_vertical: Var,
}

fn pools(t: &mut Tape, spec: &LayerSpec, ops: &BagOps, x: Var) -> Result<Pools> {
    let root = t.spmm(&ops.diag, x)?;
    let readout = t.spmm(&ops.readout, x)?;
    let local = t.spmm(&ops.sub_adj, x)?;
    let root_local = t.spmm(&ops.diag, local)?;
    let vertical = match spec.vertical {
        Aggregation::Sum => t.spmm(&ops.vertical, x)?,
        Aggregation::Mean => {
            let m: Rc<SparseMat> = Rc::new(ops.vertical.row_mean());
            t.spmm(&m, x)?
        }
    };
    let orig_vertical = t.spmm(&ops.orig_adj, vertical)?;
    Ok(Pools { root, readout, local, root_local, vertical, orig_vertical })
}

/// Roots written on the diagonal, non-roots everywhere else.
fn combine(t: &mut Tape, ops: &BagOps, root: Var, off: Var) -> Result<Var> {
    let on = t.spmm(&ops.embed_diag, root)?;
    let off = t.spmm(&ops.off_select, off)?;
    Ok(t.add(on, off)?)
}

pub(super) fn linear(t: &mut Tape, s: &Scope, spec: &LayerSpec, ops: &BagOps, x: Var) -> Result<Var> {
    let p = pools(t, spec, ops, x)?;
    let root_terms = [
        s.lin(t, p.root, "u2r")?,
        s.lin(t, p.readout, "u3r")?,
        s.lin(t, p.root_local, "u4r")?,
        s.lin(t, p.vertical, "u5r")?,
        s.lin(t, p.orig_vertical, "u6r")?,
    ];
    let root = t.add_all(&root_terms)?;
    let own = s.lin(t, x, "u2")?;
    let msg = s.lin(t, p.local, "u4")?;
    let per_node = [s.lin(t, p.root, "u0")?, s.lin(t, p.vertical, "u5")?, s.lin(t, p.orig_vertical, "u6")?];
    let per_node = t.add_all(&per_node)?;
    let per_sub = [s.lin(t, p.root, "u1")?, s.lin(t, p.readout, "u3")?];
    let per_sub = t.add_all(&per_sub)?;
    let by_node = t.spmm(&ops.by_node, per_node)?;
    let by_sub = t.spmm(&ops.by_sub, per_sub)?;
    let off = t.add_all(&[own, msg, by_node, by_sub])?;
    combine(t, ops, root, off)
}

/// `mlp((1 + eps) a + b)`.
fn gin(t: &mut Tape, s: &Scope, spec: &LayerSpec, a: Var, b: Var, name: &str) -> Result<Var> {
    let a = if spec.eps == 0.0 { a } else { t.scale(a, 1.0 + spec.eps) };
    let z = t.add(a, b)?;
    s.mlp(t, z, name)
}

pub(super) fn expressive(t: &mut Tape, s: &Scope, spec: &LayerSpec, ops: &BagOps, x: Var) -> Result<Var> {
    let p = pools(t, spec, ops, x)?;
    let root_terms = [
        s.mlp(t, p.root, "mu2r")?,
        s.mlp(t, p.readout, "mu3r")?,
        gin(t, s, spec, p.root, p.root_local, "g0r")?,
        gin(t, s, spec, p.vertical, p.orig_vertical, "g1r")?,
    ];
    let root = t.add_all(&root_terms)?;
    let own = s.mlp(t, x, "mu2")?;
    let msg = gin(t, s, spec, x, p.local, "g0")?;
    let per_node = [s.mlp(t, p.root, "mu0")?, gin(t, s, spec, p.vertical, p.orig_vertical, "g1")?];
    let per_node = t.add_all(&per_node)?;
    let per_sub = [s.mlp(t, p.root, "mu1")?, s.mlp(t, p.readout, "mu3")?];
    let per_sub = t.add_all(&per_sub)?;
    let by_node = t.spmm(&ops.by_node, per_node)?;
    let by_sub = t.spmm(&ops.by_sub, per_sub)?;
    let off = t.add_all(&[own, msg, by_node, by_sub])?;
    combine(t, ops, root, off)
}
