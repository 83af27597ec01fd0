//! Interpreted orbit-tensor programmes, the bag <-> orbit encoding, and the
//! programmes that compute each selection policy from the lifted graph.
//!
//! Channel layout shared by the encoder, the lift and the programmes, at
//! width `max(d', 3)`:
//! * `iii`, `ijj`: node features in channels `0..d'`;
//! * `iij`, `iji`, `ijk`: subgraph connectivity in channel 0, original
//!   connectivity in channel 2;
//! * `iij` channel 1: ego-net membership of the non-root node (ego policies).

use serde::{Deserialize, Serialize};

use super::{Face, Ign3Error, Orbit, OrbitTensor3, VARS};
use crate::graph::Graph;
use crate::policy::{PolicyKind, SubgraphBag};

pub const CH_CONN: usize = 0;
pub const CH_MEMBER: usize = 1;
pub const CH_ORIG: usize = 2;

/// One pool-broadcast map from a source component into the target of the
/// enclosing [`Update`], followed by a channel mix (`weight` rows are
/// output channels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub source: Orbit,
    pub keep: String,
    pub pattern: String,
    pub weight: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Update {
    pub target: Orbit,
    pub terms: Vec<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointOp {
    Linear {
        weight: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<Vec<f64>>,
    },
    Relu,
    /// Overwrites channel `dst[t]` with channel `src[t]`.
    Route { src: Vec<usize>, dst: Vec<usize> },
    /// `out = relu(2a + 2b - 3)` on {0,1} inputs.
    LogicalAnd { a: usize, b: usize, out: usize },
    /// `x -> -relu(-x + 1) + 1`, i.e. `min(x, 1)`.
    Clip1 { channels: Vec<usize> },
    /// Zeroes the value channels wherever the mask channel is zero.
    Gate { values: Vec<usize>, mask: usize },
    /// Linear layers with ReLU between them (none after the last).
    Mlp { layers: Vec<(Vec<Vec<f64>>, Vec<f64>)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Instr {
    /// Equivariant linear layer. Each listed target is rebuilt from its
    /// terms; unlisted components are carried over, resized to `width`.
    Linear { width: usize, updates: Vec<Update> },
    /// Pointwise map on the listed components. Width-changing maps must be
    /// applied to all five components at once.
    Pointwise { orbits: Vec<Orbit>, apply: PointOp },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Ign3Program {
    pub instrs: Vec<Instr>,
}

impl Ign3Program {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("programme serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, Ign3Error> {
        serde_json::from_str(s).map_err(|e| Ign3Error::BadSignature(e.to_string()))
    }
}

/// `i,j,j`-style pattern that maps a component onto itself.
fn self_pattern(o: Orbit) -> String {
    o.classes().iter().map(|&c| VARS[c].to_string()).collect::<Vec<_>>().join(",")
}

fn all_vars(o: Orbit) -> String {
    o.vars().iter().map(char::to_string).collect::<Vec<_>>().join(",")
}

/// `width x d_in` matrix copying channel `c` to `c` for every `c` kept by `keep`.
fn eye(width: usize, d_in: usize, keep: impl Fn(usize) -> bool) -> Vec<Vec<f64>> {
    (0..width).map(|o| (0..d_in).map(|c| if c == o && keep(c) { 1.0 } else { 0.0 }).collect()).collect()
}

fn unit(width: usize, d_in: usize, from: usize, to: usize) -> Vec<Vec<f64>> {
    (0..width).map(|o| (0..d_in).map(|c| if o == to && c == from { 1.0 } else { 0.0 }).collect()).collect()
}

fn identity_term(o: Orbit, weight: Vec<Vec<f64>>) -> Term {
    Term { source: o, keep: all_vars(o), pattern: self_pattern(o), weight }
}

fn check_channel(ch: usize, d: usize) -> Result<(), Ign3Error> {
    if ch >= d {
        Err(Ign3Error::BadChannel { ch, d })
    } else {
        Ok(())
    }
}

fn apply_term(y: &OrbitTensor3, target: Orbit, term: &Term) -> Result<Face, Ign3Error> {
    if term.weight.iter().any(|r| r.len() != y.d) {
        return Err(Ign3Error::ShapeMismatch(format!("term weight needs {} columns", y.d)));
    }
    y.comp(term.source).pool(&term.keep)?.broadcast(&target.classes(), &term.pattern)?.channel_map(&term.weight, None)
}

fn run_linear(y: &OrbitTensor3, width: usize, updates: &[Update]) -> Result<OrbitTensor3, Ign3Error> {
    let mut out = y.resize(width);
    for o in Orbit::ALL {
        let mine: Vec<&Update> = updates.iter().filter(|u| u.target == o).collect();
        if mine.is_empty() {
            continue;
        }
        let mut acc = Face::zeros(y.n, o.arity(), width);
        let tuples = acc.tuples();
        for u in &mine {
            for term in &u.terms {
                if term.weight.len() != width {
                    return Err(Ign3Error::ShapeMismatch(format!("term weight needs {width} rows")));
                }
                let f = apply_term(y, o, term)?;
                for t in &tuples {
                    for (a, b) in acc.at_mut(t).iter_mut().zip(f.at(t)) {
                        *a += b;
                    }
                }
            }
            if let Some(b) = &u.bias {
                if b.len() != width {
                    return Err(Ign3Error::ShapeMismatch(format!("bias needs {width} entries")));
                }
                for t in &tuples {
                    for (a, bv) in acc.at_mut(t).iter_mut().zip(b) {
                        *a += bv;
                    }
                }
            }
        }
        *out.comp_mut(o) = acc;
    }
    Ok(out)
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn dense(w: &[Vec<f64>], b: Option<&[f64]>, x: &[f64]) -> Vec<f64> {
    w.iter()
        .enumerate()
        .map(|(o, row)| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b.map_or(0.0, |b| b[o]))
        .collect()
}

fn out_width(op: &PointOp, d: usize) -> Result<usize, Ign3Error> {
    let check = |w: &[Vec<f64>], d_in: usize| {
        if w.iter().any(|r| r.len() != d_in) {
            Err(Ign3Error::ShapeMismatch(format!("matrix needs {d_in} columns")))
        } else {
            Ok(w.len())
        }
    };
    match op {
        PointOp::Linear { weight, bias } => {
            if bias.as_ref().is_some_and(|b| b.len() != weight.len()) {
                return Err(Ign3Error::ShapeMismatch("bias length".into()));
            }
            check(weight, d)
        }
        PointOp::Mlp { layers } => layers.iter().try_fold(d, |d_in, (w, b)| {
            if b.len() != w.len() {
                return Err(Ign3Error::ShapeMismatch("bias length".into()));
            }
            check(w, d_in)
        }),
        PointOp::Route { src, dst } => {
            if src.len() != dst.len() {
                return Err(Ign3Error::ShapeMismatch("route lists differ in length".into()));
            }
            for &c in src.iter().chain(dst) {
                check_channel(c, d)?;
            }
            Ok(d)
        }
        PointOp::LogicalAnd { a, b, out } => {
            for c in [*a, *b, *out] {
                check_channel(c, d)?;
            }
            Ok(d)
        }
        PointOp::Clip1 { channels } => {
            for &c in channels {
                check_channel(c, d)?;
            }
            Ok(d)
        }
        PointOp::Gate { values, mask } => {
            for &c in values.iter().chain([mask]) {
                check_channel(c, d)?;
            }
            Ok(d)
        }
        PointOp::Relu => Ok(d),
    }
}

fn apply_point(op: &PointOp, x: &[f64]) -> Result<Vec<f64>, Ign3Error> {
    Ok(match op {
        PointOp::Linear { weight, bias } => dense(weight, bias.as_deref(), x),
        PointOp::Relu => x.iter().map(|&v| relu(v)).collect(),
        PointOp::Route { src, dst } => {
            let mut y = x.to_vec();
            for (&s, &t) in src.iter().zip(dst) {
                y[t] = x[s];
            }
            y
        }
        PointOp::LogicalAnd { a, b, out } => {
            let (va, vb) = (x[*a], x[*b]);
            if !(va == 0.0 || va == 1.0) || !(vb == 0.0 || vb == 1.0) {
                return Err(Ign3Error::DomainError(format!("logical_and on ({va}, {vb})")));
            }
            let mut y = x.to_vec();
            y[*out] = relu(2.0 * va + 2.0 * vb - 3.0);
            y
        }
        PointOp::Clip1 { channels } => {
            let mut y = x.to_vec();
            for &c in channels {
                y[c] = -relu(-x[c] + 1.0) + 1.0;
            }
            y
        }
        PointOp::Gate { values, mask } => {
            let mut y = x.to_vec();
            let on = if x[*mask] != 0.0 { 1.0 } else { 0.0 };
            for &c in values {
                y[c] = x[c] * on;
            }
            y
        }
        PointOp::Mlp { layers } => {
            let mut h = x.to_vec();
            for (l, (w, b)) in layers.iter().enumerate() {
                h = dense(w, Some(b), &h);
                if l + 1 < layers.len() {
                    h.iter_mut().for_each(|v| *v = relu(*v));
                }
            }
            h
        }
    })
}

fn run_pointwise(y: &OrbitTensor3, orbits: &[Orbit], op: &PointOp) -> Result<OrbitTensor3, Ign3Error> {
    let width = out_width(op, y.d)?;
    if width != y.d && !Orbit::ALL.iter().all(|o| orbits.contains(o)) {
        return Err(Ign3Error::ShapeMismatch("width-changing pointwise map must cover every component".into()));
    }
    let mut out = y.resize(width);
    for &o in orbits {
        let src = y.comp(o);
        let mut dst = Face::zeros(y.n, o.arity(), width);
        for t in src.tuples() {
            let v = apply_point(op, src.at(&t))?;
            dst.at_mut(&t).copy_from_slice(&v);
        }
        *out.comp_mut(o) = dst;
    }
    Ok(out)
}

/// Executes a programme instruction by instruction.
pub fn run_program(prog: &Ign3Program, y: &OrbitTensor3) -> Result<OrbitTensor3, Ign3Error> {
    let mut cur = y.clone();
    for ins in &prog.instrs {
        cur = match ins {
            Instr::Linear { width, updates } => run_linear(&cur, *width, updates)?,
            Instr::Pointwise { orbits, apply } => run_pointwise(&cur, orbits, apply)?,
        };
    }
    Ok(cur)
}

/// Width of the bag encoding for feature width `d`.
pub fn layout_width(d: usize) -> usize {
    d.max(3)
}

/// Orbit form of the graph under the null policy: features broadcast over
/// the subgraph axis, adjacency broadcast into the three connectivity
/// components, then copied into the reserved original-connectivity channel.
pub fn lift(g: &Graph) -> OrbitTensor3 {
    let (n, d) = (g.n(), g.d());
    let width = layout_width(d);
    let mut diag = Face::zeros(n, 1, width);
    let mut off = Face::zeros(n, 2, width);
    for v in 0..n {
        diag.at_mut(&[v])[..d].copy_from_slice(g.feature_row(v));
    }
    for t in off.tuples() {
        if g.has_edge(t[0], t[1]) {
            off.at_mut(&t)[CH_CONN] = 1.0;
        }
    }
    let b = |f: &Face, o: Orbit, p: &str| f.broadcast(&o.classes(), p).expect("lift patterns are valid");
    let comps = [
        b(&diag, Orbit::Iii, "i,i,i"),
        b(&off, Orbit::Iij, "i,i,j"),
        b(&off, Orbit::Iji, "i,j,i"),
        b(&diag, Orbit::Ijj, "*,i,i"),
        b(&off, Orbit::Ijk, "*,i,j"),
    ];
    let y = OrbitTensor3::from_components(comps).expect("consistent lift");
    let keep = Ign3Program {
        instrs: vec![Instr::Pointwise {
            orbits: vec![Orbit::Iij, Orbit::Iji, Orbit::Ijk],
            apply: PointOp::Route { src: vec![CH_CONN], dst: vec![CH_ORIG] },
        }],
    };
    run_program(&keep, &y).expect("lift routing is valid")
}

/// Orbit form of a bag in the shared channel layout.
pub fn encode_bag(bag: &SubgraphBag) -> OrbitTensor3 {
    let (n, d) = (bag.n, bag.d);
    let mut y = OrbitTensor3::zeros(n, layout_width(d));
    let one = |b: bool| if b { 1.0 } else { 0.0 };
    for i in 0..n {
        y.comp_mut(Orbit::Iii).at_mut(&[i])[..d].copy_from_slice(bag.feat(i, i));
        for j in 0..n {
            if j == i {
                continue;
            }
            y.comp_mut(Orbit::Ijj).at_mut(&[i, j])[..d].copy_from_slice(bag.feat(i, j));
            let e = y.comp_mut(Orbit::Iij).at_mut(&[i, j]);
            e[CH_CONN] = one(bag.edge(i, i, j));
            e[CH_ORIG] = one(bag.orig_edge(i, j));
            if bag.policy.ego_depth().is_some() {
                e[CH_MEMBER] = one(bag.member(i, j));
            }
            let e = y.comp_mut(Orbit::Iji).at_mut(&[i, j]);
            e[CH_CONN] = one(bag.edge(i, j, i));
            e[CH_ORIG] = one(bag.orig_edge(j, i));
            for k in 0..n {
                if k != i && k != j {
                    let e = y.comp_mut(Orbit::Ijk).at_mut(&[i, j, k]);
                    e[CH_CONN] = one(bag.edge(i, j, k));
                    e[CH_ORIG] = one(bag.orig_edge(j, k));
                }
            }
        }
    }
    y
}

/// Reads a bag back from the shared layout. Connectivity is thresholded at
/// 1/2; membership comes from the `iij` channel for ego policies and from
/// the policy itself otherwise.
pub fn decode_bag(y: &OrbitTensor3, d_feat: usize, policy: PolicyKind) -> Result<SubgraphBag, Ign3Error> {
    if y.d < layout_width(d_feat) {
        return Err(Ign3Error::ShapeMismatch(format!("width {} cannot hold {d_feat} features", y.d)));
    }
    let n = y.n;
    let on = |x: f64| x > 0.5;
    let mut bag = SubgraphBag {
        n,
        d: d_feat,
        sub_adj: vec![false; n * n * n],
        sub_feat: vec![0.0; n * n * d_feat],
        membership: vec![true; n * n],
        orig_adj: vec![false; n * n],
        policy,
    };
    for i in 0..n {
        for j in 0..n {
            let feat = if i == j { y.comp(Orbit::Iii).at(&[i]) } else { y.comp(Orbit::Ijj).at(&[i, j]) };
            bag.sub_feat[(i * n + j) * d_feat..(i * n + j + 1) * d_feat].copy_from_slice(&feat[..d_feat]);
            if i == j {
                bag.membership[i * n + i] = policy != PolicyKind::Nd;
                continue;
            }
            let iij = y.comp(Orbit::Iij).at(&[i, j]);
            let iji = y.comp(Orbit::Iji).at(&[i, j]);
            if policy.ego_depth().is_some() {
                bag.membership[i * n + j] = on(iij[CH_MEMBER]);
            }
            bag.sub_adj[(i * n + i) * n + j] = on(iij[CH_CONN]);
            bag.sub_adj[(i * n + j) * n + i] = on(iji[CH_CONN]);
            bag.orig_adj[i * n + j] = on(iij[CH_ORIG]);
            for k in 0..n {
                if k != i && k != j {
                    bag.sub_adj[(i * n + j) * n + k] = on(y.comp(Orbit::Ijk).at(&[i, j, k])[CH_CONN]);
                }
            }
        }
    }
    Ok(bag)
}

fn linear(width: usize, updates: Vec<Update>) -> Instr {
    Instr::Linear { width, updates }
}

fn update(target: Orbit, terms: Vec<Term>) -> Update {
    Update { target, terms, bias: None }
}

fn pointwise(orbits: &[Orbit], apply: PointOp) -> Instr {
    Instr::Pointwise { orbits: orbits.to_vec(), apply }
}

/// Adds the root mark as a bias on `iii` in a new last feature channel.
fn marking(d: usize, instrs: &mut Vec<Instr>) -> usize {
    let (w_in, w_out) = (layout_width(d), layout_width(d + 1));
    let mut bias = vec![0.0; w_out];
    bias[d] = 1.0;
    instrs.push(linear(
        w_out,
        vec![Update { target: Orbit::Iii, terms: vec![identity_term(Orbit::Iii, eye(w_out, w_in, |_| true))], bias: Some(bias) }],
    ));
    w_out
}

/// Breadth-first reachability on `ijj`, then restriction of the
/// connectivity to pairs of reached nodes and a membership write-out.
fn ego_net(h: usize, width: usize, instrs: &mut Vec<Instr>) {
    let (reach, scratch, wide) = (width, width + 1, width + 2);
    let keep_all = |w: usize| eye(w, w, |_| true);
    // reach(i, j) = 1 for neighbours of the root
    instrs.push(linear(
        wide,
        vec![update(
            Orbit::Ijj,
            vec![
                identity_term(Orbit::Ijj, eye(wide, width, |_| true)),
                Term { source: Orbit::Iij, keep: "i,j".into(), pattern: "i,j,j".into(), weight: unit(wide, width, CH_CONN, reach) },
            ],
        )],
    ));
    // copy reach(i, ·) onto the second node of every (i, j, k), AND with the
    // original edge j -- k, pool out k and saturate
    let spread = |pattern: &str| {
        linear(
            wide,
            vec![update(
                Orbit::Ijk,
                vec![
                    identity_term(Orbit::Ijk, eye(wide, wide, |c| c != scratch)),
                    Term { source: Orbit::Ijj, keep: "i,j".into(), pattern: pattern.into(), weight: unit(wide, wide, reach, scratch) },
                ],
            )],
        )
    };
    for _ in 1..h {
        instrs.push(spread("i,*,j"));
        instrs.push(pointwise(&[Orbit::Ijk], PointOp::LogicalAnd { a: CH_ORIG, b: scratch, out: scratch }));
        instrs.push(linear(
            wide,
            vec![update(
                Orbit::Ijj,
                vec![
                    identity_term(Orbit::Ijj, keep_all(wide)),
                    Term { source: Orbit::Ijk, keep: "i,j".into(), pattern: "i,j,j".into(), weight: unit(wide, wide, scratch, reach) },
                ],
            )],
        ));
        instrs.push(pointwise(&[Orbit::Ijj], PointOp::Clip1 { channels: vec![reach] }));
    }
    // keep edge j -- k in subgraph i only when both ends were reached
    for pattern in ["i,j,*", "i,*,j"] {
        instrs.push(spread(pattern));
        instrs.push(pointwise(&[Orbit::Ijk], PointOp::LogicalAnd { a: CH_CONN, b: scratch, out: CH_CONN }));
    }
    instrs.push(linear(
        width,
        vec![update(
            Orbit::Iij,
            vec![
                identity_term(Orbit::Iij, eye(width, wide, |c| c != CH_MEMBER)),
                Term { source: Orbit::Ijj, keep: "i,j".into(), pattern: "i,i,j".into(), weight: unit(width, wide, reach, CH_MEMBER) },
            ],
        )],
    ));
}

/// Programme taking `lift(G)` (feature width `d`) to the orbit encoding of
/// `apply_policy(G, kind)`.
pub fn policy_program(kind: PolicyKind, d: usize) -> Result<Ign3Program, Ign3Error> {
    let mut instrs = Vec::new();
    let width = layout_width(d);
    match kind {
        PolicyKind::Null => {}
        PolicyKind::Nd => {
            let drop_conn = |o| identity_term(o, eye(width, width, |c| c != CH_CONN));
            instrs.push(linear(
                width,
                vec![update(Orbit::Iij, vec![drop_conn(Orbit::Iij)]), update(Orbit::Iji, vec![drop_conn(Orbit::Iji)])],
            ));
        }
        PolicyKind::Nm => {
            marking(d, &mut instrs);
        }
        PolicyKind::Ego(h) | PolicyKind::EgoPlus(h) => {
            if h == 0 {
                return Err(Ign3Error::UnsupportedPolicy(kind.to_string()));
            }
            let w = if kind.is_marked() { marking(d, &mut instrs) } else { width };
            ego_net(h, w, &mut instrs);
        }
    }
    Ok(Ign3Program { instrs })
}

fn explicit_updates(width: usize, d_in: usize, updates: &[Update]) -> Vec<Update> {
    Orbit::ALL
        .iter()
        .map(|&o| {
            let mine: Vec<&Update> = updates.iter().filter(|u| u.target == o).collect();
            if mine.is_empty() {
                return update(o, vec![identity_term(o, eye(width, d_in, |_| true))]);
            }
            let terms = mine.iter().flat_map(|u| u.terms.clone()).collect();
            let mut bias: Option<Vec<f64>> = None;
            for b in mine.iter().filter_map(|u| u.bias.as_ref()) {
                let acc = bias.get_or_insert_with(|| vec![0.0; width]);
                acc.iter_mut().zip(b).for_each(|(a, v)| *a += v);
            }
            Update { target: o, terms, bias }
        })
        .collect()
}

fn stack_signed(w: &[Vec<f64>], split_input: bool) -> Vec<Vec<f64>> {
    let row = |r: &Vec<f64>, s: f64| -> Vec<f64> {
        let pos: Vec<f64> = r.iter().map(|v| s * v).collect();
        if split_input {
            pos.iter().cloned().chain(pos.iter().map(|v| -v)).collect()
        } else {
            pos
        }
    };
    w.iter().map(|r| row(r, 1.0)).chain(w.iter().map(|r| row(r, -1.0))).collect()
}

/// Rewrites a programme made only of linear layers into the strict form
/// `L, relu, L, relu, ..., L` computing the same function, using
/// `x = relu(x) - relu(-x)` on doubled channels.
pub fn interleave_relu(prog: &Ign3Program, d_in: usize) -> Result<Ign3Program, Ign3Error> {
    let mut instrs = Vec::new();
    let mut d = d_in;
    for (t, ins) in prog.instrs.iter().enumerate() {
        let Instr::Linear { width, updates } = ins else {
            return Err(Ign3Error::DomainError("only gate-free linear programmes can be interleaved".into()));
        };
        let doubled = explicit_updates(*width, d, updates)
            .into_iter()
            .map(|u| Update {
                target: u.target,
                terms: u
                    .terms
                    .into_iter()
                    .map(|term| Term { weight: stack_signed(&term.weight, t > 0), ..term })
                    .collect(),
                bias: u.bias.map(|b| b.iter().cloned().chain(b.iter().map(|v| -v)).collect()),
            })
            .collect();
        instrs.push(linear(2 * width, doubled));
        instrs.push(pointwise(&Orbit::ALL, PointOp::Relu));
        d = *width;
    }
    if instrs.is_empty() {
        return Ok(Ign3Program::default());
    }
    let merge: Vec<Vec<f64>> = (0..d)
        .map(|o| (0..2 * d).map(|c| if c == o { 1.0 } else if c == o + d { -1.0 } else { 0.0 }).collect())
        .collect();
    instrs.push(linear(d, Orbit::ALL.iter().map(|&o| update(o, vec![identity_term(o, merge.clone())])).collect()));
    Ok(Ign3Program { instrs })
}
