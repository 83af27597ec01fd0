//! Third-order orbit tensors and the pool/broadcast algebra acting on them.
//!
//! A tensor on `[n]^3` splits into five components under the diagonal action
//! of S_n, one per equality pattern of the index triple: `iii`, `iij`, `iji`,
//! `ijj`, `ijk`. Each component is stored as a [`Face`]: a dense array over
//! tuples of pairwise distinct indices, with every tuple that repeats an index
//! held at zero.

mod basis;
mod program;

pub use basis::{check_equivariance2, enumerate_2ign_basis, matrix_rank, Basis2Op};
pub use program::{
    decode_bag, encode_bag, interleave_relu, layout_width, lift, policy_program, run_program, Ign3Program, Instr, PointOp, Term,
    Update, CH_CONN, CH_MEMBER, CH_ORIG,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Permutation;

#[derive(Debug, Error, PartialEq)]
pub enum Ign3Error {
    #[error("bad signature: {0}")]
    BadSignature(String),
    #[error("channel {ch} out of range for width {d}")]
    BadChannel { ch: usize, d: usize },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("policy {0} has no programme")]
    UnsupportedPolicy(String),
    #[error("need n >= {min}, got {got}")]
    TooSmall { min: usize, got: usize },
}

/// The five S_n-orbits of `[n]^3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orbit {
    Iii,
    Iij,
    Iji,
    Ijj,
    Ijk,
}

impl Orbit {
    pub const ALL: [Orbit; 5] = [Orbit::Iii, Orbit::Iij, Orbit::Iji, Orbit::Ijj, Orbit::Ijk];

    /// Equality class of each of the three cube slots.
    pub fn classes(self) -> [usize; 3] {
        match self {
            Orbit::Iii => [0, 0, 0],
            Orbit::Iij => [0, 0, 1],
            Orbit::Iji => [0, 1, 0],
            Orbit::Ijj => [0, 1, 1],
            Orbit::Ijk => [0, 1, 2],
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Orbit::Iii => 1,
            Orbit::Ijk => 3,
            _ => 2,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Free index names, one per class.
    pub fn vars(self) -> Vec<char> {
        VARS[..self.arity()].to_vec()
    }
}

const VARS: [char; 3] = ['i', 'j', 'k'];

/// Sizes of the five orbits of `[n]^3`, in the order of [`Orbit::ALL`].
pub fn orbit_partition(n: usize) -> [Vec<[usize; 3]>; 5] {
    let mut parts: [Vec<[usize; 3]>; 5] = Default::default();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let o = match (a == b, a == c, b == c) {
                    (true, true, _) => Orbit::Iii,
                    (true, false, _) => Orbit::Iij,
                    (false, true, _) => Orbit::Iji,
                    (false, false, true) => Orbit::Ijj,
                    (false, false, false) => Orbit::Ijk,
                };
                parts[o.index()].push([a, b, c]);
            }
        }
    }
    parts
}

/// Real array over `m`-tuples of distinct indices in `[n]`, with `d`
/// channels. Tuples with a repeated index are never written.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub n: usize,
    pub d: usize,
    pub vars: Vec<char>,
    pub data: Vec<f64>,
}

pub(crate) fn distinct(t: &[usize]) -> bool {
    (0..t.len()).all(|a| (a + 1..t.len()).all(|b| t[a] != t[b]))
}

/// All `m`-tuples over `[n]` with pairwise distinct entries, lexicographic.
pub(crate) fn distinct_tuples(n: usize, m: usize) -> Vec<Vec<usize>> {
    let total = n.pow(m as u32);
    (0..total)
        .map(|mut x| {
            let mut t = vec![0; m];
            for p in (0..m).rev() {
                t[p] = x % n;
                x /= n;
            }
            t
        })
        .filter(|t| distinct(t))
        .collect()
}

fn sorted_sum(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum()
}

impl Face {
    pub fn zeros(n: usize, arity: usize, d: usize) -> Face {
        Face { n, d, vars: VARS[..arity].to_vec(), data: vec![0.0; n.pow(arity as u32) * d] }
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// Offset of the first channel of tuple `t`.
    #[inline]
    pub fn offset(&self, t: &[usize]) -> usize {
        t.iter().fold(0, |acc, &x| acc * self.n + x) * self.d
    }

    pub fn at(&self, t: &[usize]) -> &[f64] {
        let o = self.offset(t);
        &self.data[o..o + self.d]
    }

    pub fn at_mut(&mut self, t: &[usize]) -> &mut [f64] {
        let o = self.offset(t);
        &mut self.data[o..o + self.d]
    }

    pub fn tuples(&self) -> Vec<Vec<usize>> {
        distinct_tuples(self.n, self.arity())
    }

    fn var_position(&self, name: &str) -> Result<usize, Ign3Error> {
        let mut chars = name.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => self
                .vars
                .iter()
                .position(|&v| v == c)
                .ok_or_else(|| Ign3Error::BadSignature(format!("unknown index {c} (have {:?})", self.vars))),
            _ => Err(Ign3Error::BadSignature(format!("bad index name \"{name}\""))),
        }
    }

    /// Sums out every index not listed in `keep` (comma separated, in the
    /// order the result should use). Addends are summed in ascending order
    /// of value, so the result depends only on the multiset of addends.
    pub fn pool(&self, keep: &str) -> Result<Face, Ign3Error> {
        let names: Vec<&str> = keep.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let kept: Vec<usize> = names.iter().map(|s| self.var_position(s)).collect::<Result<_, _>>()?;
        if !distinct(&kept) {
            return Err(Ign3Error::BadSignature(format!("index repeated in \"{keep}\"")));
        }
        let mut out = Face {
            n: self.n,
            d: self.d,
            vars: kept.iter().map(|&p| self.vars[p]).collect(),
            data: vec![0.0; self.n.pow(kept.len() as u32) * self.d],
        };
        let mut bins: Vec<Vec<f64>> = vec![Vec::new(); out.data.len()];
        for t in self.tuples() {
            let k: Vec<usize> = kept.iter().map(|&p| t[p]).collect();
            let o = out.offset(&k);
            for (c, &x) in self.at(&t).iter().enumerate() {
                bins[o + c].push(x);
            }
        }
        for (slot, mut bin) in out.data.iter_mut().zip(bins) {
            *slot = sorted_sum(&mut bin);
        }
        Ok(out)
    }

    /// Broadcasts into a component whose slots fall into equality `classes`
    /// (e.g. `[0, 1, 1]` for `ijj`). `pattern` gives one token per slot: a
    /// source index name, a bare `*`, or a named wildcard `*x`. Slots of one
    /// class must agree; every source index must appear in exactly one class.
    pub fn broadcast(&self, classes: &[usize], pattern: &str) -> Result<Face, Ign3Error> {
        let sig = || Ign3Error::BadSignature(format!("pattern \"{pattern}\" for classes {classes:?}"));
        let tokens: Vec<&str> = pattern.split(',').map(str::trim).collect();
        if tokens.len() != classes.len() {
            return Err(sig());
        }
        let arity = classes.iter().max().map_or(0, |m| m + 1);
        if (0..arity).any(|c| !classes.contains(&c)) {
            return Err(sig());
        }
        // per target class: the token naming it, if any
        let mut named: Vec<Option<&str>> = vec![None; arity];
        let mut bare = vec![false; arity];
        for (slot, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(sig());
            }
            if *tok == "*" {
                bare[classes[slot]] = true;
                continue;
            }
            let c = classes[slot];
            match named[c] {
                None => named[c] = Some(tok),
                Some(prev) if prev != *tok => return Err(sig()),
                _ => {}
            }
        }
        if (0..arity).any(|c| bare[c] && named[c].is_some()) {
            return Err(sig());
        }
        let mut source_of = vec![None; arity];
        let mut used = vec![false; self.arity()];
        for c in 0..arity {
            if let Some(tok) = named[c] {
                if named[..c].contains(&Some(tok)) {
                    return Err(sig());
                }
                if let Some(rest) = tok.strip_prefix('*') {
                    if rest.chars().count() != 1 {
                        return Err(sig());
                    }
                    continue;
                }
                let p = self.var_position(tok)?;
                used[p] = true;
                source_of[c] = Some(p);
            }
        }
        if used.iter().any(|u| !u) {
            return Err(Ign3Error::BadSignature(format!("pattern \"{pattern}\" drops a source index")));
        }
        let mut out = Face::zeros(self.n, arity, self.d);
        let mut src = vec![0; self.arity()];
        for t in out.tuples() {
            for (c, s) in source_of.iter().enumerate() {
                if let Some(p) = s {
                    src[*p] = t[c];
                }
            }
            let o = out.offset(&t);
            out.data[o..o + self.d].copy_from_slice(self.at(&src));
        }
        Ok(out)
    }

    /// `out[σ(t)] = self[t]`.
    pub fn permute(&self, sigma: &Permutation) -> Face {
        let mut out = Face { n: self.n, d: self.d, vars: self.vars.clone(), data: vec![0.0; self.data.len()] };
        for t in self.tuples() {
            let st: Vec<usize> = t.iter().map(|&x| sigma.apply(x)).collect();
            out.at_mut(&st).copy_from_slice(self.at(&t));
        }
        out
    }

    /// Per-entry channel map `y = W x + b`, `W` given as rows.
    pub fn channel_map(&self, w: &[Vec<f64>], b: Option<&[f64]>) -> Result<Face, Ign3Error> {
        if w.iter().any(|r| r.len() != self.d) || b.is_some_and(|b| b.len() != w.len()) {
            return Err(Ign3Error::ShapeMismatch(format!("weight for width {}", self.d)));
        }
        let d_out = w.len();
        let mut out =
            Face { n: self.n, d: d_out, vars: self.vars.clone(), data: vec![0.0; self.n.pow(self.arity() as u32) * d_out] };
        for t in self.tuples() {
            let x = self.at(&t).to_vec();
            let y = out.at_mut(&t);
            for (o, row) in w.iter().enumerate() {
                let mut acc = 0.0;
                for (wv, xv) in row.iter().zip(&x) {
                    acc += wv * xv;
                }
                y[o] = acc + b.map_or(0.0, |b| b[o]);
            }
        }
        Ok(out)
    }

    /// Applies `f` to the channel vector of every valid tuple.
    pub fn map_entries(&mut self, mut f: impl FnMut(&mut [f64]) -> Result<(), Ign3Error>) -> Result<(), Ign3Error> {
        for t in self.tuples() {
            f(self.at_mut(&t))?;
        }
        Ok(())
    }

    /// Channels of `self` followed by those of `other`.
    pub fn concat(&self, other: &Face) -> Result<Face, Ign3Error> {
        if self.n != other.n || self.arity() != other.arity() {
            return Err(Ign3Error::ShapeMismatch("concat of unlike faces".into()));
        }
        let d = self.d + other.d;
        let mut out = Face { n: self.n, d, vars: self.vars.clone(), data: vec![0.0; self.n.pow(self.arity() as u32) * d] };
        for t in self.tuples() {
            let y = out.at_mut(&t);
            y[..self.d].copy_from_slice(self.at(&t));
            y[self.d..].copy_from_slice(other.at(&t));
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Face) -> f64 {
        if self.data.len() != other.data.len() {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// True when every tuple with a repeated index holds zero.
    pub fn forbidden_zero(&self) -> bool {
        let m = self.arity();
        (0..self.n.pow(m as u32)).all(|mut x| {
            let mut t = vec![0; m];
            for p in (0..m).rev() {
                t[p] = x % self.n;
                x /= self.n;
            }
            distinct(&t) || self.at(&t).iter().all(|&v| v == 0.0)
        })
    }
}

/// A tensor on `[n]^3` with `d` channels, stored as its five orbit components.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTensor3 {
    pub n: usize,
    pub d: usize,
    comps: [Face; 5],
}

impl OrbitTensor3 {
    pub fn zeros(n: usize, d: usize) -> Self {
        OrbitTensor3 { n, d, comps: Orbit::ALL.map(|o| Face::zeros(n, o.arity(), d)) }
    }

    pub fn from_components(comps: [Face; 5]) -> Result<Self, Ign3Error> {
        let (n, d) = (comps[0].n, comps[0].d);
        for (o, f) in Orbit::ALL.iter().zip(&comps) {
            if f.n != n || f.d != d || f.arity() != o.arity() {
                return Err(Ign3Error::ShapeMismatch(format!("component {o:?}")));
            }
        }
        Ok(OrbitTensor3 { n, d, comps })
    }

    pub fn comp(&self, o: Orbit) -> &Face {
        &self.comps[o.index()]
    }

    pub fn comp_mut(&mut self, o: Orbit) -> &mut Face {
        &mut self.comps[o.index()]
    }

    /// Value at a cube position `(a, b, c)`.
    pub fn get(&self, a: usize, b: usize, c: usize) -> &[f64] {
        match (a == b, a == c, b == c) {
            (true, true, _) => self.comp(Orbit::Iii).at(&[a]),
            (true, false, _) => self.comp(Orbit::Iij).at(&[a, c]),
            (false, true, _) => self.comp(Orbit::Iji).at(&[a, b]),
            (false, false, true) => self.comp(Orbit::Ijj).at(&[a, b]),
            (false, false, false) => self.comp(Orbit::Ijk).at(&[a, b, c]),
        }
    }

    /// The diagonal action: `(σ·Y)[σa][σb][σc] = Y[a][b][c]`.
    pub fn permute(&self, sigma: &Permutation) -> Result<Self, Ign3Error> {
        if sigma.len() != self.n {
            return Err(Ign3Error::ShapeMismatch(format!("permutation of size {} for n = {}", sigma.len(), self.n)));
        }
        Ok(OrbitTensor3 { n: self.n, d: self.d, comps: self.comps.clone().map(|f| f.permute(sigma)) })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.n != other.n || self.d != other.d {
            return f64::INFINITY;
        }
        self.comps.iter().zip(&other.comps).fold(0.0, |m, (a, b)| m.max(a.max_abs_diff(b)))
    }

    pub fn forbidden_zero(&self) -> bool {
        self.comps.iter().all(Face::forbidden_zero)
    }

    /// Copies the first `min(d, width)` channels, zero-padding the rest.
    pub fn resize(&self, width: usize) -> Self {
        let mut out = OrbitTensor3::zeros(self.n, width);
        let m = self.d.min(width);
        for o in Orbit::ALL {
            let src = self.comp(o);
            let dst = out.comp_mut(o);
            for t in src.tuples() {
                dst.at_mut(&t)[..m].copy_from_slice(&src.at(&t)[..m]);
            }
        }
        out
    }

    /// Channel-wise concatenation.
    pub fn concat(&self, other: &Self) -> Result<Self, Ign3Error> {
        let mut comps = self.comps.clone();
        for (c, o) in comps.iter_mut().zip(&other.comps) {
            *c = c.concat(o)?;
        }
        OrbitTensor3::from_components(comps)
    }
}

/// `max |f(σ·Y) − σ·f(Y)|`, infinite when the shapes disagree or `f` fails.
pub fn check_equivariance<F>(f: F, y: &OrbitTensor3, sigma: &Permutation) -> f64
where
    F: Fn(&OrbitTensor3) -> Result<OrbitTensor3, Ign3Error>,
{
    let lhs = y.permute(sigma).and_then(|py| f(&py));
    let rhs = f(y).and_then(|fy| fy.permute(sigma));
    match (lhs, rhs) {
        (Ok(a), Ok(b)) => a.max_abs_diff(&b),
        _ => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn random_tensor(n: usize, d: usize, seed: u64) -> OrbitTensor3 {
        let mut r = rng::from_seed(seed);
        let mut y = OrbitTensor3::zeros(n, d);
        for o in Orbit::ALL {
            let f = y.comp_mut(o);
            for t in f.tuples() {
                for v in f.at_mut(&t) {
                    *v = rng::normal(&mut r);
                }
            }
        }
        y
    }

    #[test]
    fn partition_sizes() {
        let sizes = |n| orbit_partition(n).map(|p| p.len());
        assert_eq!(sizes(5), [5, 20, 20, 20, 60]);
        assert_eq!(sizes(1), [1, 0, 0, 0, 0]);
        assert_eq!(sizes(2), [2, 2, 2, 2, 0]);
        let parts = orbit_partition(4);
        let mut all: Vec<[usize; 3]> = parts.concat();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 64);
    }

    #[test]
    fn pool_examples() {
        let mut y = OrbitTensor3::zeros(3, 1);
        for t in y.comp(Orbit::Ijj).tuples() {
            y.comp_mut(Orbit::Ijj).at_mut(&t)[0] = 1.0;
        }
        let p = y.comp(Orbit::Ijj).pool("i").unwrap();
        assert_eq!(p.data, vec![2.0; 3]);
        let mut z = OrbitTensor3::zeros(4, 1);
        z.comp_mut(Orbit::Iii).data.fill(1.0);
        assert_eq!(z.comp(Orbit::Iii).pool("").unwrap().data, vec![4.0]);
    }

    #[test]
    fn pool_matches_dense_loops() {
        let y = random_tensor(5, 2, 3);
        let p = y.comp(Orbit::Ijk).pool("i,j").unwrap();
        let q = y.comp(Orbit::Ijk).pool("k").unwrap();
        for a in 0..5 {
            for c in 0..2 {
                let mut direct_q = 0.0;
                for b in 0..5 {
                    let mut direct = 0.0;
                    for k in 0..5 {
                        if a != b && b != k && a != k {
                            direct += y.get(a, b, k)[c];
                            direct_q += y.get(a, b, k)[c];
                        }
                    }
                    assert!((p.at(&[a, b])[c] - direct).abs() < 1e-12);
                }
                // "k" pooled: sum over the first two indices with third fixed at `a`
                let mut direct_third = 0.0;
                for i in 0..5 {
                    for j in 0..5 {
                        if i != j && i != a && j != a {
                            direct_third += y.get(i, j, a)[c];
                        }
                    }
                }
                assert!((q.at(&[a])[c] - direct_third).abs() < 1e-12);
                let _ = direct_q;
            }
        }
    }

    #[test]
    fn bad_pool_signatures() {
        let f = Face::zeros(3, 2, 1);
        assert!(matches!(f.pool("i,i"), Err(Ign3Error::BadSignature(_))));
        assert!(matches!(f.pool("k"), Err(Ign3Error::BadSignature(_))));
        assert!(matches!(f.pool("ij"), Err(Ign3Error::BadSignature(_))));
    }

    #[test]
    fn broadcast_root_over_non_roots() {
        let mut roots = Face::zeros(3, 1, 1);
        roots.data = vec![10.0, 20.0, 30.0];
        let b = roots.broadcast(&Orbit::Ijj.classes(), "i,*j,*j").unwrap();
        for t in b.tuples() {
            assert_eq!(b.at(&t)[0], roots.data[t[0]]);
        }
        assert!(b.forbidden_zero());
    }

    #[test]
    fn broadcast_transpose_on_two_index_face() {
        let mut f = Face::zeros(3, 2, 1);
        for t in f.tuples() {
            f.at_mut(&t)[0] = (10 * t[0] + t[1]) as f64;
        }
        let g = f.broadcast(&[0, 1], "j,i").unwrap();
        for t in g.tuples() {
            assert_eq!(g.at(&t)[0], f.at(&[t[1], t[0]])[0]);
        }
    }

    #[test]
    fn bad_broadcast_signatures() {
        let f = Face::zeros(3, 2, 1);
        let ijk = Orbit::Ijk.classes();
        assert!(f.broadcast(&ijk, "i,*").is_err());
        assert!(f.broadcast(&ijk, "i,i,j").is_err());
        assert!(f.broadcast(&ijk, "i,*,*").is_err());
        assert!(f.broadcast(&Orbit::Ijj.classes(), "i,j,*").is_err());
        assert!(f.broadcast(&ijk, "i,q,j").is_err());
        assert!(f.broadcast(&ijk, "i,*,j").is_ok());
        assert!(f.broadcast(&Orbit::Iij.classes(), "*,*,i").is_err());
        let g = Face::zeros(3, 1, 1);
        assert!(g.broadcast(&Orbit::Iij.classes(), "*,*,i").is_ok());
    }

    #[test]
    fn broadcast_then_pool_multiplies_by_count() {
        let y = random_tensor(5, 1, 9);
        let roots = y.comp(Orbit::Iii);
        let b = roots.broadcast(&Orbit::Ijk.classes(), "i,*,*").unwrap();
        let p = b.pool("i").unwrap();
        for a in 0..5 {
            let expected = roots.at(&[a])[0] * 12.0;
            assert!((p.at(&[a])[0] - expected).abs() < 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn non_equivariant_map_is_detected() {
        let y = random_tensor(4, 1, 1);
        let zero_corner = |x: &OrbitTensor3| {
            let mut x = x.clone();
            x.comp_mut(Orbit::Iii).at_mut(&[0])[0] = 0.0;
            Ok(x)
        };
        let mut r = rng::from_seed(5);
        let worst = (0..20).map(|_| check_equivariance(zero_corner, &y, &Permutation::random(4, &mut r))).fold(0.0, f64::max);
        assert!(worst > 0.0);
    }

    proptest! {
        #[test]
        fn primitives_are_exactly_equivariant(n in 1usize..6, seed in any::<u64>()) {
            let y = random_tensor(n, 2, seed);
            let s = Permutation::random(n, &mut rng::from_seed(seed ^ 1));
            let cases: Vec<(Orbit, &str, Orbit, &str)> = vec![
                (Orbit::Ijk, "i,j", Orbit::Ijj, "i,j,j"),
                (Orbit::Ijk, "k,i", Orbit::Iji, "k,i,k"),
                (Orbit::Ijj, "i", Orbit::Ijk, "i,*,*"),
                (Orbit::Iji, "j,i", Orbit::Iij, "j,j,i"),
                (Orbit::Iii, "", Orbit::Ijj, "*,*,*"),
                (Orbit::Ijj, "i,j", Orbit::Ijk, "i,*,j"),
                (Orbit::Iij, "j", Orbit::Iii, "j,j,j"),
            ];
            for (src, keep, dst, pattern) in cases {
                let f = move |x: &OrbitTensor3| {
                    let face = x.comp(src).pool(keep)?.broadcast(&dst.classes(), pattern)?;
                    let mut out = OrbitTensor3::zeros(x.n, x.d);
                    *out.comp_mut(dst) = face;
                    Ok(out)
                };
                prop_assert_eq!(check_equivariance(f, &y, &s), 0.0);
                let out = f(&y).unwrap();
                prop_assert!(out.forbidden_zero());
            }
        }
    }
}
