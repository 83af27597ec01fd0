//! The linear equivariant maps on `n x n` arrays, generated by pooling and
//! broadcasting between the diagonal and the off-diagonal.

use super::{Face, Ign3Error};
use crate::graph::Permutation;

/// One basis map: pool the `source` face down to `keep`, broadcast onto the
/// `target` face by `pattern`. Faces are `diag` (arity 1) and `off` (arity 2).
#[derive(Debug, Clone, PartialEq)]
pub struct Basis2Op {
    pub n: usize,
    pub source: usize,
    pub target: usize,
    pub keep: String,
    pub pattern: String,
}

fn faces_of(y: &[f64], n: usize) -> [Face; 2] {
    let mut diag = Face::zeros(n, 1, 1);
    let mut off = Face::zeros(n, 2, 1);
    for i in 0..n {
        diag.at_mut(&[i])[0] = y[i * n + i];
        for j in 0..n {
            if i != j {
                off.at_mut(&[i, j])[0] = y[i * n + j];
            }
        }
    }
    [diag, off]
}

impl Basis2Op {
    /// Applies the map to a row-major `n x n` array.
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>, Ign3Error> {
        let n = self.n;
        if y.len() != n * n {
            return Err(Ign3Error::ShapeMismatch(format!("expected {} entries, got {}", n * n, y.len())));
        }
        let faces = faces_of(y, n);
        let classes: &[usize] = if self.target == 1 { &[0, 0] } else { &[0, 1] };
        let f = faces[self.source - 1].pool(&self.keep)?.broadcast(classes, &self.pattern)?;
        let mut out = vec![0.0; n * n];
        for t in f.tuples() {
            let (i, j) = if self.target == 1 { (t[0], t[0]) } else { (t[0], t[1]) };
            out[i * n + j] = f.at(&t)[0];
        }
        Ok(out)
    }

    /// Dense `n^2 x n^2` matrix, flattened row-major.
    pub fn matrix(&self) -> Result<Vec<f64>, Ign3Error> {
        let m = self.n * self.n;
        let mut mat = vec![0.0; m * m];
        let mut e = vec![0.0; m];
        for c in 0..m {
            e[c] = 1.0;
            for (r, v) in self.apply(&e)?.into_iter().enumerate() {
                mat[r * m + c] = v;
            }
            e[c] = 0.0;
        }
        Ok(mat)
    }
}

/// Injective assignments of the kept source indices to target classes,
/// written as a broadcast pattern over the target slots.
fn patterns(kept: &[char], target_classes: &[usize]) -> Vec<String> {
    let arity = target_classes.iter().max().map_or(0, |m| m + 1);
    let mut out = Vec::new();
    let mut assign = vec![None; arity];
    fn rec(kept: &[char], at: usize, assign: &mut Vec<Option<char>>, classes: &[usize], out: &mut Vec<String>) {
        if at == kept.len() {
            let toks: Vec<String> = classes.iter().map(|&c| assign[c].map_or("*".to_string(), String::from)).collect();
            out.push(toks.join(","));
            return;
        }
        for c in 0..assign.len() {
            if assign[c].is_none() {
                assign[c] = Some(kept[at]);
                rec(kept, at + 1, assign, classes, out);
                assign[c] = None;
            }
        }
    }
    rec(kept, 0, &mut assign, target_classes, &mut out);
    out
}

fn subsets(vars: &[char]) -> Vec<Vec<char>> {
    (0..1usize << vars.len()).map(|m| vars.iter().enumerate().filter(|(b, _)| m >> b & 1 == 1).map(|(_, &v)| v).collect()).collect()
}

/// All pool/broadcast maps between the two faces of `[n]^2`.
pub fn enumerate_2ign_basis(n: usize) -> Result<Vec<Basis2Op>, Ign3Error> {
    if n < 4 {
        return Err(Ign3Error::TooSmall { min: 4, got: n });
    }
    let faces: [(usize, Vec<char>, Vec<usize>); 2] = [(1, vec!['i'], vec![0, 0]), (2, vec!['i', 'j'], vec![0, 1])];
    let mut ops = Vec::new();
    for (source, vars, _) in &faces {
        for (target, _, classes) in &faces {
            for kept in subsets(vars) {
                let keep: String = kept.iter().map(char::to_string).collect::<Vec<_>>().join(",");
                for pattern in patterns(&kept, classes) {
                    ops.push(Basis2Op { n, source: *source, target: *target, keep: keep.clone(), pattern });
                }
            }
        }
    }
    Ok(ops)
}

/// Rank by Gaussian elimination with partial pivoting.
pub fn matrix_rank(rows: &[Vec<f64>]) -> usize {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let cols = a.first().map_or(0, Vec::len);
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-9 * scale;
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..a.len()).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())) else {
            break;
        };
        if a[p][c].abs() <= tol {
            continue;
        }
        a.swap(rank, p);
        let pivot = a[rank].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != rank {
                let f = row[c] / pivot[c];
                if f != 0.0 {
                    for (x, y) in row[c..cols].iter_mut().zip(&pivot[c..cols]) {
                        *x -= f * y;
                    }
                }
            }
        }
        rank += 1;
    }
    rank
}

/// `max |f(σ·Y) − σ·f(Y)|` for maps on `n x n` arrays, `(σ·Y)[σi][σj] = Y[i][j]`.
pub fn check_equivariance2<F>(f: F, y: &[f64], n: usize, sigma: &Permutation) -> f64
where
    F: Fn(&[f64]) -> Result<Vec<f64>, Ign3Error>,
{
    let act = |x: &[f64]| {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[sigma.apply(i) * n + sigma.apply(j)] = x[i * n + j];
            }
        }
        out
    };
    match (f(&act(y)), f(y)) {
        (Ok(a), Ok(b)) => a.iter().zip(act(&b)).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
        _ => f64::INFINITY,
    }
}
