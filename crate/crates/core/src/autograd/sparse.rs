use super::{AutogradError, Result};

/// Constant sparse matrix in compressed-row form. Duplicate entries are kept
/// and act additively.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat {
    pub rows: usize,
    pub cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMat {
    /// Entries are stored row by row in the order given.
    pub fn from_triplets(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Result<SparseMat> {
        let mut counts = vec![0usize; rows + 1];
        for &(r, c, _) in entries {
            if r >= rows || c >= cols {
                return Err(AutogradError::ShapeMismatch(format!("entry ({r}, {c}) outside {rows}x{cols}")));
            }
            counts[r + 1] += 1;
        }
        for r in 0..rows {
            counts[r + 1] += counts[r];
        }
        let mut fill = counts.clone();
        let mut indices = vec![0; entries.len()];
        let mut values = vec![0.0; entries.len()];
        for &(r, c, v) in entries {
            indices[fill[r]] = c;
            values[fill[r]] = v;
            fill[r] += 1;
        }
        Ok(SparseMat { rows, cols, indptr: counts, indices, values })
    }

    /// One entry per row: row `r` picks column `src[r]`.
    pub fn gather(cols: usize, src: &[usize]) -> Result<SparseMat> {
        let e: Vec<(usize, usize, f64)> = src.iter().enumerate().map(|(r, &c)| (r, c, 1.0)).collect();
        SparseMat::from_triplets(src.len(), cols, &e)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |p| (self.indices[p], self.values[p]))
    }

    /// Divides each row by its entry count; empty rows stay empty.
    pub fn row_mean(&self) -> SparseMat {
        let mut out = self.clone();
        for r in 0..self.rows {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            let count = (b - a) as f64;
            out.values[a..b].iter_mut().for_each(|v| *v /= count);
        }
        out
    }

    /// `self * other`.
    pub fn compose(&self, other: &SparseMat) -> Result<SparseMat> {
        if self.cols != other.rows {
            return Err(AutogradError::ShapeMismatch(format!("compose {}x{} with {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        let mut entries = Vec::new();
        for r in 0..self.rows {
            for (m, a) in self.row(r) {
                for (c, b) in other.row(m) {
                    entries.push((r, c, a * b));
                }
            }
        }
        SparseMat::from_triplets(self.rows, other.cols, &entries)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        d
    }

    /// `self * x` for row-major `x[cols, d]`.
    pub fn apply(&self, x: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * d];
        for r in 0..self.rows {
            let dst = &mut out[r * d..(r + 1) * d];
            for p in self.indptr[r]..self.indptr[r + 1] {
                let (c, v) = (self.indices[p], self.values[p]);
                let src = &x[c * d..(c + 1) * d];
                if v == 1.0 {
                    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
                } else {
                    dst.iter_mut().zip(src).for_each(|(a, b)| *a += v * b);
                }
            }
        }
        out
    }

    /// `self^T * g` for row-major `g[rows, d]`.
    pub fn apply_transpose(&self, g: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols * d];
        for r in 0..self.rows {
            let src = &g[r * d..(r + 1) * d];
            for p in self.indptr[r]..self.indptr[r + 1] {
                let (c, v) = (self.indices[p], self.values[p]);
                out[c * d..(c + 1) * d].iter_mut().zip(src).for_each(|(a, b)| *a += v * b);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_and_transpose_agree_with_dense() {
        let s = SparseMat::from_triplets(2, 3, &[(1, 2, 2.0), (0, 0, 1.0), (1, 0, -1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(s.to_dense(), vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 3.0]]);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(s.apply(&x, 2), vec![1.0, 2.0, 14.0, 16.0]);
        assert_eq!(s.apply_transpose(&[1.0, 1.0], 1), vec![0.0, 0.0, 3.0]);
        assert_eq!(s.row_mean().to_dense()[1], vec![-1.0 / 3.0, 0.0, 1.0]);
        assert!(SparseMat::from_triplets(1, 1, &[(0, 1, 1.0)]).is_err());
    }

    #[test]
    fn composition() {
        let a = SparseMat::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let b = a.compose(&a).unwrap();
        assert_eq!(b.to_dense(), vec![vec![1.0, 1.0], vec![1.0, 2.0]]);
    }
}
