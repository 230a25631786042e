//! Compressed sparse row storage for the nearest-neighbour operators.

use nalgebra::DMatrix;

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    /// Builds a square matrix; duplicate (row, col) entries are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut sorted: Vec<(usize, usize, C64)> = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals: Vec<C64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A x
    #[inline]
    pub fn mul_vec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    /// y = −i A x
    #[inline]
    pub fn mul_vec_neg_i(&self, x: &[C64], y: &mut [C64]) {
        self.mul_vec(x, y);
        for z in y.iter_mut() {
            *z = C64::new(z.im, -z.re);
        }
    }

    /// Y = A X for a column-major dense `X` stored as `dim × ncols`.
    pub fn mul_dense(&self, x: &DMatrix<C64>, y: &mut DMatrix<C64>) {
        debug_assert_eq!(x.nrows(), self.dim);
        for (xc, mut yc) in x.column_iter().zip(y.column_iter_mut()) {
            let xs = xc.as_slice();
            for r in 0..self.dim {
                let mut acc = C64::new(0.0, 0.0);
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[k] * xs[self.cols[k]];
                }
                yc[r] = acc;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_product() {
        let t = [
            (0, 1, C64::new(1.0, 0.5)),
            (1, 0, C64::new(2.0, 0.0)),
            (2, 2, C64::new(0.0, -1.0)),
            (0, 1, C64::new(0.5, 0.0)),
        ];
        let a = CsrMatrix::from_triplets(3, &t);
        assert_eq!(a.nnz(), 3);
        let dense = a.to_dense();
        assert_eq!(dense[(0, 1)], C64::new(1.5, 0.5));
        let x = vec![C64::new(1.0, 2.0), C64::new(-1.0, 0.0), C64::new(0.0, 3.0)];
        let mut y = vec![C64::new(0.0, 0.0); 3];
        a.mul_vec(&x, &mut y);
        let want = &dense * nalgebra::DVector::from_vec(x.clone());
        for i in 0..3 {
            assert!((y[i] - want[i]).norm() < 1e-15);
        }
        a.mul_vec_neg_i(&x, &mut y);
        for i in 0..3 {
            assert!((y[i] - want[i] * C64::new(0.0, -1.0)).norm() < 1e-15);
        }
        let xm = DMatrix::from_fn(3, 2, |i, j| C64::new(i as f64, j as f64));
        let mut ym = DMatrix::zeros(3, 2);
        a.mul_dense(&xm, &mut ym);
        assert!((ym - &dense * &xm).norm() < 1e-14);
    }
}
