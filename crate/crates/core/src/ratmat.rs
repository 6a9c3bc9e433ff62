//! Small dense matrices over exact complex rationals, with just enough
//! linear algebra for weight filtrations: products, powers, reduced row
//! echelon form, kernels, column spaces, and subspace sums/intersections.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::exact::{crat_inv, crat_one, crat_zero, CRat};

#[derive(Clone, Debug, PartialEq)]
pub struct RatMat {
    pub rows: usize,
    pub cols: usize,
    a: Vec<CRat>,
}

impl RatMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMat {
            rows,
            cols,
            a: vec![crat_zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = crat_one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<CRat>]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(cols: &[Vec<CRat>]) -> Self {
        let c = cols.len();
        let r = if c > 0 { cols[0].len() } else { 0 };
        let mut m = Self::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn col(&self, j: usize) -> Vec<CRat> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|v| v.re.is_zero() && v.im.is_zero())
    }

    pub fn mul(&self, other: &RatMat) -> RatMat {
        assert_eq!(self.cols, other.rows);
        let mut m = RatMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let s = self[(i, k)];
                if s.re.is_zero() && s.im.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let t = m[(i, j)] + s * other[(k, j)];
                    m[(i, j)] = t;
                }
            }
        }
        m
    }

    pub fn pow(&self, e: usize) -> RatMat {
        assert_eq!(self.rows, self.cols);
        let mut out = RatMat::identity(self.rows);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// In-place Gauss–Jordan reduction; returns pivot column indices.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            let Some(p) = (row..self.rows)
                .find(|&r| !(self[(r, col)].re.is_zero() && self[(r, col)].im.is_zero()))
            else {
                continue;
            };
            for j in 0..self.cols {
                let tmp = self[(row, j)];
                self[(row, j)] = self[(p, j)];
                self[(p, j)] = tmp;
            }
            let inv = crat_inv(&self[(row, col)]);
            for j in 0..self.cols {
                let t = self[(row, j)] * inv;
                self[(row, j)] = t;
            }
            for r in 0..self.rows {
                if r != row {
                    let f = self[(r, col)];
                    if f.re.is_zero() && f.im.is_zero() {
                        continue;
                    }
                    for j in 0..self.cols {
                        let t = self[(r, j)] - f * self[(row, j)];
                        self[(r, j)] = t;
                    }
                }
            }
            pivots.push(col);
            row += 1;
            if row == self.rows {
                break;
            }
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref().len()
    }

    /// Basis of the right kernel, as column vectors.
    pub fn kernel_basis(&self) -> Vec<Vec<CRat>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivots.contains(&free) {
                continue;
            }
            let mut v = vec![crat_zero(); self.cols];
            v[free] = crat_one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[(r, free)];
            }
            basis.push(v);
        }
        basis
    }

    /// Basis of the column space.
    pub fn col_space_basis(&self) -> Vec<Vec<CRat>> {
        let mut m = self.clone();
        let pivots = m.rref();
        pivots.iter().map(|&j| self.col(j)).collect()
    }
}

impl core::ops::Index<(usize, usize)> for RatMat {
    type Output = CRat;
    fn index(&self, (i, j): (usize, usize)) -> &CRat {
        &self.a[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for RatMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut CRat {
        &mut self.a[i * self.cols + j]
    }
}

/// Dimension of the span of a set of vectors.
pub fn span_dim(vectors: &[Vec<CRat>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    RatMat::from_cols(vectors).rank()
}

/// Basis of the sum of two spans.
pub fn span_sum(u: &[Vec<CRat>], v: &[Vec<CRat>]) -> Vec<Vec<CRat>> {
    let mut all: Vec<Vec<CRat>> = Vec::new();
    all.extend_from_slice(u);
    all.extend_from_slice(v);
    if all.is_empty() {
        return Vec::new();
    }
    RatMat::from_cols(&all).col_space_basis()
}

/// Basis of the intersection of two spans (in the ambient space).
pub fn span_intersect(u: &[Vec<CRat>], v: &[Vec<CRat>]) -> Vec<Vec<CRat>> {
    if u.is_empty() || v.is_empty() {
        return Vec::new();
    }
    let dim = u[0].len();
    // kernel of [U | -V]; the U-part of each kernel vector maps to the intersection
    let mut m = RatMat::zeros(dim, u.len() + v.len());
    for (j, col) in u.iter().enumerate() {
        for i in 0..dim {
            m[(i, j)] = col[i];
        }
    }
    for (j, col) in v.iter().enumerate() {
        for i in 0..dim {
            m[(i, u.len() + j)] = -col[i];
        }
    }
    let ker = m.kernel_basis();
    let mut vecs = Vec::new();
    for k in ker {
        let mut w = vec![crat_zero(); dim];
        for (j, col) in u.iter().enumerate() {
            for i in 0..dim {
                w[i] = w[i] + k[j] * col[i];
            }
        }
        vecs.push(w);
    }
    if vecs.is_empty() {
        return Vec::new();
    }
    RatMat::from_cols(&vecs).col_space_basis()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::crat_i;

    fn jordan_block(n: usize) -> RatMat {
        let mut m = RatMat::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = crat_one();
        }
        m
    }

    #[test]
    fn rank_kernel() {
        let j = jordan_block(3);
        assert_eq!(j.rank(), 2);
        assert_eq!(j.kernel_basis().len(), 1);
        assert_eq!(j.pow(2).rank(), 1);
        assert!(j.pow(3).is_zero());
    }

    #[test]
    fn subspace_ops() {
        let e1 = vec![crat_one(), crat_zero(), crat_zero()];
        let e2 = vec![crat_zero(), crat_one(), crat_zero()];
        let e3 = vec![crat_zero(), crat_zero(), crat_one()];
        let d = vec![crat_one(), crat_one(), crat_zero()];
        assert_eq!(span_dim(&[e1.clone(), e2.clone()]), 2);
        assert_eq!(span_sum(&[e1.clone()], &[e2.clone(), e3.clone()]).len(), 3);
        let inter = span_intersect(&[e1.clone(), e2.clone()], &[d.clone(), e3.clone()]);
        assert_eq!(inter.len(), 1);
        // intersection is the line through (1,1,0)
        let v = &inter[0];
        assert_eq!(v[0], v[1]);
        assert!(v[2].re.is_zero() && v[2].im.is_zero());
    }

    #[test]
    fn complex_entries() {
        let mut m = RatMat::zeros(2, 2);
        m[(0, 0)] = crat_i(0, 1, 1, 1); // i
        m[(0, 1)] = crat_one();
        m[(1, 0)] = crat_one();
        m[(1, 1)] = crat_i(0, 1, -1, 1); // -i (det = i*(-i) - 1 = 0)
        assert_eq!(m.rank(), 1);
        assert_eq!(m.kernel_basis().len(), 1);
    }
}
