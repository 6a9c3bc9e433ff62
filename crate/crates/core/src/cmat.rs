//! Small dense complex matrices (dimension ≤ 8) with the numerical
//! kernels the grid calculus needs: a cyclic Jacobi eigensolver for
//! Hermitian matrices, Gaussian elimination with partial pivoting, and
//! the usual arithmetic. Fixed-capacity storage keeps per-sample work
//! allocation-free.

use num_complex::Complex;
use num_traits::Zero;

pub type C64 = Complex<f64>;

pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug)]
pub struct CMat {
    pub n: usize,
    a: [C64; MAX_DIM * MAX_DIM],
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_DIM);
        CMat {
            n,
            a: [C64::zero(); MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> CMat {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] *= s;
            }
        }
        m
    }

    pub fn add(&self, o: &CMat) -> CMat {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] += o[(i, j)];
            }
        }
        m
    }

    pub fn sub(&self, o: &CMat) -> CMat {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] -= o[(i, j)];
            }
        }
        m
    }

    pub fn mul(&self, o: &CMat) -> CMat {
        let n = self.n;
        let mut m = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let s = self[(i, k)];
                if s.is_zero() {
                    continue;
                }
                for j in 0..n {
                    m[(i, j)] += s * o[(k, j)];
                }
            }
        }
        m
    }

    pub fn commutator(&self, o: &CMat) -> CMat {
        self.mul(o).sub(&o.mul(self))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    /// Entrywise conjugate.
    pub fn conj(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self[(i, j)].conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> C64 {
        let mut t = C64::zero();
        for i in 0..self.n {
            t += self[(i, i)];
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self[(i, j)].norm_sqr();
            }
        }
        libm::sqrt(s)
    }

    pub fn max_abs(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s = f64::max(s, self[(i, j)].norm());
            }
        }
        s
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.frobenius_norm().max(1.0);
        self.sub(&self.adjoint()).frobenius_norm() <= tol * scale
    }

    /// (P)LU decomposition driver: solves A·X = B for X.
    pub fn solve(&self, b: &CMat) -> Option<CMat> {
        let n = self.n;
        let mut lu = *self;
        let mut x = *b;
        for col in 0..n {
            let mut p = col;
            let mut best = lu[(col, col)].norm();
            for r in col + 1..n {
                let v = lu[(r, col)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-300 {
                return None;
            }
            if p != col {
                for j in 0..n {
                    lu.a.swap(p * MAX_DIM + j, col * MAX_DIM + j);
                    x.a.swap(p * MAX_DIM + j, col * MAX_DIM + j);
                }
            }
            let inv = C64::new(1.0, 0.0) / lu[(col, col)];
            for r in col + 1..n {
                let f = lu[(r, col)] * inv;
                if f.is_zero() {
                    continue;
                }
                for j in col..n {
                    let t = lu[(col, j)];
                    lu[(r, j)] -= f * t;
                }
                for j in 0..n {
                    let t = x[(col, j)];
                    x[(r, j)] -= f * t;
                }
            }
        }
        // back substitution
        for col in (0..n).rev() {
            let inv = C64::new(1.0, 0.0) / lu[(col, col)];
            for j in 0..n {
                x[(col, j)] *= inv;
            }
            for r in 0..col {
                let f = lu[(r, col)];
                if f.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let t = x[(col, j)];
                    x[(r, j)] -= f * t;
                }
            }
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<CMat> {
        self.solve(&CMat::identity(self.n))
    }

    pub fn det(&self) -> C64 {
        let n = self.n;
        let mut lu = *self;
        let mut det = C64::new(1.0, 0.0);
        for col in 0..n {
            let mut p = col;
            let mut best = lu[(col, col)].norm();
            for r in col + 1..n {
                let v = lu[(r, col)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-300 {
                return C64::zero();
            }
            if p != col {
                det = -det;
                for j in 0..n {
                    lu.a.swap(p * MAX_DIM + j, col * MAX_DIM + j);
                }
            }
            det *= lu[(col, col)];
            let inv = C64::new(1.0, 0.0) / lu[(col, col)];
            for r in col + 1..n {
                let f = lu[(r, col)] * inv;
                for j in col..n {
                    let t = lu[(col, j)];
                    lu[(r, j)] -= f * t;
                }
            }
        }
        det
    }

    /// Apply to a vector (stored as a column in slot 0 of a CMat is
    /// clumsy; plain arrays are used instead).
    pub fn apply(&self, v: &[C64]) -> [C64; MAX_DIM] {
        let mut out = [C64::zero(); MAX_DIM];
        for i in 0..self.n {
            for j in 0..self.n {
                out[i] += self[(i, j)] * v[j];
            }
        }
        out
    }
}

impl core::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.a[i * MAX_DIM + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.a[i * MAX_DIM + j]
    }
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and a
/// unitary whose columns are the eigenvectors.
#[derive(Clone, Copy, Debug)]
pub struct HermEig {
    pub values: [f64; MAX_DIM],
    pub vectors: CMat,
}

/// Cyclic Jacobi for complex Hermitian matrices.
pub fn herm_eig(m: &CMat) -> HermEig {
    let n = m.n;
    // work on the Hermitian average to kill roundoff asymmetry
    let mut a = m.add(&m.adjoint()).scale(C64::new(0.5, 0.0));
    let mut v = CMat::identity(n);
    let scale = a.frobenius_norm().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if libm::sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let beta = apq.norm();
                if beta <= 1e-18 * scale {
                    continue;
                }
                let u = apq / beta;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * beta);
                let t = if tau >= 0.0 {
                    1.0 / (tau + libm::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                let su = u * s;
                // A <- R* A R with R = I except R[pp]=R[qq]=c, R[pq]=s·u, R[qp]=−s·ū
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * s * u.conj();
                    a[(k, q)] = akq * c + akp * su;
                    a[(p, k)] = a[(k, p)].conj();
                    a[(q, k)] = a[(k, q)].conj();
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                a[(p, p)] = C64::new(app - t * beta, 0.0);
                a[(q, q)] = C64::new(aqq + t * beta, 0.0);
                a[(p, q)] = C64::zero();
                a[(q, p)] = C64::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * s * u.conj();
                    v[(k, q)] = vkq * c + vkp * su;
                }
            }
        }
    }
    // sort ascending
    let mut idx = [0usize; MAX_DIM];
    for (i, item) in idx.iter_mut().enumerate().take(n) {
        *item = i;
    }
    idx[..n].sort_unstable_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let mut values = [0.0; MAX_DIM];
    let mut vectors = CMat::zeros(n);
    for (col, &i) in idx[..n].iter().enumerate() {
        values[col] = a[(i, i)].re;
        for r in 0..n {
            vectors[(r, col)] = v[(r, i)];
        }
    }
    HermEig { values, vectors }
}
