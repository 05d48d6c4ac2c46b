//! Small dense matrices of order at most three.
//!
//! Every tensor in the gap problem (coefficients, Jacobians, profile Hessians)
//! lives in dimension two or three, so a fixed 3×3 buffer plus an active order
//! avoids heap traffic in the assembly loops.

use std::fmt;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Square matrix of order `n ≤ 3`; entries outside the active block are zero.
#[derive(Clone, Copy, PartialEq)]
pub struct Mat {
    n: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.n).map(|i| &self.m[i][..self.n]).collect();
        write!(f, "Mat{rows:?}")
    }
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "matrix order {n} out of range");
        Self {
            n,
            m: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut a = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            a.m[i][i] = v;
        }
        a
    }

    /// Builds a matrix from row-major entries; `data.len()` must be a perfect square.
    pub fn from_row_major(data: &[f64]) -> Option<Self> {
        let n = (1..=MAX_DIM).find(|k| k * k == data.len())?;
        let mut a = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a.m[i][j] = data[i * n + j];
            }
        }
        Some(a)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.m[i][j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut c = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut s = 0.0;
                for k in 0..self.n {
                    s += self.m[i][k] * other.m[k][j];
                }
                c.m[i][j] = s;
            }
        }
        c
    }

    pub fn mul_vec(&self, v: &[f64]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = (0..self.n).map(|k| self.m[i][k] * v[k]).sum();
        }
        out
    }

    /// `selfᵀ v`.
    pub fn tmul_vec(&self, v: &[f64]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for (j, o) in out.iter_mut().enumerate().take(self.n) {
            *o = (0..self.n).map(|k| self.m[k][j] * v[k]).sum();
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut c = *self;
        for row in c.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        c
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut c = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                c.m[i][j] += other.m[i][j];
            }
        }
        c
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        match self.n {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.m[i][j] * self.m[i][j];
            }
        }
        s.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        let mut s: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s = s.max(self.m[i][j].abs());
            }
        }
        s
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.m[i][j] == self.m[j][i]))
    }

    /// `J A Jᵀ / det J`, the congruence used to transport a conductivity
    /// tensor through a change of variables. Symmetry of the result is
    /// enforced exactly by averaging mirrored entries.
    pub fn congruence_over_det(jac: &Self, a: &Self) -> (Self, f64) {
        let det = jac.det();
        let mut b = jac.mul(a).mul(&jac.transpose()).scale(1.0 / det);
        b.symmetrize();
        (b, det)
    }

    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                let v = 0.5 * (self.m[i][j] + self.m[j][i]);
                self.m[i][j] = v;
                self.m[j][i] = v;
            }
        }
    }

    /// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
    pub fn sym_eigenvalues(&self) -> [f64; MAX_DIM] {
        let n = self.n;
        let mut a = self.m;
        for _sweep in 0..50 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off <= 1e-300 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q] == 0.0 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev = [f64::INFINITY; MAX_DIM];
        for i in 0..n {
            ev[i] = a[i][i];
        }
        ev[..n].sort_by(|x, y| x.total_cmp(y));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sym_eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.sym_eigenvalues()[self.n - 1]
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
