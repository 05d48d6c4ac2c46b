use rayon::prelude::*;

use crate::discretize::LinearSystem;

use super::SolveError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreconditionerKind {
    None,
    /// Diagonal scaling.
    Jacobi,
    /// Symmetric successive over-relaxation with factor `omega ∈ (0, 2)`.
    Ssor {
        omega: f64,
    },
    /// Exact solves on every vertical node column.
    Line,
    /// [`Line`](Self::Line) plus an exact coarse solve on column averages.
    TwoLevel,
}

impl PreconditionerKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Jacobi => "jacobi",
            Self::Ssor { .. } => "ssor",
            Self::Line => "line",
            Self::TwoLevel => "two-level",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => Self::None,
            "jacobi" => Self::Jacobi,
            "ssor" => Self::Ssor { omega: 1.0 },
            "line" => Self::Line,
            "two-level" => Self::TwoLevel,
            _ => return None,
        })
    }
}

/// LDLᵀ factors of the tridiagonal part of each vertical block.
#[derive(Debug, Clone)]
struct LineFactors {
    block: usize,
    pivot: Vec<f64>,
    lower: Vec<f64>,
}

impl LineFactors {
    fn new(sys: &LinearSystem) -> Result<Self, SolveError> {
        let n = sys.size();
        let block = sys.column_len.max(1);
        let mut pivot = vec![0.0; n];
        let mut lower = vec![0.0; n];
        for i in 0..n {
            let d = sys.get(i, i);
            if i % block == 0 {
                pivot[i] = d;
            } else {
                let off = sys.get(i, i - 1);
                lower[i] = off / pivot[i - 1];
                pivot[i] = d - lower[i] * off;
            }
            if !(pivot[i] > 0.0) {
                return Err(SolveError::NonSpd {
                    iteration: 0,
                    curvature: pivot[i],
                });
            }
        }
        Ok(Self {
            block,
            pivot,
            lower,
        })
    }

    fn solve_block(&self, start: usize, r: &[f64], z: &mut [f64]) {
        let len = r.len();
        z[0] = r[0];
        for k in 1..len {
            z[k] = r[k] - self.lower[start + k] * z[k - 1];
        }
        for k in 0..len {
            z[k] /= self.pivot[start + k];
        }
        for k in (0..len - 1).rev() {
            z[k] -= self.lower[start + k + 1] * z[k + 1];
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64], parallel: bool) {
        let b = self.block;
        if parallel {
            z.par_chunks_mut(b)
                .zip(r.par_chunks(b))
                .enumerate()
                .for_each(|(k, (zc, rc))| self.solve_block(k * b, rc, zc));
        } else {
            for (k, (zc, rc)) in z.chunks_mut(b).zip(r.chunks(b)).enumerate() {
                self.solve_block(k * b, rc, zc);
            }
        }
    }
}

/// Banded Cholesky factor, row `i` storing `L[i][i−bw..=i]`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Factors a symmetric matrix given as lower-band entries `(i, j, a_ij)` with `j ≤ i`.
    pub fn factor(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self, SolveError> {
        let bw = entries.iter().map(|&(i, j, _)| i - j).max().unwrap_or(0);
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for &(i, j, v) in entries {
            l[i * w + (bw - (i - j))] += v;
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = l[i * w + bw - (i - j)];
                for k in k0..j {
                    s -= l[i * w + bw - (i - k)] * l[j * w + bw - (j - k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(SolveError::NonSpd {
                            iteration: 0,
                            curvature: s,
                        });
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + bw - (i - j)] = s / l[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn solve(&self, x: &mut [f64]) {
        let (bw, w) = (self.bw, self.bw + 1);
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + bw - (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w + bw];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + bw + 1).min(self.n) {
                s -= self.l[k * w + bw - (k - i)] * x[k];
            }
            x[i] = s / self.l[i * w + bw];
        }
    }
}

/// Column-average coarse space: one unknown per vertical block with free nodes.
#[derive(Debug, Clone)]
struct CoarseSpace {
    block: usize,
    /// Coarse index of each block, `usize::MAX` for fully constrained blocks.
    index: Vec<usize>,
    factor: BandedCholesky,
}

impl CoarseSpace {
    fn new(sys: &LinearSystem) -> Result<Self, SolveError> {
        let block = sys.column_len;
        let blocks = sys.size() / block;
        let mut index = vec![usize::MAX; blocks];
        let mut count = 0;
        for (b, slot) in index.iter_mut().enumerate() {
            if (b * block..(b + 1) * block).any(|i| !sys.dirichlet[i]) {
                *slot = count;
                count += 1;
            }
        }
        let mut entries = Vec::new();
        for b in 0..blocks {
            let bi = index[b];
            if bi == usize::MAX {
                continue;
            }
            let mut row: Vec<(usize, f64)> = Vec::new();
            for i in b * block..(b + 1) * block {
                if sys.dirichlet[i] {
                    continue;
                }
                let (c, v) = sys.row(i);
                for (&j, &a) in c.iter().zip(v) {
                    let bj = index[j as usize / block];
                    if bj <= bi && !sys.dirichlet[j as usize] {
                        row.push((bj, a));
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let mut s = 0.0;
                let j = row[k].0;
                while k < row.len() && row[k].0 == j {
                    s += row[k].1;
                    k += 1;
                }
                entries.push((bi, j, s));
            }
        }
        let factor = BandedCholesky::factor(count, &entries)?;
        Ok(Self {
            block,
            index,
            factor,
        })
    }

    fn add_correction(&self, sys: &LinearSystem, r: &[f64], z: &mut [f64]) {
        let mut rc = vec![0.0; self.factor.n];
        for (b, &ci) in self.index.iter().enumerate() {
            if ci != usize::MAX {
                rc[ci] = (b * self.block..(b + 1) * self.block)
                    .filter(|&i| !sys.dirichlet[i])
                    .map(|i| r[i])
                    .sum();
            }
        }
        self.factor.solve(&mut rc);
        for (b, &ci) in self.index.iter().enumerate() {
            if ci != usize::MAX {
                for i in b * self.block..(b + 1) * self.block {
                    if !sys.dirichlet[i] {
                        z[i] += rc[ci];
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Inner {
    None,
    Jacobi(Vec<f64>),
    Ssor { omega: f64, diag: Vec<f64> },
    Line(LineFactors),
    TwoLevel(LineFactors, CoarseSpace),
}

/// A symmetric positive definite approximation of `A⁻¹`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    kind: PreconditionerKind,
    inner: Inner,
}

/// Builds the preconditioner; fails on zero or negative diagonal entries.
pub fn precondition(
    sys: &LinearSystem,
    kind: PreconditionerKind,
) -> Result<Preconditioner, SolveError> {
    let diag = sys.diagonal();
    if let Some(row) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(SolveError::ZeroDiagonal {
            row,
            value: diag[row],
        });
    }
    let inner = match kind {
        PreconditionerKind::None => Inner::None,
        PreconditionerKind::Jacobi => Inner::Jacobi(diag.iter().map(|d| 1.0 / d).collect()),
        PreconditionerKind::Ssor { omega } => {
            if !(omega > 0.0 && omega < 2.0) {
                return Err(SolveError::Config(format!(
                    "SSOR factor {omega} outside (0, 2)"
                )));
            }
            Inner::Ssor { omega, diag }
        }
        PreconditionerKind::Line => Inner::Line(LineFactors::new(sys)?),
        PreconditionerKind::TwoLevel => {
            if sys.column_len < 2 {
                return Err(SolveError::Config(
                    "two-level preconditioner needs vertical node columns".into(),
                ));
            }
            Inner::TwoLevel(LineFactors::new(sys)?, CoarseSpace::new(sys)?)
        }
    };
    Ok(Preconditioner { kind, inner })
}

impl Preconditioner {
    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn apply(&self, sys: &LinearSystem, r: &[f64], z: &mut [f64], parallel: bool) {
        match &self.inner {
            Inner::None => z.copy_from_slice(r),
            Inner::Jacobi(inv) => {
                if parallel {
                    z.par_iter_mut()
                        .zip(r.par_iter().zip(inv.par_iter()))
                        .for_each(|(z, (r, d))| *z = r * d);
                } else {
                    for ((z, r), d) in z.iter_mut().zip(r).zip(inv) {
                        *z = r * d;
                    }
                }
            }
            Inner::Ssor { omega, diag } => ssor(sys, *omega, diag, r, z),
            Inner::Line(f) => f.apply(r, z, parallel),
            Inner::TwoLevel(f, coarse) => {
                f.apply(r, z, parallel);
                coarse.add_correction(sys, r, z);
            }
        }
    }
}

fn ssor(sys: &LinearSystem, omega: f64, diag: &[f64], r: &[f64], z: &mut [f64]) {
    let n = sys.size();
    for i in 0..n {
        let (c, v) = sys.row(i);
        let mut s = r[i];
        for (&j, &a) in c.iter().zip(v) {
            if (j as usize) < i {
                s -= a * z[j as usize];
            }
        }
        z[i] = omega * s / diag[i];
    }
    for i in 0..n {
        z[i] *= diag[i] * (2.0 - omega) / (omega * omega);
    }
    for i in (0..n).rev() {
        let (c, v) = sys.row(i);
        let mut s = z[i];
        for (&j, &a) in c.iter().zip(v) {
            if (j as usize) > i {
                s -= a * z[j as usize];
            }
        }
        z[i] = omega * s / diag[i];
    }
}
