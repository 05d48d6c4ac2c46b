//! Preconditioned conjugate gradients for the assembled systems.
//!
//! Reductions are summed over fixed 4096-entry chunks in a fixed order, so a
//! solve gives bitwise identical iterates with one thread or many.

mod precond;

pub use precond::{precondition, BandedCholesky, Preconditioner, PreconditionerKind};

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::discretize::LinearSystem;

const DOT_CHUNK: usize = 4096;
const MAX_RESTARTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("CG did not reach the tolerance in {iterations} iterations (relative residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
        history: Vec<f64>,
    },
    #[error(
        "operator is not positive definite (curvature {curvature:e} at iteration {iteration})"
    )]
    NonSpd { iteration: usize, curvature: f64 },
    #[error("diagonal entry {value:e} in row {row} is not positive")]
    ZeroDiagonal { row: usize, value: f64 },
    #[error("solver configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Target for `‖b − Ax‖ / ‖b‖`; must lie in `(0, 1]`.
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: PreconditionerKind,
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            preconditioner: PreconditionerKind::TwoLevel,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// True relative residual of the returned iterate.
    pub final_relative_residual: f64,
    pub wall_time: f64,
    /// Recursive relative residual after each iteration.
    pub history: Vec<f64>,
    pub preconditioner: &'static str,
}

fn chunk_sums(parallel: bool, n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> f64 {
    let chunks = n.div_ceil(DOT_CHUNK);
    let part = |k: usize| f(k * DOT_CHUNK, ((k + 1) * DOT_CHUNK).min(n));
    let partial: Vec<f64> = if parallel {
        (0..chunks).into_par_iter().map(part).collect()
    } else {
        (0..chunks).map(part).collect()
    };
    partial.iter().sum()
}

pub fn dot(a: &[f64], b: &[f64], parallel: bool) -> f64 {
    chunk_sums(parallel, a.len(), |lo, hi| {
        a[lo..hi].iter().zip(&b[lo..hi]).map(|(x, y)| x * y).sum()
    })
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64], parallel: bool) {
    if parallel {
        y.par_iter_mut()
            .zip(x.par_iter())
            .for_each(|(y, x)| *y += alpha * x);
    } else {
        y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
    }
}

fn residual(sys: &LinearSystem, x: &[f64], r: &mut [f64], parallel: bool) {
    sys.matvec(x, r, parallel);
    for (ri, bi) in r.iter_mut().zip(&sys.rhs) {
        *ri = bi - *ri;
    }
}

/// Solves `A x = b`, starting from `x0` (zero when `None`).
pub fn cg_solve(
    sys: &LinearSystem,
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    if !(cfg.tol > 0.0 && cfg.tol <= 1.0) {
        return Err(SolveError::Config(format!(
            "tolerance {} outside (0, 1]",
            cfg.tol
        )));
    }
    let start = Instant::now();
    let pre = precondition(sys, cfg.preconditioner)?;
    solve_with(sys, &pre, x0, cfg, start)
}

/// [`cg_solve`] with a prebuilt preconditioner.
pub fn solve_with(
    sys: &LinearSystem,
    pre: &Preconditioner,
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
    start: Instant,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let n = sys.size();
    let par = cfg.parallel;
    let bnorm = dot(&sys.rhs, &sys.rhs, par).sqrt();
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut report = SolveReport {
        iterations: 0,
        final_relative_residual: 0.0,
        wall_time: 0.0,
        history: Vec::new(),
        preconditioner: pre.kind().name(),
    };
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }

    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut best = (f64::INFINITY, x.clone());

    for _restart in 0..=MAX_RESTARTS {
        residual(sys, &x, &mut r, par);
        let mut rel = dot(&r, &r, par).sqrt() / bnorm;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= cfg.tol {
            report.final_relative_residual = rel;
            report.wall_time = start.elapsed().as_secs_f64();
            return Ok((x, report));
        }
        pre.apply(sys, &r, &mut z, par);
        let mut p = z.clone();
        let mut rz = dot(&r, &z, par);
        while report.iterations < cfg.max_iter {
            sys.matvec(&p, &mut ap, par);
            let curvature = dot(&p, &ap, par);
            if !(curvature > 0.0) {
                return Err(SolveError::NonSpd {
                    iteration: report.iterations,
                    curvature,
                });
            }
            let alpha = rz / curvature;
            axpy(&mut x, alpha, &p, par);
            axpy(&mut r, -alpha, &ap, par);
            report.iterations += 1;
            rel = dot(&r, &r, par).sqrt() / bnorm;
            report.history.push(rel);
            if rel <= cfg.tol {
                break;
            }
            pre.apply(sys, &r, &mut z, par);
            let rz_new = dot(&r, &z, par);
            let beta = rz_new / rz;
            rz = rz_new;
            if par {
                p.par_iter_mut()
                    .zip(z.par_iter())
                    .for_each(|(p, z)| *p = z + beta * *p);
            } else {
                p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
            }
        }
        residual(sys, &x, &mut r, par);
        let true_rel = dot(&r, &r, par).sqrt() / bnorm;
        if true_rel < best.0 {
            best = (true_rel, x.clone());
        }
        if true_rel <= cfg.tol {
            report.final_relative_residual = true_rel;
            report.wall_time = start.elapsed().as_secs_f64();
            return Ok((x, report));
        }
        if report.iterations >= cfg.max_iter {
            break;
        }
    }
    Err(SolveError::NonConvergence {
        iterations: report.iterations,
        residual: best.0,
        best: best.1,
        history: report.history,
    })
}

/// Smallest Ritz value after `steps` Lanczos iterations on the free rows.
///
/// A cheap positivity smoke test: a non-positive value proves the operator is
/// not positive definite; a positive one is evidence, not proof.
pub fn smallest_ritz_value(sys: &LinearSystem, steps: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let n = sys.size();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let free: Vec<bool> = sys.dirichlet.iter().map(|d| !d).collect();
    let mut q: Vec<f64> = free
        .iter()
        .map(|&f| if f { rng.gen::<f64>() - 0.5 } else { 0.0 })
        .collect();
    let qn = dot(&q, &q, false).sqrt();
    q.iter_mut().for_each(|v| *v /= qn);
    let mut q_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut beta = 0.0;
    for _ in 0..steps.min(n) {
        sys.matvec(&q, &mut w, false);
        for i in 0..n {
            if !free[i] {
                w[i] = 0.0;
            }
        }
        let alpha = dot(&q, &w, false);
        for i in 0..n {
            w[i] -= alpha * q[i] + beta * q_prev[i];
        }
        alphas.push(alpha);
        beta = dot(&w, &w, false).sqrt();
        if beta < 1e-14 * alpha.abs() {
            break;
        }
        betas.push(beta);
        q_prev = std::mem::replace(&mut q, w.iter().map(|v| v / beta).collect());
    }
    betas.truncate(alphas.len().saturating_sub(1));
    tridiagonal_min_eigenvalue(&alphas, &betas)
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
pub fn tridiagonal_min_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let count_below = |x: f64| {
        let mut c = 0;
        let mut d = 1.0;
        for i in 0..diag.len() {
            let b2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            d = diag[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                c += 1;
            }
        }
        c
    };
    let radius = (0..diag.len())
        .map(|i| {
            diag[i].abs()
                + if i > 0 { off[i - 1].abs() } else { 0.0 }
                + off.get(i).map_or(0.0, |v| v.abs())
        })
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (-radius - 1.0, radius + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagonal_system(d: &[f64], b: &[f64]) -> LinearSystem {
        LinearSystem::from_rows(
            d.iter().enumerate().map(|(i, v)| vec![(i, *v)]).collect(),
            b.to_vec(),
        )
    }

    fn laplacian_1d(n: usize) -> LinearSystem {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 2.0)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        LinearSystem::from_rows(rows, (0..n).map(|i| (i as f64 * 0.37).sin()).collect())
    }

    fn cfg(p: PreconditionerKind) -> SolverConfig {
        SolverConfig {
            tol: 1e-12,
            max_iter: 1000,
            preconditioner: p,
            parallel: false,
        }
    }

    #[test]
    fn diagonal_system_is_solved_exactly() {
        let d: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let sys = diagonal_system(&d, &vec![1.0; 10]);
        let (x, rep) = cg_solve(&sys, None, &cfg(PreconditionerKind::None)).unwrap();
        for k in 0..10 {
            assert!((x[k] - 1.0 / d[k]).abs() < 1e-12);
        }
        assert!(rep.iterations <= 10);
    }

    #[test]
    fn two_by_two_stiff_diagonal_converges_quickly() {
        let sys = diagonal_system(&[1.0, 1e6], &[1.0, 1.0]);
        let (x, rep) = cg_solve(&sys, None, &cfg(PreconditionerKind::None)).unwrap();
        assert!(rep.iterations <= 3);
        assert!((x[1] - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn zero_rhs_returns_zero_immediately() {
        let sys = diagonal_system(&[2.0, 3.0], &[0.0, 0.0]);
        let (x, rep) = cg_solve(&sys, Some(&[5.0, 5.0]), &cfg(PreconditionerKind::Jacobi)).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn scaling_the_system_leaves_the_solution_unchanged() {
        let sys = laplacian_1d(50);
        let mut scaled = sys.clone();
        scaled.vals.iter_mut().for_each(|v| *v *= 7.0);
        scaled.rhs.iter_mut().for_each(|v| *v *= 7.0);
        for p in [
            PreconditionerKind::None,
            PreconditionerKind::Jacobi,
            PreconditionerKind::Ssor { omega: 1.2 },
        ] {
            let (a, _) = cg_solve(&sys, None, &cfg(p)).unwrap();
            let (b, _) = cg_solve(&scaled, None, &cfg(p)).unwrap();
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12 * scale.max(1.0) * 10.0, "{u} {v}");
            }
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let sys = laplacian_1d(200);
        let c = SolverConfig {
            tol: 1e-12,
            max_iter: 5,
            preconditioner: PreconditionerKind::None,
            parallel: false,
        };
        match cg_solve(&sys, None, &c) {
            Err(SolveError::NonConvergence {
                iterations,
                history,
                best,
                ..
            }) => {
                assert_eq!(iterations, 5);
                assert_eq!(history.len(), 5);
                assert_eq!(best.len(), 200);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn indefinite_operator_is_detected() {
        let sys = LinearSystem::from_rows(
            vec![vec![(0, 1.0), (1, 2.0)], vec![(0, 2.0), (1, 1.0)]],
            vec![1.0, 0.0],
        );
        assert!(matches!(
            cg_solve(&sys, None, &cfg(PreconditionerKind::None)),
            Err(SolveError::NonSpd { .. })
        ));
        let neg = diagonal_system(&[1.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(
            cg_solve(&neg, None, &cfg(PreconditionerKind::Jacobi)),
            Err(SolveError::ZeroDiagonal { row: 1, .. })
        ));
    }

    #[test]
    fn tolerance_outside_unit_interval_is_rejected() {
        let sys = laplacian_1d(4);
        let c = SolverConfig {
            tol: 1.5,
            ..cfg(PreconditionerKind::None)
        };
        assert!(matches!(
            cg_solve(&sys, None, &c),
            Err(SolveError::Config(_))
        ));
    }

    #[test]
    fn line_and_two_level_match_plain_cg() {
        // 1D Laplacian split into blocks of 10 with the end rows pinned
        let mut sys = laplacian_1d(60);
        sys.column_len = 10;
        let (a, _) = cg_solve(&sys, None, &cfg(PreconditionerKind::None)).unwrap();
        for p in [
            PreconditionerKind::Line,
            PreconditionerKind::TwoLevel,
            PreconditionerKind::Ssor { omega: 1.0 },
        ] {
            let (b, rep) = cg_solve(&sys, None, &cfg(p)).unwrap();
            assert!(rep.final_relative_residual <= 1e-12);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn banded_cholesky_solves_a_pentadiagonal_system() {
        let n = 30;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, 6.0));
            if i >= 1 {
                entries.push((i, i - 1, -1.5));
            }
            if i >= 2 {
                entries.push((i, i - 2, -1.0));
            }
        }
        let f = BandedCholesky::factor(n, &entries).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut b = vec![0.0; n];
        for &(i, j, v) in &entries {
            b[i] += v * xs[j];
            if i != j {
                b[j] += v * xs[i];
            }
        }
        f.solve(&mut b);
        for (u, v) in b.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn ritz_value_brackets_the_spectrum() {
        let sys = laplacian_1d(40);
        let ritz = smallest_ritz_value(&sys, 40, 3);
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / 41.0).cos();
        assert!((ritz - exact).abs() < 1e-6, "{ritz} vs {exact}");
        let indefinite = LinearSystem::from_rows(
            vec![vec![(0, 1.0), (1, 2.0)], vec![(0, 2.0), (1, 1.0)]],
            vec![0.0; 2],
        );
        assert!(smallest_ritz_value(&indefinite, 2, 1) < 0.0);
    }

    #[test]
    fn serial_and_parallel_iterates_agree_bitwise() {
        let sys = laplacian_1d(20_000);
        let mut c = cfg(PreconditionerKind::Jacobi);
        c.max_iter = 50;
        let a = cg_solve(&sys, None, &c);
        c.parallel = true;
        let b = cg_solve(&sys, None, &c);
        assert_eq!(
            a,
            b.map(|(x, mut r)| {
                r.wall_time = match &a {
                    Ok((_, ra)) => ra.wall_time,
                    Err(_) => 0.0,
                };
                (x, r)
            })
        );
    }
}
