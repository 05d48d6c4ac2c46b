//! Self-checks run by `gapfield validate`: a manufactured-solution refinement
//! study, transform property suites, and a finite-difference cross-check of
//! the pushforward coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretize::{
    assemble, dirichlet_from_fn, evaluate_coefficients, uniform_axis, BoundaryFaces, CellSampling,
    TensorGrid,
};
use crate::geometry::GapGeometry;
use crate::linalg::Mat;
use crate::solve::{cg_solve, SolverConfig};
use crate::transform::{
    pushforward_at_physical, CoefficientField, CoordinateMap, FlattenMap, InjectedFault,
    PushforwardField,
};

use super::AnalyzeError;

/// One measured property and whether it met its threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub property: String,
    pub measured: f64,
    /// Human-readable acceptance condition, e.g. `<= 1e-6`.
    pub expected: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(
        module: &'static str,
        property: impl Into<String>,
        measured: f64,
        bound: f64,
    ) -> Self {
        Self {
            module,
            property: property.into(),
            measured,
            expected: format!("<= {bound}"),
            passed: measured <= bound,
        }
    }

    pub fn at_least(
        module: &'static str,
        property: impl Into<String>,
        measured: f64,
        bound: f64,
    ) -> Self {
        Self {
            module,
            property: property.into(),
            measured,
            expected: format!(">= {bound}"),
            passed: measured >= bound,
        }
    }

    pub fn within(
        module: &'static str,
        property: impl Into<String>,
        measured: f64,
        lo: f64,
        hi: f64,
    ) -> Self {
        Self {
            module,
            property: property.into(),
            measured,
            expected: format!("in [{lo}, {hi}]"),
            passed: (lo..=hi).contains(&measured),
        }
    }
}

/// Errors of the manufactured slab solution on successively halved grids.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabStudy {
    pub dim: usize,
    pub lateral_cells: Vec<usize>,
    pub errors: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl SlabStudy {
    /// `err(h) / err(h/2)` for each halving.
    pub fn ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

pub const SLAB_HALF_HEIGHT: f64 = 0.5;

/// `cosh(k z_1) cos(k (z_n + δ))` with `k = π / (2δ)`: harmonic, with zero
/// normal derivative on both faces `z_n = ±δ`.
pub fn slab_solution(z: &[f64]) -> f64 {
    let k = std::f64::consts::PI / (2.0 * SLAB_HALF_HEIGHT);
    let n = z.len();
    (k * z[0]).cosh() * (k * (z[n - 1] + SLAB_HALF_HEIGHT)).cos()
}

/// Solves the identity-coefficient slab problem on `[−1, 1]^{n−1} × [−δ, δ]`
/// with Dirichlet lateral faces and natural vertical faces, at each lateral
/// resolution in `lateral_cells` (vertical cells are half as many).
pub fn slab_refinement(
    dim: usize,
    lateral_cells: &[usize],
    solver: &SolverConfig,
) -> Result<SlabStudy, AnalyzeError> {
    let mut errors = Vec::new();
    let mut iterations = Vec::new();
    for &m in lateral_cells {
        let mut axes = vec![uniform_axis(-1.0, 1.0, m); dim - 1];
        axes.push(uniform_axis(
            -SLAB_HALF_HEIGHT,
            SLAB_HALF_HEIGHT,
            (m / 2).max(2),
        ));
        let grid = TensorGrid::new(axes)?;
        let cells = evaluate_coefficients(&grid, CellSampling::Center, solver.parallel, |_| {
            Ok(Mat::identity(dim))
        })?;
        let dir = dirichlet_from_fn(&grid, &BoundaryFaces::gap(dim), slab_solution);
        let sys = assemble(&grid, &cells, &dir, solver.parallel)?;
        let (w, rep) = cg_solve(&sys, None, solver)?;
        let err = (0..grid.node_count())
            .map(|p| (w[p] - slab_solution(&grid.coords(p)[..dim])).abs())
            .fold(0.0, f64::max);
        errors.push(err);
        iterations.push(rep.iterations);
    }
    Ok(SlabStudy {
        dim,
        lateral_cells: lateral_cells.to_vec(),
        errors,
        iterations,
    })
}

/// Random point strictly inside the gap with `|x' − c| < rad`.
fn interior_point(rng: &mut ChaCha8Rng, g: &GapGeometry, c: &[f64], rad: f64) -> Vec<f64> {
    let k = g.lateral_dim();
    loop {
        let xp: Vec<f64> = (0..k)
            .map(|i| c[i] + rad * (2.0 * rng.gen::<f64>() - 1.0))
            .collect();
        let dist = xp
            .iter()
            .zip(c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let Ok(h) = g.gap_height(&xp) else { continue };
        if dist >= rad {
            continue;
        }
        let t = 0.02 + 0.96 * rng.gen::<f64>();
        let mut x = xp.clone();
        x.push(g.bottom(&xp) + t * h);
        return x;
    }
}

/// Central-difference Jacobian of `map.forward`; vertical steps scale with the gap.
fn fd_jacobian(
    map: &dyn CoordinateMap,
    g: &GapGeometry,
    x: &[f64],
    lateral_step: f64,
) -> Result<Mat, AnalyzeError> {
    let n = x.len();
    let h = g
        .gap_height(&x[..n - 1])
        .map_err(crate::transform::TransformError::from)?;
    let mut j = Mat::zeros(n);
    for col in 0..n {
        let step = if col == n - 1 { 1e-5 * h } else { lateral_step };
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[col] += step;
        xm[col] -= step;
        let zp = map.forward(&xp)?;
        let zm = map.forward(&xm)?;
        for row in 0..n {
            j.set(row, col, (zp[row] - zm[row]) / (2.0 * step));
        }
    }
    Ok(j)
}

/// The three flattening maps used by the pipeline, around a point near the axis.
fn maps_for(g: &GapGeometry) -> Result<Vec<(&'static str, FlattenMap)>, AnalyzeError> {
    let k = g.lateral_dim();
    let x0: Vec<f64> = (0..k).map(|i| if i == 0 { 0.03 } else { -0.01 }).collect();
    Ok(vec![
        ("global", FlattenMap::global(g.clone())),
        ("local", FlattenMap::local(g.clone(), &x0)?),
        (
            "annulus",
            FlattenMap::annulus(g.clone(), &vec![0.0; k], 0.15)?,
        ),
    ])
}

/// Jacobian, orientation, and round-trip properties of every map on `points`
/// random interior points.
pub fn transform_checks(
    g: &GapGeometry,
    points: usize,
    seed: u64,
) -> Result<Vec<Check>, AnalyzeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = g.lateral_dim();
    let mut out = Vec::new();
    for (name, map) in maps_for(g)? {
        let delta = g.delta_scale(&vec![0.0; k]);
        let (mut jac_err, mut min_det, mut trip) = (0.0f64, f64::INFINITY, 0.0f64);
        for _ in 0..points {
            let x = interior_point(&mut rng, g, &vec![0.0; k], 0.3);
            let j = map.physical_jacobian(&x)?;
            let fd = fd_jacobian(&map, g, &x, 1e-5 * delta)?;
            let scale = j.max_abs();
            for r in 0..=k {
                for c in 0..=k {
                    let e = j.get(r, c);
                    jac_err = jac_err.max((fd.get(r, c) - e).abs() / e.abs().max(1e-3 * scale));
                }
            }
            min_det = min_det.min(j.det());
            let z = map.forward(&x)?;
            let back = map.forward(&map.inverse(&z)?)?;
            for i in 0..=k {
                trip = trip.max((back[i] - z[i]).abs() / z[i].abs().max(map.half_height()));
            }
        }
        let eps = g.epsilon;
        out.push(Check::at_most(
            "transform",
            format!("{name} map Jacobian vs central differences (eps={eps:e})"),
            jac_err,
            1e-6,
        ));
        out.push(Check {
            module: "transform",
            property: format!("{name} map det J (eps={eps:e})"),
            measured: min_det,
            expected: "> 0".into(),
            passed: min_det > 0.0,
        });
        out.push(Check::at_most(
            "transform",
            format!("{name} map inverse round trip (eps={eps:e})"),
            trip,
            1e-12,
        ));
    }
    Ok(out)
}

/// Compares the coefficients the pipeline assembles with `J a Jᵀ / det J`
/// built from finite-difference Jacobians, on the global map.
pub fn pushforward_check(
    g: &GapGeometry,
    a: &CoefficientField,
    fault: Option<InjectedFault>,
    points: usize,
    seed: u64,
) -> Result<Check, AnalyzeError> {
    let map = FlattenMap::global(g.clone());
    let mut push = PushforwardField::new(a, &map);
    if let Some(f) = fault {
        push = push.with_fault(f);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = g.lateral_dim();
    let delta = g.delta_scale(&vec![0.0; k]);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x = interior_point(&mut rng, g, &vec![0.0; k], 0.5);
        let z = map.forward(&x)?;
        let b = push.at(&z)?;
        let j = fd_jacobian(&map, g, &x, 1e-5 * delta)?.scale(map.reference_scale());
        let (b_fd, _) = Mat::congruence_over_det(&j, &a.evaluate(&x));
        worst = worst.max(b.sub(&b_fd).max_abs() / b_fd.max_abs());
        // the exact route must agree with itself as well
        debug_assert!(pushforward_at_physical(a, &map, &x).is_ok());
    }
    Ok(Check::at_most(
        "transform",
        format!(
            "pushforward vs finite-difference route (eps={:e})",
            g.epsilon
        ),
        worst,
        1e-5,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::PreconditionerKind;

    fn solver() -> SolverConfig {
        SolverConfig {
            tol: 1e-12,
            max_iter: 10_000,
            preconditioner: PreconditionerKind::Line,
            parallel: false,
        }
    }

    #[test]
    fn slab_solution_is_harmonic_with_insulated_faces() {
        let h = 1e-4;
        let z = [0.3, 0.1];
        let lap = (slab_solution(&[z[0] + h, z[1]])
            + slab_solution(&[z[0] - h, z[1]])
            + slab_solution(&[z[0], z[1] + h])
            + slab_solution(&[z[0], z[1] - h])
            - 4.0 * slab_solution(&z))
            / (h * h);
        assert!(lap.abs() < 1e-5);
        for zn in [-SLAB_HALF_HEIGHT, SLAB_HALF_HEIGHT] {
            let d = (slab_solution(&[0.2, zn + h]) - slab_solution(&[0.2, zn - h])) / (2.0 * h);
            assert!(d.abs() < 1e-8);
        }
    }

    #[test]
    fn slab_study_is_second_order() {
        let s = slab_refinement(2, &[8, 16, 32], &solver()).unwrap();
        for r in s.ratios() {
            assert!((3.5..=4.5).contains(&r), "{s:?}");
        }
    }

    #[test]
    fn loose_tolerance_breaks_the_order() {
        let cfg = SolverConfig {
            tol: 1.0,
            ..solver()
        };
        let s = slab_refinement(2, &[8, 16, 32], &cfg).unwrap();
        assert!(s.ratios().iter().any(|r| !(3.5..=4.5).contains(r)), "{s:?}");
    }

    #[test]
    fn transform_suite_passes_and_fault_is_caught() {
        let g = GapGeometry::balls(3, 1.0, 1e-3, 0.9, 1.0).unwrap();
        let checks = transform_checks(&g, 50, 3).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
        let a = CoefficientField::smooth_perturbation(3, 0.2, vec![1.0, 2.0, 0.5], 0.5).unwrap();
        assert!(pushforward_check(&g, &a, None, 50, 4).unwrap().passed);
        assert!(
            !pushforward_check(&g, &a, Some(InjectedFault::FlipNormalCross), 50, 4)
                .unwrap()
                .passed
        );
    }
}
