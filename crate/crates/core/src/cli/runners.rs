//! Experiment orchestration on top of the library pipeline. Everything here
//! returns plain results; file emission lives in [`super::run`].

use std::time::Instant;

use rayon::prelude::*;

use crate::analyze::{
    fit_power_law, gradient_pullback, harnack_ratio, layer_y_norm, max_layer_holder, osc_decay_fit,
    oscillation, pushforward_check, pushforward_stats, slab_refinement, transform_checks, Check,
    GradientField, HarnackShift, LayerFamily, LayeredExperiment, PhysicalField, PowerLawFit,
    PushforwardStats, FLAT_TOLERANCE,
};
use crate::geometry::lateral_samples;
use crate::problem::{GapProblem, GapSolution};
use crate::solve::SolverConfig;

use super::config::{ConfigError, LayersSpec, Scenario, SweepMetric};
use super::{CliError, RunOptions};

/// Lateral resolutions of the manufactured slab study (three halvings).
pub const SLAB_LEVELS: [usize; 4] = [8, 16, 32, 64];
/// Random interior points per map in the transform suites.
pub const TRANSFORM_POINTS: usize = 100;
/// Slack on the spectral bounds of the pushed-forward coefficient.
const EIG_SLACK: f64 = 1e-9;

pub fn build_problem(
    scn: &Scenario,
    epsilon: f64,
    opts: &RunOptions,
) -> Result<GapProblem, CliError> {
    let geometry = scn.geometry()?.build(epsilon)?;
    Ok(GapProblem {
        geometry,
        coefficient: scn.coefficient.clone(),
        boundary: scn
            .boundary
            .clone()
            .ok_or(ConfigError::Missing("boundary.family"))?,
        grid: scn.grid_spec(),
        solver: scn.solver(opts.parallel),
        fault: opts.fault,
    })
}

/// A solved problem with its physical values and gradients.
pub struct EpsilonSolve {
    pub epsilon: f64,
    pub solution: GapSolution,
    pub u: PhysicalField,
    pub grad: GradientField,
    pub wall_time_s: f64,
}

pub fn solve_at(scn: &Scenario, epsilon: f64, opts: &RunOptions) -> Result<EpsilonSolve, CliError> {
    let start = Instant::now();
    let problem = build_problem(scn, epsilon, opts)?;
    let dump = opts.debug_dump.then(|| opts.out.join("dump"));
    let solution = problem.solve(dump.as_deref())?;
    let u = PhysicalField::new(&solution.field, &solution.map, opts.parallel)?;
    let grad = gradient_pullback(&solution.field, &solution.map, opts.parallel)?;
    Ok(EpsilonSolve {
        epsilon,
        solution,
        u,
        grad,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// `r_k = δ^{1−γ} 2^{−k}` for `k = 0..levels`.
pub fn dyadic_radii(delta: f64, gamma: f64, levels: usize) -> Vec<f64> {
    (0..levels)
        .map(|k| delta.powf(1.0 - gamma) * 0.5f64.powi(k as i32))
        .collect()
}

/// Oscillation and both Harnack ratios at one radius; a failed positivity
/// check is kept as its message.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusDiagnostics {
    pub r: f64,
    pub osc: f64,
    pub above: Result<f64, String>,
    pub below: Result<f64, String>,
}

impl RadiusDiagnostics {
    pub fn max_ratio(&self) -> Option<f64> {
        [&self.above, &self.below]
            .into_iter()
            .filter_map(|r| r.as_ref().ok().copied())
            .reduce(f64::max)
    }
}

pub fn radius_diagnostics(
    u: &PhysicalField,
    x0p: &[f64],
    radii: &[f64],
) -> Result<Vec<RadiusDiagnostics>, CliError> {
    radii
        .iter()
        .map(|&r| {
            let ratio = |s| {
                harnack_ratio(u, x0p, r, s)
                    .map(|h| h.ratio)
                    .map_err(|e| e.to_string())
            };
            Ok(RadiusDiagnostics {
                r,
                osc: oscillation(u, x0p, r)?,
                above: ratio(HarnackShift::FromAbove),
                below: ratio(HarnackShift::FromBelow),
            })
        })
        .collect()
}

fn max_ratio(diag: &[RadiusDiagnostics]) -> f64 {
    diag.iter()
        .filter_map(RadiusDiagnostics::max_ratio)
        .reduce(f64::max)
        .unwrap_or(f64::NAN)
}

/// Column maximum of `|∇u|` at a lateral sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    /// Lateral coordinates of the grid column actually used.
    pub xp: Vec<f64>,
    pub column_max: f64,
}

impl PointSample {
    pub fn radius(&self) -> f64 {
        self.xp.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub delta0: f64,
    pub max_grad_global: f64,
    pub max_grad_segment: f64,
    pub radii: Vec<f64>,
    pub osc: Vec<f64>,
    pub harnack_max_ratio: f64,
    pub cg_iters: usize,
    pub wall_time_s: f64,
    pub u_sup: f64,
    pub pointwise: Vec<PointSample>,
}

impl SweepRow {
    pub fn metric(&self, metric: SweepMetric) -> f64 {
        match metric {
            SweepMetric::Global => self.max_grad_global,
            SweepMetric::Segment => self.max_grad_segment,
        }
    }
}

pub fn sweep_row(scn: &Scenario, epsilon: f64, opts: &RunOptions) -> Result<SweepRow, CliError> {
    let s = solve_at(scn, epsilon, opts)?;
    let n = s.u.grid.dim();
    let origin = vec![0.0; n - 1];
    let delta0 = epsilon.sqrt();
    let radii = dyadic_radii(delta0, scn.numerics.gamma, scn.numerics.osc_levels);
    let diag = radius_diagnostics(&s.u, &origin, &radii)?;
    let samples = scn.sweep.as_ref().map_or(25, |sw| sw.samples);
    let pointwise = lateral_samples(n - 1, scn.numerics.r0, samples)
        .iter()
        .map(|xp| {
            let col = s.grad.nearest_column(xp);
            PointSample {
                xp: s.grad.points[col][..n - 1].to_vec(),
                column_max: s.grad.segment_max(xp),
            }
        })
        .collect();
    Ok(SweepRow {
        epsilon,
        delta0,
        max_grad_global: s.grad.max_in_disk(scn.numerics.r0, 2),
        max_grad_segment: s.grad.segment_max(&origin),
        osc: diag.iter().map(|d| d.osc).collect(),
        radii,
        harnack_max_ratio: max_ratio(&diag),
        cg_iters: s.solution.report.iterations,
        wall_time_s: s.wall_time_s,
        u_sup: s.u.sup_norm(),
        pointwise,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFit {
    pub scenario_id: String,
    pub fit: PowerLawFit,
    /// Mean oscillation decay rate over the sweep, NaN when any row is flat.
    pub sigma_hat: f64,
    pub beta_hat: f64,
}

/// Fits the chosen gradient metric against ε and the oscillation decay per row.
pub fn fit_sweep(
    scenario_id: &str,
    epsilons: &[f64],
    metric: &[f64],
    osc: &[(Vec<f64>, Vec<f64>)],
) -> Result<SweepFit, CliError> {
    if epsilons.len() < 4 {
        return Err(CliError::Numerical(format!(
            "fit needs at least 4 surviving epsilon values, got {}",
            epsilons.len()
        )));
    }
    let fit = fit_power_law(epsilons, metric)?;
    let sigmas: Result<Vec<f64>, _> = osc
        .iter()
        .map(|(r, o)| osc_decay_fit(r, o).map(|d| d.sigma))
        .collect();
    let sigma_hat = sigmas.map_or(f64::NAN, |s| s.iter().sum::<f64>() / s.len() as f64);
    Ok(SweepFit {
        scenario_id: scenario_id.to_string(),
        beta_hat: fit.slope + 0.5,
        fit,
        sigma_hat,
    })
}

pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// ε values whose solve failed, with the reason.
    pub skipped: Vec<(f64, String)>,
    /// Refused when fewer than four rows survive.
    pub fit: Result<SweepFit, CliError>,
}

pub fn run_sweep(scn: &Scenario, opts: &RunOptions) -> Result<SweepOutcome, CliError> {
    let spec = scn.sweep_spec()?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &eps in &spec.epsilons {
        match sweep_row(scn, eps, opts) {
            Ok(r) => rows.push(r),
            Err(e @ CliError::Config(_)) => return Err(e),
            Err(e) => skipped.push((eps, e.to_string())),
        }
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let metric: Vec<f64> = rows.iter().map(|r| r.metric(spec.metric)).collect();
    let osc: Vec<_> = rows
        .iter()
        .map(|r| (r.radii.clone(), r.osc.clone()))
        .collect();
    let fit = fit_sweep(&scn.id, &eps, &metric, &osc);
    Ok(SweepOutcome { rows, skipped, fit })
}

/// `max_ε M(ε) / min_ε M(ε)` with
/// `M(ε) = max_samples column_max · (ε + |x'|²)^{1/2 − β̂} / ‖u‖_∞`.
pub fn pointwise_spread(rows: &[(f64, f64, Vec<PointSample>)], beta_hat: f64) -> f64 {
    let m: Vec<f64> = rows
        .iter()
        .map(|(eps, u_sup, pts)| {
            pts.iter()
                .map(|p| p.column_max * (eps + p.radius().powi(2)).powf(0.5 - beta_hat) / u_sup)
                .fold(0.0, f64::max)
        })
        .collect();
    let hi = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnackEpsilon {
    pub epsilon: f64,
    pub delta: f64,
    pub diagnostics: Vec<RadiusDiagnostics>,
    pub max_ratio: f64,
    /// Fitted decay rate, or why it is undefined.
    pub sigma: Result<(f64, f64), String>,
    pub warning: bool,
}

pub fn run_harnack(scn: &Scenario, opts: &RunOptions) -> Result<Vec<HarnackEpsilon>, CliError> {
    let spec = scn.harnack_spec()?;
    let mut out = Vec::new();
    for &eps in &spec.epsilons {
        let s = solve_at(scn, eps, opts)?;
        let delta = (eps + spec.center.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let radii = dyadic_radii(delta, scn.numerics.gamma, scn.numerics.osc_levels);
        let diagnostics = radius_diagnostics(&s.u, &spec.center, &radii)?;
        let osc: Vec<f64> = diagnostics.iter().map(|d| d.osc).collect();
        let sigma = if osc.iter().all(|o| *o <= FLAT_TOLERANCE * s.u.sup_norm()) {
            Err("the solution is flat at every radius".to_string())
        } else {
            osc_decay_fit(&radii, &osc)
                .map(|d| (d.sigma, d.r_squared))
                .map_err(|e| e.to_string())
        };
        out.push(HarnackEpsilon {
            epsilon: eps,
            delta,
            max_ratio: max_ratio(&diagnostics),
            diagnostics,
            sigma,
            warning: s.u.grid.dim() == 2,
        });
    }
    Ok(out)
}

/// Harnack and decay-rate checks over the per-ε summaries.
pub fn harnack_checks(
    results: &[(f64, f64, f64)],
    ratio_spread: f64,
    sigma_floor: f64,
    sigma_spread: f64,
) -> Vec<Check> {
    // (epsilon, max_ratio, sigma)
    let ratios: Vec<f64> = results.iter().map(|r| r.1).collect();
    let sigmas: Vec<f64> = results.iter().map(|r| r.2).collect();
    let spread = |v: &[f64]| {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            / v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let mut out = vec![Check::at_most(
        "analyze",
        "max Harnack ratio spread across epsilon",
        spread(&ratios),
        ratio_spread,
    )];
    for (eps, _, s) in results {
        out.push(Check {
            module: "analyze",
            property: format!("oscillation decay rate (eps={eps:e})"),
            measured: *s,
            expected: format!("> {sigma_floor}"),
            passed: *s > sigma_floor,
        });
    }
    let max = sigmas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = sigmas.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(Check::at_most(
        "analyze",
        "decay rate spread / max decay rate",
        (max - min) / max,
        sigma_spread,
    ));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRow {
    pub l: usize,
    pub seed: u64,
    pub grad_ratio: f64,
    pub y_norm_ratio: f64,
    pub iterations: usize,
}

pub fn layer_family(spec: &LayersSpec) -> LayerFamily {
    LayerFamily {
        dim: spec.dim,
        amplitude: spec.amplitude,
        wavenumber: spec.wavenumber,
        jitter: spec.jitter,
    }
}

pub fn layer_row(
    scn: &Scenario,
    l: usize,
    seed: u64,
    parallel: bool,
) -> Result<LayerRow, CliError> {
    let spec = scn.layers_spec()?;
    let a = layer_family(spec).sample(l, seed);
    let exp = LayeredExperiment {
        lateral_cells: spec.lateral_cells,
        vertical_cells: spec.vertical_cells,
        vertical_samples: spec.vertical_samples,
        boundary: scn
            .boundary
            .clone()
            .ok_or(ConfigError::Missing("boundary.family"))?,
        solver: SolverConfig {
            parallel,
            ..scn.solver(parallel)
        },
    };
    let outcome = exp.run(&a)?;
    let y = layer_y_norm(&a, spec.mu, spec.y_samples)?;
    let norm = max_layer_holder(&a, spec.mu, spec.holder_pairs, seed);
    Ok(LayerRow {
        l,
        seed,
        grad_ratio: outcome.grad_ratio,
        y_norm_ratio: y / norm,
        iterations: outcome.iterations,
    })
}

/// One row per `(l, seed)`, sorted by key whatever the execution order.
pub fn run_layers(scn: &Scenario, opts: &RunOptions) -> Result<Vec<LayerRow>, CliError> {
    let spec = scn.layers_spec()?;
    let keys: Vec<(usize, u64)> = spec
        .counts
        .iter()
        .flat_map(|&l| spec.seeds.iter().map(move |&s| (l, s)))
        .collect();
    let mut rows: Vec<LayerRow> = if opts.parallel {
        keys.par_iter()
            .map(|&(l, s)| layer_row(scn, l, s, true))
            .collect::<Result<_, _>>()?
    } else {
        keys.iter()
            .map(|&(l, s)| layer_row(scn, l, s, false))
            .collect::<Result<_, _>>()?
    };
    rows.sort_by_key(|r| (r.l, r.seed));
    Ok(rows)
}

/// Per-seed gradient growth from the smallest to the largest layer count, and
/// the relative increase of the mean Y-norm ratio from `l = 8` (or the
/// smallest count) to the largest.
pub fn layer_checks(rows: &[LayerRow], max_growth: f64, max_y_increase: f64) -> Vec<Check> {
    let Some(l_min) = rows.iter().map(|r| r.l).min() else {
        return Vec::new();
    };
    let l_max = rows.iter().map(|r| r.l).max().unwrap();
    let l_ref = if rows.iter().any(|r| r.l == 8) {
        8
    } else {
        l_min
    };
    let mut out = Vec::new();
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let at = |l: usize, s: u64| rows.iter().find(|r| r.l == l && r.seed == s);
    for s in seeds {
        if let (Some(a), Some(b)) = (at(l_min, s), at(l_max, s)) {
            out.push(Check::at_most(
                "analyze",
                format!("grad_ratio(l={l_max}) / grad_ratio(l={l_min}), seed {s}"),
                b.grad_ratio / a.grad_ratio,
                max_growth,
            ));
        }
    }
    let mean = |l: usize| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.l == l)
            .map(|r| r.y_norm_ratio)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    out.push(Check::at_most(
        "analyze",
        format!("mean Y-norm ratio increase from l={l_ref} to l={l_max}"),
        mean(l_max) / mean(l_ref) - 1.0,
        max_y_increase,
    ));
    out
}

/// Pushforward spectra and Hölder quotients at `x0' = 0` for each ε.
pub fn pushforward_sweep(
    scn: &Scenario,
    epsilons: &[f64],
) -> Result<Vec<PushforwardStats>, CliError> {
    let geom = scn.geometry()?;
    epsilons
        .iter()
        .map(|&eps| {
            let g = geom.build(eps)?;
            Ok(pushforward_stats(
                &g,
                &scn.coefficient,
                &vec![0.0; geom.dim - 1],
                scn.numerics.local_cells,
                scn.numerics.local_vertical_cells,
                scn.coefficient.alpha,
                scn.numerics.holder_pairs,
                0x5eed,
            )?)
        })
        .collect()
}

pub fn pushforward_checks(scn: &Scenario, stats: &[PushforwardStats]) -> Vec<Check> {
    let (lambda, big) = (scn.coefficient.lambda, scn.coefficient.big_lambda);
    let mut out = Vec::new();
    for s in stats {
        out.push(Check::at_least(
            "transform",
            format!("min eigenvalue of b (eps={:e})", s.epsilon),
            s.min_eig,
            lambda / 10.0 - EIG_SLACK,
        ));
        out.push(Check::at_most(
            "transform",
            format!("max eigenvalue of b (eps={:e})", s.epsilon),
            s.max_eig,
            10.0 * big + EIG_SLACK,
        ));
    }
    let h: Vec<f64> = stats.iter().map(|s| s.holder).collect();
    if !h.is_empty() {
        let hi = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
        let finite = h.iter().all(|v| v.is_finite());
        out.push(Check::at_most(
            "transform",
            "Hölder quotient spread across epsilon",
            if finite { hi / lo } else { f64::INFINITY },
            2.0,
        ));
    }
    out
}

/// The full self-check suite of `validate`.
pub fn run_validate(scn: &Scenario, opts: &RunOptions) -> Result<Vec<Check>, CliError> {
    let solver = scn.solver(opts.parallel);
    let mut checks = Vec::new();
    let dims: &[usize] = match &scn.geometry {
        Some(g) => std::slice::from_ref(&g.dim),
        None => &[2, 3],
    };
    for &dim in dims {
        let study = slab_refinement(dim, &SLAB_LEVELS, &solver)?;
        for (i, r) in study.ratios().into_iter().enumerate() {
            let (a, b) = (SLAB_LEVELS[i], SLAB_LEVELS[i + 1]);
            checks.push(Check::within(
                "discretize",
                format!("slab {dim}D error ratio {a} -> {b} cells"),
                r,
                3.5,
                4.5,
            ));
        }
    }
    let Some(geom) = &scn.geometry else {
        return Ok(checks);
    };
    let epsilons: Vec<f64> = match &scn.sweep {
        Some(s) => s.epsilons.clone(),
        None => vec![scn.single_epsilon()?],
    };
    for (i, &eps) in epsilons.iter().enumerate() {
        let g = geom.build(eps)?;
        checks.extend(transform_checks(&g, TRANSFORM_POINTS, 17 + i as u64)?);
        checks.push(pushforward_check(
            &g,
            &scn.coefficient,
            opts.fault,
            TRANSFORM_POINTS,
            29 + i as u64,
        )?);
        if i == 0 {
            let c = g.verify_relative_convexity(200)?;
            checks.push(Check::at_least(
                "geometry",
                "relative convexity min eigenvalue",
                c.min_eig,
                g.kappa,
            ));
        }
    }
    if geom.dim == 3 {
        checks.extend(pushforward_checks(scn, &pushforward_sweep(scn, &epsilons)?));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_radii_halve() {
        let r = dyadic_radii(1e-2f64.sqrt(), 0.3, 4);
        assert!((r[0] - 0.1f64.powf(0.7)).abs() < 1e-15);
        assert!(r.windows(2).all(|w| (w[1] / w[0] - 0.5).abs() < 1e-15));
    }

    #[test]
    fn pointwise_spread_is_one_for_exact_power_laws() {
        let beta = 0.2;
        let rows: Vec<_> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e: &f64| {
                let pts = [0.0, 0.1, 0.2]
                    .iter()
                    .map(|&x: &f64| PointSample {
                        xp: vec![x, 0.0],
                        column_max: 3.0 * (e + x * x).powf(beta - 0.5),
                    })
                    .collect();
                (e, 2.0, pts)
            })
            .collect();
        assert!((pointwise_spread(&rows, beta) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn layer_checks_use_smallest_and_largest_counts() {
        let row = |l, seed, g, y| LayerRow {
            l,
            seed,
            grad_ratio: g,
            y_norm_ratio: y,
            iterations: 0,
        };
        let rows = vec![
            row(2, 1, 1.0, 1.0),
            row(8, 1, 1.1, 2.0),
            row(64, 1, 1.4, 2.5),
            row(2, 2, 1.0, 1.0),
            row(8, 2, 1.0, 2.0),
            row(64, 2, 1.6, 2.5),
        ];
        let c = layer_checks(&rows, 1.5, 0.3);
        assert_eq!(c.len(), 3);
        assert!(c[0].passed && !c[1].passed);
        assert!((c[2].measured - 0.25).abs() < 1e-12 && c[2].passed);
    }
}
