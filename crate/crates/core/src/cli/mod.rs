//! Scenario files, experiment runners, and CSV output behind the `gapfield`
//! command line.

pub mod config;
pub mod output;
pub mod runners;

use std::path::PathBuf;

use thiserror::Error;

use crate::analyze::{AnalyzeError, Check};
use crate::geometry::GeometryError;
use crate::problem::ProblemError;
use crate::transform::{InjectedFault, TransformError};

pub use config::{ConfigError, Scenario, SweepMetric};
pub use output::{read_table, Table};
pub use runners::*;

use output::{column, num, num_list, parse_f64};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Earlier results needed by `fit` or `report` are missing or malformed.
    #[error("input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Numerical(_) | CliError::Output(_) => 3,
        }
    }

    pub(crate) fn csv(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

macro_rules! numerical_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Numerical(e.to_string())
            }
        }
    )*};
}
numerical_from!(ProblemError, AnalyzeError, TransformError, GeometryError);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Solve,
    Sweep,
    Harnack,
    Layers,
    Fit,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Harnack => "harnack",
            Command::Layers => "layers",
            Command::Fit => "fit",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    pub parallel: bool,
    /// Write grid and matrix dumps under `out/dump`.
    pub debug_dump: bool,
    pub fault: Option<InjectedFault>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            parallel: true,
            debug_dump: false,
            fault: None,
        }
    }
}

/// What a command produced: progress lines for the terminal and the checks it evaluated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every check passed, 4 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            4
        }
    }
}

fn header(table: &mut Table, cmd: Command, scn: &Scenario) {
    table.comment(format!("gapfield {} scenario={}", cmd.name(), scn.id));
}

fn check_table(cmd: Command, scn: &Scenario, checks: &[Check]) -> Table {
    let mut t = Table::new(&["module", "property", "measured", "expected", "passed"]);
    header(&mut t, cmd, scn);
    for c in checks {
        t.push(vec![
            c.module.into(),
            c.property.clone(),
            num(c.measured),
            c.expected.clone(),
            c.passed.to_string(),
        ]);
    }
    t
}

fn check_lines(checks: &[Check]) -> Vec<String> {
    checks
        .iter()
        .map(|c| {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            format!(
                "{tag} [{}] {}: {} (expected {})",
                c.module,
                c.property,
                num(c.measured),
                c.expected
            )
        })
        .collect()
}

/// Runs one subcommand and writes its CSV files into `opts.out`.
pub fn run(cmd: Command, scn: &Scenario, opts: &RunOptions) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(&opts.out)
        .map_err(|e| CliError::Output(format!("{}: {e}", opts.out.display())))?;
    match cmd {
        Command::Validate => {
            let checks = run_validate(scn, opts)?;
            check_table(cmd, scn, &checks).write(&opts.out.join("validate.csv"))?;
            Ok(Outcome {
                lines: check_lines(&checks),
                checks,
            })
        }
        Command::Solve => run_solve(scn, opts),
        Command::Sweep => sweep_command(scn, opts),
        Command::Harnack => harnack_command(scn, opts),
        Command::Layers => layers_command(scn, opts),
        Command::Fit => fit_command(scn, opts),
        Command::Report => report_command(scn, opts),
    }
}

fn run_solve(scn: &Scenario, opts: &RunOptions) -> Result<Outcome, CliError> {
    let eps = scn.single_epsilon()?;
    let s = solve_at(scn, eps, opts)?;
    let n = s.u.grid.dim();
    let mut t = Table::new(&[
        "epsilon",
        "delta0",
        "max_grad_global",
        "max_grad_segment",
        "u_sup",
        "cg_iters",
        "final_residual",
        "wall_time_s",
    ]);
    header(&mut t, Command::Solve, scn);
    t.comment(format!("map = {}", s.solution.map.describe()));
    t.comment(format!(
        "nodes = {} preconditioner = {}",
        s.u.grid.node_count(),
        s.solution.report.preconditioner
    ));
    let row = vec![
        num(eps),
        num(eps.sqrt()),
        num(s.grad.max_in_disk(scn.numerics.r0, 2)),
        num(s.grad.segment_max(&vec![0.0; n - 1])),
        num(s.u.sup_norm()),
        s.solution.report.iterations.to_string(),
        num(s.solution.report.final_relative_residual),
        format!("{:.3}", s.wall_time_s),
    ];
    let line = format!("eps={} iters={} max|grad u|={}", row[0], row[5], row[2]);
    t.push(row);
    t.write(&opts.out.join("solve.csv"))?;
    Ok(Outcome {
        lines: vec![line],
        checks: Vec::new(),
    })
}

fn fit_table(scn: &Scenario, fit: &SweepFit) -> Table {
    let mut t = Table::new(&[
        "scenario_id",
        "slope",
        "stderr",
        "r_squared",
        "sigma_hat",
        "beta_hat",
    ]);
    header(&mut t, Command::Fit, scn);
    t.push(vec![
        fit.scenario_id.clone(),
        num(fit.fit.slope),
        num(fit.fit.stderr),
        num(fit.fit.r_squared),
        num(fit.sigma_hat),
        num(fit.beta_hat),
    ]);
    t
}

fn fit_line(fit: &SweepFit) -> String {
    format!(
        "slope={} stderr={} r2={} sigma_hat={} beta_hat={}",
        num(fit.fit.slope),
        num(fit.fit.stderr),
        num(fit.fit.r_squared),
        num(fit.sigma_hat),
        num(fit.beta_hat)
    )
}

fn sweep_command(scn: &Scenario, opts: &RunOptions) -> Result<Outcome, CliError> {
    let spec = scn.sweep_spec()?;
    let out = run_sweep(scn, opts)?;
    let mut t = Table::new(&[
        "epsilon",
        "delta0",
        "max_grad_global",
        "max_grad_segment",
        "osc_r_list",
        "harnack_max_ratio",
        "cg_iters",
        "wall_time_s",
    ]);
    header(&mut t, Command::Sweep, scn);
    t.comment(format!(
        "metric = {} r0 = {} gamma = {} osc radii = delta0^(1-gamma) 2^-k, k < {}",
        if spec.metric == SweepMetric::Global {
            "global"
        } else {
            "segment"
        },
        num(scn.numerics.r0),
        num(scn.numerics.gamma),
        scn.numerics.osc_levels
    ));
    for (eps, why) in &out.skipped {
        t.comment(format!("skipped epsilon {}: {why}", num(*eps)));
    }
    let mut pw = Table::new(&[
        "epsilon",
        "sample",
        "x_lateral",
        "radius",
        "column_max",
        "u_sup",
    ]);
    header(&mut pw, Command::Sweep, scn);
    let mut lines = Vec::new();
    for r in &out.rows {
        t.push(vec![
            num(r.epsilon),
            num(r.delta0),
            num(r.max_grad_global),
            num(r.max_grad_segment),
            num_list(&r.osc),
            num(r.harnack_max_ratio),
            r.cg_iters.to_string(),
            format!("{:.3}", r.wall_time_s),
        ]);
        for (i, p) in r.pointwise.iter().enumerate() {
            pw.push(vec![
                num(r.epsilon),
                i.to_string(),
                num_list(&p.xp),
                num(p.radius()),
                num(p.column_max),
                num(r.u_sup),
            ]);
        }
        lines.push(format!(
            "eps={} global={} segment={} iters={} ({:.1} s)",
            num(r.epsilon),
            num(r.max_grad_global),
            num(r.max_grad_segment),
            r.cg_iters,
            r.wall_time_s
        ));
    }
    t.write(&opts.out.join("sweep.csv"))?;
    pw.write(&opts.out.join("pointwise.csv"))?;
    for (eps, why) in &out.skipped {
        eprintln!("skipped eps={}: {why}", num(*eps));
    }
    let fit = out.fit?;
    fit_table(scn, &fit).write(&opts.out.join("fit.csv"))?;
    lines.push(fit_line(&fit));
    Ok(Outcome {
        lines,
        checks: Vec::new(),
    })
}

fn harnack_command(scn: &Scenario, opts: &RunOptions) -> Result<Outcome, CliError> {
    let res = run_harnack(scn, opts)?;
    let mut t = Table::new(&["epsilon", "k", "r", "osc", "ratio_above", "ratio_below"]);
    header(&mut t, Command::Harnack, scn);
    let mut s = Table::new(&[
        "epsilon",
        "delta",
        "sigma_hat",
        "r_squared",
        "max_ratio",
        "sigma_from_max_ratio",
    ]);
    header(&mut s, Command::Harnack, scn);
    let mut lines = Vec::new();
    for h in &res {
        if h.warning {
            lines.push(format!(
                "warning: eps={} is a two-dimensional scenario; the Harnack bound is not expected",
                num(h.epsilon)
            ));
        }
        for (k, d) in h.diagnostics.iter().enumerate() {
            let mut cell = |r: &Result<f64, String>| match r {
                Ok(v) => num(*v),
                Err(e) => {
                    lines.push(format!("eps={} r={}: {e}", num(h.epsilon), num(d.r)));
                    "nan".to_string()
                }
            };
            let (a, b) = (cell(&d.above), cell(&d.below));
            t.push(vec![
                num(h.epsilon),
                k.to_string(),
                num(d.r),
                num(d.osc),
                a,
                b,
            ]);
        }
        let (sigma, r2) = match &h.sigma {
            Ok((s, r2)) => (*s, *r2),
            Err(e) => {
                lines.push(format!(
                    "eps={}: decay rate undefined ({e})",
                    num(h.epsilon)
                ));
                (f64::NAN, f64::NAN)
            }
        };
        s.push(vec![
            num(h.epsilon),
            num(h.delta),
            num(sigma),
            num(r2),
            num(h.max_ratio),
            num(crate::analyze::sigma_from_harnack(h.max_ratio)),
        ]);
        lines.push(format!(
            "eps={} max_ratio={} sigma_hat={}",
            num(h.epsilon),
            num(h.max_ratio),
            num(sigma)
        ));
    }
    t.write(&opts.out.join("harnack.csv"))?;
    s.write(&opts.out.join("harnack_fit.csv"))?;
    Ok(Outcome {
        lines,
        checks: Vec::new(),
    })
}

fn layers_command(scn: &Scenario, opts: &RunOptions) -> Result<Outcome, CliError> {
    let spec = scn.layers_spec()?;
    let rows = run_layers(scn, opts)?;
    let mut t = Table::new(&["l", "seed", "grad_ratio", "y_norm_ratio"]);
    header(&mut t, Command::Layers, scn);
    t.comment(format!(
        "dim = {} mu = {} amplitude = {} grid = {}^{} x {}",
        spec.dim,
        num(spec.mu),
        num(spec.amplitude),
        spec.lateral_cells,
        spec.dim - 1,
        spec.vertical_cells
    ));
    for r in &rows {
        t.push(vec![
            r.l.to_string(),
            r.seed.to_string(),
            num(r.grad_ratio),
            num(r.y_norm_ratio),
        ]);
    }
    t.write(&opts.out.join("layers.csv"))?;
    let checks = layer_checks(&rows, spec.max_growth, spec.max_y_increase);
    Ok(Outcome {
        lines: check_lines(&checks),
        checks,
    })
}

/// Rows of a previously written `sweep.csv`.
fn read_sweep(
    scn: &Scenario,
    opts: &RunOptions,
) -> Result<(Vec<f64>, Vec<f64>, Vec<(Vec<f64>, Vec<f64>)>), CliError> {
    let spec = scn.sweep_spec()?;
    let (cols, rows) = read_table(&opts.out.join("sweep.csv"))?;
    let eps = column(&cols, &rows, "epsilon")?
        .into_iter()
        .map(parse_f64)
        .collect::<Result<Vec<_>, _>>()?;
    let name = if spec.metric == SweepMetric::Global {
        "max_grad_global"
    } else {
        "max_grad_segment"
    };
    let metric = column(&cols, &rows, name)?
        .into_iter()
        .map(parse_f64)
        .collect::<Result<Vec<_>, _>>()?;
    let mut osc = Vec::new();
    for (e, list) in eps.iter().zip(column(&cols, &rows, "osc_r_list")?) {
        let o = list
            .split(';')
            .map(parse_f64)
            .collect::<Result<Vec<_>, _>>()?;
        osc.push((dyadic_radii(e.sqrt(), scn.numerics.gamma, o.len()), o));
    }
    Ok((eps, metric, osc))
}

fn fit_command(scn: &Scenario, opts: &RunOptions) -> Result<Outcome, CliError> {
    let (eps, metric, osc) = read_sweep(scn, opts)?;
    let fit = fit_sweep(&scn.id, &eps, &metric, &osc)?;
    fit_table(scn, &fit).write(&opts.out.join("fit.csv"))?;
    Ok(Outcome {
        lines: vec![fit_line(&fit)],
        checks: Vec::new(),
    })
}

fn read_f64_column(path: &std::path::Path, name: &str) -> Result<Vec<f64>, CliError> {
    let (cols, rows) = read_table(path)?;
    column(&cols, &rows, name)?
        .into_iter()
        .map(parse_f64)
        .collect()
}

/// Checks every threshold the scenario sets against the results present in `out`.
pub fn report_checks(scn: &Scenario, opts: &RunOptions) -> Result<Vec<Check>, CliError> {
    let rep = &scn.report;
    let out = &opts.out;
    let mut checks = Vec::new();
    let fit_path = out.join("fit.csv");
    if fit_path.exists() {
        let slope = read_f64_column(&fit_path, "slope")?[0];
        let r2 = read_f64_column(&fit_path, "r_squared")?[0];
        let beta = read_f64_column(&fit_path, "beta_hat")?[0];
        if let (Some(t), Some(tol)) = (rep.slope_target, rep.slope_tolerance) {
            checks.push(Check::within(
                "analyze",
                "fitted slope",
                slope,
                t - tol,
                t + tol,
            ));
        }
        if let Some(m) = rep.min_r_squared {
            checks.push(Check::at_least("analyze", "fit r^2", r2, m));
        }
        if let Some(f) = rep.slope_floor {
            checks.push(Check::at_least("analyze", "fitted slope floor", slope, f));
        }
        if let Some(limit) = rep.pointwise_spread {
            let p = out.join("pointwise.csv");
            let (cols, rows) = read_table(&p)?;
            let eps = column(&cols, &rows, "epsilon")?;
            let xs = column(&cols, &rows, "x_lateral")?;
            let cm = column(&cols, &rows, "column_max")?;
            let us = column(&cols, &rows, "u_sup")?;
            let mut grouped: Vec<(f64, f64, Vec<PointSample>)> = Vec::new();
            for i in 0..rows.len() {
                let e = parse_f64(eps[i])?;
                let sample = PointSample {
                    xp: xs[i].split(';').map(parse_f64).collect::<Result<_, _>>()?,
                    column_max: parse_f64(cm[i])?,
                };
                match grouped.last_mut() {
                    Some(g) if g.0 == e => g.2.push(sample),
                    _ => grouped.push((e, parse_f64(us[i])?, vec![sample])),
                }
            }
            checks.push(Check::at_most(
                "analyze",
                "pointwise normalized gradient spread",
                pointwise_spread(&grouped, beta),
                limit,
            ));
        }
    }
    let hpath = out.join("harnack_fit.csv");
    if hpath.exists() {
        if let (Some(rs), Some(sf), Some(ss)) =
            (rep.harnack_spread, rep.sigma_floor, rep.sigma_spread)
        {
            let eps = read_f64_column(&hpath, "epsilon")?;
            let ratio = read_f64_column(&hpath, "max_ratio")?;
            let sigma = read_f64_column(&hpath, "sigma_hat")?;
            let res: Vec<_> = (0..eps.len())
                .map(|i| (eps[i], ratio[i], sigma[i]))
                .collect();
            checks.extend(harnack_checks(&res, rs, sf, ss));
        }
    }
    let lpath = out.join("layers.csv");
    if let (true, Some(spec)) = (lpath.exists(), &scn.layers) {
        let l = read_f64_column(&lpath, "l")?;
        let seed = read_f64_column(&lpath, "seed")?;
        let g = read_f64_column(&lpath, "grad_ratio")?;
        let y = read_f64_column(&lpath, "y_norm_ratio")?;
        let rows: Vec<LayerRow> = (0..l.len())
            .map(|i| LayerRow {
                l: l[i] as usize,
                seed: seed[i] as u64,
                grad_ratio: g[i],
                y_norm_ratio: y[i],
                iterations: 0,
            })
            .collect();
        checks.extend(layer_checks(&rows, spec.max_growth, spec.max_y_increase));
    }
    if checks.is_empty() {
        return Err(CliError::Input(format!(
            "no results with configured thresholds in {}",
            out.display()
        )));
    }
    Ok(checks)
}

fn report_command(scn: &Scenario, opts: &RunOptions) -> Result<Outcome, CliError> {
    let checks = report_checks(scn, opts)?;
    check_table(Command::Report, scn, &checks).write(&opts.out.join("report.csv"))?;
    Ok(Outcome {
        lines: check_lines(&checks),
        checks,
    })
}
