//! Oscillation decay and Harnack ratios on dyadic radii around the axis.

use gapfield::analyze::{osc_decay_fit, sigma_from_harnack, PhysicalField};
use gapfield::cli::{dyadic_radii, radius_diagnostics};
use gapfield::discretize::{BoundaryData, GridSpec};
use gapfield::geometry::GapGeometry;
use gapfield::problem::GapProblem;
use gapfield::solve::SolverConfig;
use gapfield::transform::CoefficientField;

pub fn run_example() -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let eps = 1e-2;
    let p = GapProblem {
        geometry: GapGeometry::balls(3, 1.0, eps, 0.9, 1.0)?,
        coefficient: CoefficientField::identity(3),
        boundary: BoundaryData::Linear {
            direction: vec![1.0, 0.0, 0.0],
        },
        grid: GridSpec {
            lateral_extent: 0.999 * 0.9 / 2f64.sqrt(),
            lateral_cells: 48,
            vertical_cells: 12,
            c_grade: 0.2,
            half_height: 1.0,
        },
        solver: SolverConfig::default(),
        fault: None,
    };
    let sol = p.solve(None)?;
    let u = PhysicalField::new(&sol.field, &sol.map, true)?;
    let radii = dyadic_radii(eps.sqrt(), 0.3, 5);
    let diag = radius_diagnostics(&u, &[0.0, 0.0], &radii)?;
    let mut out = Vec::new();
    for d in &diag {
        out.push(format!(
            "r {:.4}  osc {:.4}  harnack {:.3} / {:.3}",
            d.r,
            d.osc,
            d.above.clone()?,
            d.below.clone()?
        ));
    }
    let osc: Vec<f64> = diag.iter().map(|d| d.osc).collect();
    let fit = osc_decay_fit(&radii, &osc)?;
    let c1 = diag
        .iter()
        .filter_map(|d| d.max_ratio())
        .fold(1.0, f64::max);
    out.push(format!(
        "sigma_hat {:.3} (r2 {:.3}); from C1 = {c1:.2}: {:.3}",
        fit.sigma,
        fit.r_squared,
        sigma_from_harnack(c1)
    ));
    Ok(out)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for l in run_example()? {
        println!("{l}");
    }
    Ok(())
}
