//! CG iteration counts on a thin-gap system for each preconditioner.

use gapfield::discretize::{BoundaryData, GridSpec};
use gapfield::geometry::GapGeometry;
use gapfield::problem::GapProblem;
use gapfield::solve::{cg_solve, PreconditionerKind, SolverConfig};
use gapfield::transform::CoefficientField;

pub fn run_example() -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let p = GapProblem {
        geometry: GapGeometry::balls(2, 1.0, 1e-3, 0.9, 1.0)?,
        coefficient: CoefficientField::identity(2),
        boundary: BoundaryData::Linear {
            direction: vec![1.0, 0.0],
        },
        grid: GridSpec {
            lateral_extent: 0.899,
            lateral_cells: 256,
            vertical_cells: 16,
            c_grade: 0.5,
            half_height: 1.0,
        },
        solver: SolverConfig::default(),
        fault: None,
    };
    let (_, _, sys) = p.discretize()?;
    let mut out = vec![format!("{} unknowns, {} nonzeros", sys.size(), sys.nnz())];
    for kind in [
        PreconditionerKind::None,
        PreconditionerKind::Jacobi,
        PreconditionerKind::Ssor { omega: 1.2 },
        PreconditionerKind::Line,
        PreconditionerKind::TwoLevel,
    ] {
        let cfg = SolverConfig {
            preconditioner: kind,
            max_iter: 100_000,
            ..SolverConfig::default()
        };
        let (_, rep) = cg_solve(&sys, None, &cfg)?;
        out.push(format!(
            "{:<10} {:>6} iterations  residual {:.2e}",
            kind.name(),
            rep.iterations,
            rep.final_relative_residual
        ));
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for l in run_example()? {
        println!("{l}");
    }
    Ok(())
}
