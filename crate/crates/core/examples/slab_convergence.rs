//! Manufactured harmonic solution on the flat slab: second-order convergence.

use gapfield::analyze::slab_refinement;
use gapfield::solve::{PreconditionerKind, SolverConfig};

pub fn run_example() -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let solver = SolverConfig {
        tol: 1e-12,
        max_iter: 20_000,
        preconditioner: PreconditionerKind::TwoLevel,
        parallel: true,
    };
    let mut out = Vec::new();
    for dim in [2, 3] {
        let s = slab_refinement(dim, &[8, 16, 32, 64], &solver)?;
        let ratios = s.ratios();
        for (i, (m, e)) in s.lateral_cells.iter().zip(&s.errors).enumerate() {
            let r = if i > 0 {
                format!("{:.3}", ratios[i - 1])
            } else {
                "-".into()
            };
            out.push(format!(
                "{dim}D cells {m:>3}  max error {e:.3e}  ratio {r}  iters {}",
                s.iterations[i]
            ));
        }
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for l in run_example()? {
        println!("{l}");
    }
    Ok(())
}
