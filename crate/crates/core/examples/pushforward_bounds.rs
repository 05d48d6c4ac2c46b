//! Spectrum and Hölder quotient of the pushed-forward coefficient on the
//! unit-scale cylinder, across separations.

use gapfield::analyze::pushforward_stats;
use gapfield::geometry::GapGeometry;
use gapfield::transform::CoefficientField;

pub fn run_example() -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let a = CoefficientField::smooth_perturbation(3, 0.2, vec![2.0, -1.0, 1.0], 0.5)?;
    let mut out = Vec::new();
    for (name, q) in [
        ("iso", vec![1.0, 0.0, 0.0, 1.0]),
        ("aniso", vec![1.0, 0.0, 0.0, 4.0]),
    ] {
        for eps in [4e-2, 1e-2, 2.5e-3] {
            let g = GapGeometry::quadratic(3, q.clone(), eps, 0.9, 1.5)?;
            let s = pushforward_stats(&g, &a, &[0.0, 0.0], 16, 8, a.alpha, 4000, 1)?;
            out.push(format!(
                "{name:<5} eps {eps:<7} eig [{:.4}, {:.4}]  holder {:.3}  ({} nodes)",
                s.min_eig, s.max_eig, s.holder, s.nodes
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
