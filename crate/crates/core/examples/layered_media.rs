//! Gradient bounds in randomly layered media do not grow with the layer count.

use gapfield::analyze::{layer_y_norm, max_layer_holder, LayerFamily, LayeredExperiment};
use gapfield::discretize::BoundaryData;
use gapfield::solve::SolverConfig;

pub fn run_example() -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let family = LayerFamily {
        dim: 2,
        amplitude: 0.3,
        wavenumber: 3.0,
        jitter: 0.6,
    };
    let exp = LayeredExperiment {
        lateral_cells: 32,
        vertical_cells: 128,
        vertical_samples: 8,
        boundary: BoundaryData::Linear {
            direction: vec![1.0, 1.0],
        },
        solver: SolverConfig::default(),
    };
    let mut out = Vec::new();
    for l in [1, 4, 16, 64] {
        let a = family.sample(l, 7);
        let r = exp.run(&a)?;
        let y = layer_y_norm(&a, 0.5, 32)? / max_layer_holder(&a, 0.5, 2000, 7);
        out.push(format!(
            "l {l:>2}  grad ratio {:.4}  y-norm ratio {:.4}  cg {}",
            r.grad_ratio, y, r.iterations
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
