//! Global, local, and annulus flattening of the gap between two unit balls.

use gapfield::geometry::GapGeometry;
use gapfield::transform::{pushforward_coefficients, CoefficientField, CoordinateMap, FlattenMap};

pub fn run_example() -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let g = GapGeometry::balls(3, 1.0, 1e-2, 0.9, 1.0)?;
    let a = CoefficientField::identity(3);
    let maps = [
        FlattenMap::global(g.clone()),
        FlattenMap::local(g.clone(), &[0.05, 0.0])?,
        FlattenMap::annulus(g.clone(), &[0.0, 0.0], 0.2)?,
    ];
    let x = [0.06, 0.01, 0.3 * g.top(&[0.06, 0.01])];
    let mut out = Vec::new();
    for m in &maps {
        let z = m.forward(&x)?;
        let back = m.inverse(&z)?;
        let b = pushforward_coefficients(&a, m, &z)?;
        let ev = b.sym_eigenvalues();
        out.push(format!(
            "{:<48} z = [{:+.4}, {:+.4}, {:+.4}]  round trip {:.1e}  eig(b) = [{:.3e}, {:.3e}]",
            m.describe(),
            z[0],
            z[1],
            z[2],
            (0..3).map(|i| (back[i] - x[i]).abs()).fold(0.0, f64::max),
            ev[0],
            ev[2]
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
