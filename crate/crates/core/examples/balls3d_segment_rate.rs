//! Gradient on the vertical segment at x' = 0 between two unit balls.
//!
//! Usage: `balls3d_segment_rate [lateral_cells vertical_cells]`; the default
//! 64 x 16 grid takes a few seconds, the scenario's 128 x 32 about half a minute.

use std::path::Path;

use gapfield::cli::{run_sweep, RunOptions, Scenario};

pub fn run_example(
    lateral: usize,
    vertical: usize,
) -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let mut scn =
        Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/balls3d.cfg"))?;
    scn.numerics.lateral_cells = lateral;
    scn.numerics.vertical_cells = vertical;
    // coarser grids need a looser grading rule to fit the cell budget
    scn.numerics.c_grade *= 128.0 / lateral as f64;
    let out = run_sweep(&scn, &RunOptions::default())?;
    let fit = out.fit?;
    let mut lines: Vec<String> = out
        .rows
        .iter()
        .map(|r| {
            format!(
                "eps {:<8} segment {:.4}  global {:.4}  {:.1} s",
                r.epsilon, r.max_grad_segment, r.max_grad_global, r.wall_time_s
            )
        })
        .collect();
    lines.push(format!(
        "segment slope {:.4} +- {:.4}, exact ball rate {:.4}",
        fit.fit.slope,
        fit.fit.stderr,
        (2f64.sqrt() - 2.0) / 2.0
    ));
    Ok(lines)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let (lat, vert) = match args[..] {
        [l, v] => (l, v),
        _ => (64, 16),
    };
    for l in run_example(lat, vert)? {
        println!("{l}");
    }
    Ok(())
}
