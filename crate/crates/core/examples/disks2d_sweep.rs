//! Blow-up rate between two unit disks, read from the shipped scenario.

use std::path::Path;

use gapfield::cli::{run_sweep, RunOptions, Scenario};

pub fn run_example() -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let scn = Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/disks2d.cfg"))?;
    let out = run_sweep(&scn, &RunOptions::default())?;
    let fit = out.fit?;
    let mut lines: Vec<String> = out
        .rows
        .iter()
        .map(|r| {
            format!(
                "eps {:<8} max |grad u| {:.4}  cg {}",
                r.epsilon, r.max_grad_global, r.cg_iters
            )
        })
        .collect();
    lines.push(format!(
        "slope {:.4} +- {:.4} (r2 {:.5})",
        fit.fit.slope, fit.fit.stderr, fit.fit.r_squared
    ));
    Ok(lines)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for l in run_example()? {
        println!("{l}");
    }
    Ok(())
}
