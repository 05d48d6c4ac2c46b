//! Finite-volume discretization of `−div(b ∇w) = 0` on a flattened slab.
//!
//! Unknowns sit at the nodes of a [`TensorGrid`]. The coefficient is sampled
//! once per cell and the discrete energy of a cell is
//!
//! ```text
//! Σ_a  Σ_{edges e ∥ a}  V / (2^{n−1} Δ_a²) · b^{aa} · (w_e⁺ − w_e⁻)²
//! + Σ_{a<c} Σ_{planes}  V / 2^{n−2} · 2 b^{ac} · g_a g_c
//! ```
//!
//! where `g_a` is the average difference quotient along `a` inside one
//! coordinate plane of the cell. Mixed terms couple only nodes sharing such a
//! plane, so the 3D stencil has 19 points. Zero-flux faces need nothing;
//! Dirichlet rows become identity rows with the columns eliminated.

mod assemble;
mod boundary;
mod grid;

pub use assemble::{assemble, LinearSystem};
pub use boundary::{
    dirichlet_from_fn, dirichlet_trace, BoundaryData, BoundaryFaces, FaceCondition,
};
pub use grid::{build_graded_grid, graded_axis, uniform_axis, GridSpec, TensorGrid};

use thiserror::Error;

use crate::linalg::{Mat, MAX_DIM};
use crate::transform::TransformError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("grid: {0}")]
    Grid(String),
    #[error("grading rule needs {required} lateral cells but only {available} were allowed")]
    GridBudget { required: usize, available: usize },
    #[error(
        "coefficient is not positive definite at {location:?} (smallest eigenvalue {min_eig:e})"
    )]
    NonSpd { location: Vec<f64>, min_eig: f64 },
    #[error("boundary data: {0}")]
    Boundary(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Nodal values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub grid: TensorGrid,
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(grid: TensorGrid, values: Vec<f64>) -> Self {
        assert_eq!(grid.node_count(), values.len());
        Self { grid, values }
    }
}

/// Number of cells and the cell strides (vertical fastest).
pub fn cell_layout(grid: &TensorGrid) -> (usize, [usize; MAX_DIM]) {
    let n = grid.dim();
    let mut strides = [0; MAX_DIM];
    strides[n - 1] = 1;
    for a in (0..n - 1).rev() {
        strides[a] = strides[a + 1] * (grid.len(a + 1) - 1);
    }
    let count = (0..n).map(|a| grid.len(a) - 1).product();
    (count, strides)
}

/// Centre and bounding box of cell `c`.
pub fn cell_box(grid: &TensorGrid, c: usize) -> ([f64; MAX_DIM], [f64; MAX_DIM], [f64; MAX_DIM]) {
    let (_, strides) = cell_layout(grid);
    let mut rem = c;
    let (mut lo, mut hi, mut mid) = ([0.0; MAX_DIM], [0.0; MAX_DIM], [0.0; MAX_DIM]);
    for a in 0..grid.dim() {
        let i = rem / strides[a];
        rem %= strides[a];
        lo[a] = grid.axis(a)[i];
        hi[a] = grid.axis(a)[i + 1];
        mid[a] = 0.5 * (lo[a] + hi[a]);
    }
    (mid, lo, hi)
}

/// How a coefficient is reduced to one matrix per cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellSampling {
    /// Value at the cell centre.
    Center,
    /// `k` samples across the cell height; harmonic mean for the normal-normal
    /// entry and arithmetic mean elsewhere. Suited to coefficients that jump
    /// across horizontal interfaces.
    VerticalAverage(usize),
}

/// Samples `coefficient` on every cell and checks positive definiteness.
pub fn evaluate_coefficients<F>(
    grid: &TensorGrid,
    sampling: CellSampling,
    parallel: bool,
    coefficient: F,
) -> Result<Vec<Mat>, DiscretizeError>
where
    F: Fn(&[f64]) -> Result<Mat, TransformError> + Sync,
{
    use rayon::prelude::*;
    let n = grid.dim();
    let (count, _) = cell_layout(grid);
    let eval = |c: usize| -> Result<Mat, DiscretizeError> {
        let (mid, lo, hi) = cell_box(grid, c);
        let b = match sampling {
            CellSampling::Center => coefficient(&mid[..n])?,
            CellSampling::VerticalAverage(k) => {
                let k = k.max(1);
                let mut sum = Mat::zeros(n);
                let mut inv_nn = 0.0;
                let mut x = mid;
                for s in 0..k {
                    x[n - 1] = lo[n - 1] + (hi[n - 1] - lo[n - 1]) * (s as f64 + 0.5) / k as f64;
                    let b = coefficient(&x[..n])?;
                    inv_nn += 1.0 / b.get(n - 1, n - 1);
                    sum = sum.add(&b);
                }
                let mut avg = sum.scale(1.0 / k as f64);
                avg.set(n - 1, n - 1, k as f64 / inv_nn);
                avg
            }
        };
        let min_eig = b.min_eigenvalue();
        if !(min_eig > 0.0) {
            return Err(DiscretizeError::NonSpd {
                location: mid[..n].to_vec(),
                min_eig,
            });
        }
        Ok(b)
    };
    if parallel {
        (0..count).into_par_iter().map(eval).collect()
    } else {
        (0..count).map(eval).collect()
    }
}
