use std::io::{self, Write};
use std::path::Path;

use crate::geometry::GapGeometry;
use crate::linalg::MAX_DIM;

use super::DiscretizeError;

/// Tensor-product grid; the last axis is vertical and varies fastest in the
/// node numbering, so every vertical column occupies a contiguous index range.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    axes: Vec<Vec<f64>>,
    strides: [usize; MAX_DIM],
}

impl TensorGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self, DiscretizeError> {
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(DiscretizeError::Grid(format!(
                "unsupported axis count {}",
                axes.len()
            )));
        }
        for (a, ax) in axes.iter().enumerate() {
            if ax.len() < 2 || ax.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(DiscretizeError::Grid(format!(
                    "axis {a} is not strictly increasing"
                )));
            }
        }
        let mut strides = [0; MAX_DIM];
        let n = axes.len();
        strides[n - 1] = 1;
        for a in (0..n - 1).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].len();
        }
        Ok(Self { axes, strides })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self, a: usize) -> usize {
        self.axes[a].len()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn stride(&self, a: usize) -> usize {
        self.strides[a]
    }

    /// Number of nodes in one vertical column.
    pub fn column_len(&self) -> usize {
        self.axes[self.dim() - 1].len()
    }

    pub fn column_count(&self) -> usize {
        self.node_count() / self.column_len()
    }

    pub fn half_height(&self) -> f64 {
        *self.axes[self.dim() - 1].last().unwrap()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut p: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for a in 0..self.dim() {
            m[a] = p / self.strides[a];
            p %= self.strides[a];
        }
        m
    }

    pub fn coords(&self, p: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(p);
        let mut c = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            c[a] = self.axes[a][m[a]];
        }
        c
    }

    /// True when the node lies on a face orthogonal to a lateral axis.
    pub fn on_lateral_face(&self, p: usize) -> bool {
        let m = self.multi_index(p);
        (0..self.dim() - 1).any(|a| m[a] == 0 || m[a] + 1 == self.len(a))
    }

    pub fn on_vertical_face(&self, p: usize) -> bool {
        let m = self.multi_index(p);
        let k = self.dim() - 1;
        m[k] == 0 || m[k] + 1 == self.len(k)
    }

    /// Distance in cells from the nearest lateral face.
    pub fn lateral_depth(&self, p: usize) -> usize {
        let m = self.multi_index(p);
        (0..self.dim() - 1)
            .map(|a| m[a].min(self.len(a) - 1 - m[a]))
            .min()
            .unwrap_or(usize::MAX)
    }

    /// Dual-cell (control volume) measure of every node.
    pub fn dual_volumes(&self) -> Vec<f64> {
        let widths: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|ax| {
                (0..ax.len())
                    .map(|i| {
                        let lo = if i > 0 { ax[i] - ax[i - 1] } else { 0.0 };
                        let hi = if i + 1 < ax.len() {
                            ax[i + 1] - ax[i]
                        } else {
                            0.0
                        };
                        0.5 * (lo + hi)
                    })
                    .collect()
            })
            .collect();
        (0..self.node_count())
            .map(|p| {
                let m = self.multi_index(p);
                (0..self.dim()).map(|a| widths[a][m[a]]).product()
            })
            .collect()
    }

    /// Writes a text header followed by little-endian `f64` axis coordinates.
    pub fn dump(&self, path: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "gapfield-grid v1")?;
        writeln!(f, "dim {}", self.dim())?;
        let lens: Vec<String> = self.axes.iter().map(|a| a.len().to_string()).collect();
        writeln!(f, "lengths {}", lens.join(" "))?;
        writeln!(f, "---")?;
        for ax in &self.axes {
            for v in ax {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.flush()
    }
}

/// Resolution policy for the flattened gap.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Lateral axes span `[−lateral_extent, lateral_extent]`.
    pub lateral_extent: f64,
    pub lateral_cells: usize,
    pub vertical_cells: usize,
    /// Lateral spacing must satisfy `h(x) ≤ c_grade · sqrt(ε + x²)`.
    pub c_grade: f64,
    pub half_height: f64,
}

pub fn uniform_axis(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    (0..=cells)
        .map(|i| lo + (hi - lo) * i as f64 / cells as f64)
        .collect()
}

fn satisfies_grading(axis: &[f64], epsilon: f64, c_grade: f64) -> bool {
    axis.windows(2).all(|w| {
        let mid = 0.5 * (w[0] + w[1]);
        w[1] - w[0] <= c_grade * (epsilon + mid * mid).sqrt() * (1.0 + 1e-12)
    })
}

fn sinh_axis(epsilon: f64, extent: f64, half_cells: usize) -> Vec<f64> {
    let root = epsilon.sqrt();
    let s_max = (extent / root).asinh();
    let mut half: Vec<f64> = (0..=half_cells)
        .map(|k| root * (s_max * k as f64 / half_cells as f64).sinh())
        .collect();
    half[half_cells] = extent;
    let mut axis: Vec<f64> = half.iter().rev().map(|v| -v).collect();
    axis.extend_from_slice(&half[1..]);
    axis
}

/// Axis symmetric about zero, clustered at the origin on the scale `sqrt(ε)`.
///
/// A uniform axis is returned when it already meets the grading rule;
/// otherwise nodes follow `x = sqrt(ε) sinh(s)` with uniform `s`, which keeps
/// the spacing proportional to `sqrt(ε + x²)`.
pub fn graded_axis(
    epsilon: f64,
    extent: f64,
    cells: usize,
    c_grade: f64,
) -> Result<Vec<f64>, DiscretizeError> {
    if cells < 16 || cells % 2 != 0 {
        return Err(DiscretizeError::Grid(format!(
            "lateral cell count {cells} must be even and at least 16"
        )));
    }
    let uniform = uniform_axis(-extent, extent, cells);
    if satisfies_grading(&uniform, epsilon, c_grade) {
        return Ok(uniform);
    }
    let s_max = (extent / epsilon.sqrt()).asinh();
    let mut half = ((s_max / c_grade).ceil() as usize).max(1);
    while !satisfies_grading(&sinh_axis(epsilon, extent, half), epsilon, c_grade) {
        half += 1;
    }
    if 2 * half > cells {
        return Err(DiscretizeError::GridBudget {
            required: 2 * half,
            available: cells,
        });
    }
    Ok(sinh_axis(epsilon, extent, cells / 2))
}

/// Graded lateral axes and a uniform vertical axis on `[−H, H]`.
pub fn build_graded_grid(
    geom: &GapGeometry,
    spec: &GridSpec,
) -> Result<TensorGrid, DiscretizeError> {
    if spec.vertical_cells < 8 {
        return Err(DiscretizeError::Grid(format!(
            "need at least 8 vertical cells, got {}",
            spec.vertical_cells
        )));
    }
    if spec.lateral_extent * ((geom.dim - 1) as f64).sqrt() >= geom.r0_outer {
        return Err(DiscretizeError::Grid(format!(
            "lateral box of half width {} leaves the working disk of radius {}",
            spec.lateral_extent, geom.r0_outer
        )));
    }
    let lateral = graded_axis(
        geom.epsilon,
        spec.lateral_extent,
        spec.lateral_cells,
        spec.c_grade,
    )?;
    let mut axes = vec![lateral; geom.dim - 1];
    axes.push(uniform_axis(
        -spec.half_height,
        spec.half_height,
        spec.vertical_cells,
    ));
    TensorGrid::new(axes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn large_epsilon_gives_uniform_axis() {
        let ax = graded_axis(1.0, 0.5, 32, 0.5).unwrap();
        assert_eq!(ax, uniform_axis(-0.5, 0.5, 32));
    }

    #[test]
    fn small_epsilon_clusters_nodes_geometrically() {
        // ε = 1e−4, c = 0.5, extent 0.5: the minimal admissible grid
        let err = graded_axis(1e-4, 0.5, 16, 0.5).unwrap_err();
        let required = match err {
            DiscretizeError::GridBudget { required, .. } => required,
            e => panic!("{e}"),
        };
        let ax = graded_axis(1e-4, 0.5, required, 0.5).unwrap();
        let mid = required / 2;
        let finest = ax[mid + 1] - ax[mid];
        // sqrt(ε) · sinh(asinh(50) / (required/2)) ≈ c · sqrt(ε)
        assert!(finest > 4e-3 && finest <= 5e-3, "finest spacing {finest}");
        let h: Vec<f64> = ax.windows(2).map(|w| w[1] - w[0]).collect();
        let r1 = h[mid + 4] / h[mid + 3];
        let r2 = h[mid + 6] / h[mid + 5];
        assert!(r1 > 1.2 && (r1 - r2).abs() < 0.05, "growth {r1} {r2}");
        assert_eq!(ax[0], -0.5);
        assert_eq!(*ax.last().unwrap(), 0.5);
        assert!(ax.windows(2).all(|w| w[0] < w[1]));
        for (a, b) in ax.iter().zip(ax.iter().rev()) {
            assert_relative_eq!(*a, -*b, epsilon = 1e-15);
        }
    }

    #[test]
    fn budget_error_reports_requirement() {
        match graded_axis(1e-6, 0.5, 16, 0.05) {
            Err(DiscretizeError::GridBudget {
                required,
                available,
            }) => {
                assert_eq!(available, 16);
                assert!(required > 16);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn node_numbering_is_column_major_in_the_vertical() {
        let g = TensorGrid::new(vec![
            uniform_axis(-1.0, 1.0, 4),
            uniform_axis(-1.0, 1.0, 2),
            uniform_axis(0.0, 1.0, 3),
        ])
        .unwrap();
        assert_eq!(g.node_count(), 5 * 3 * 4);
        assert_eq!(g.column_len(), 4);
        let p = g.index(&[2, 1, 3]);
        assert_eq!(g.multi_index(p)[..3], [2, 1, 3]);
        assert_eq!(g.coords(p)[..3], [0.0, 0.0, 1.0]);
        assert_eq!(g.index(&[2, 1, 2]) + 1, p);
        let total: f64 = g.dual_volumes().iter().sum();
        assert_relative_eq!(total, 2.0 * 2.0 * 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gap_grid_spans_the_slab() {
        let geom = GapGeometry::balls(3, 1.0, 1e-3, 0.9, 1.0).unwrap();
        let spec = GridSpec {
            lateral_extent: 0.6,
            lateral_cells: 64,
            vertical_cells: 8,
            c_grade: 0.15,
            half_height: 1.0,
        };
        let g = build_graded_grid(&geom, &spec).unwrap();
        assert_eq!(g.dim(), 3);
        assert_eq!(g.axis(2)[0], -1.0);
        assert_eq!(*g.axis(2).last().unwrap(), 1.0);
        assert_eq!(g.axis(0)[0], -0.6);
        assert!(satisfies_grading(g.axis(0), 1e-3, 0.15));
    }
}
