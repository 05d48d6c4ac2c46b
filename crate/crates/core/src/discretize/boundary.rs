use crate::transform::CoordinateMap;

use super::{DiscretizeError, TensorGrid};

/// Boundary data prescribed on the lateral part of the domain, as a function
/// of the physical point.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    /// `φ(x) = d · x`.
    Linear { direction: Vec<f64> },
    /// `φ(x) = c + l · x + xᵀ Q x` with `tr Q = 0`.
    HarmonicPolynomial {
        constant: f64,
        linear: Vec<f64>,
        quadratic: Vec<f64>,
    },
}

impl BoundaryData {
    pub fn validate(&self, dim: usize) -> Result<(), DiscretizeError> {
        match self {
            Self::Linear { direction } => {
                if direction.len() != dim {
                    return Err(DiscretizeError::Boundary(format!(
                        "direction has {} components, expected {dim}",
                        direction.len()
                    )));
                }
            }
            Self::HarmonicPolynomial {
                linear, quadratic, ..
            } => {
                if linear.len() != dim || quadratic.len() != dim * dim {
                    return Err(DiscretizeError::Boundary(
                        "polynomial coefficient sizes do not match the dimension".into(),
                    ));
                }
                let trace: f64 = (0..dim).map(|i| quadratic[i * dim + i]).sum();
                let scale = quadratic
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
                    .max(1.0);
                if trace.abs() > 1e-12 * scale {
                    return Err(DiscretizeError::Boundary(format!(
                        "quadratic part has trace {trace:e}, so it is not harmonic"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            Self::Linear { direction } => direction.iter().zip(x).map(|(d, v)| d * v).sum(),
            Self::HarmonicPolynomial {
                constant,
                linear,
                quadratic,
            } => {
                let n = x.len();
                let mut v = *constant;
                for i in 0..n {
                    v += linear[i] * x[i];
                    for j in 0..n {
                        v += quadratic[i * n + j] * x[i] * x[j];
                    }
                }
                v
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceCondition {
    Dirichlet,
    ZeroFlux,
}

/// Conditions on the `2n` faces of the box, `faces[a] = (low, high)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFaces {
    pub faces: Vec<(FaceCondition, FaceCondition)>,
}

impl BoundaryFaces {
    /// Dirichlet on lateral faces, zero flux on the two horizontal faces.
    pub fn gap(dim: usize) -> Self {
        let mut faces = vec![(FaceCondition::Dirichlet, FaceCondition::Dirichlet); dim];
        faces[dim - 1] = (FaceCondition::ZeroFlux, FaceCondition::ZeroFlux);
        Self { faces }
    }

    pub fn all_dirichlet(dim: usize) -> Self {
        Self {
            faces: vec![(FaceCondition::Dirichlet, FaceCondition::Dirichlet); dim],
        }
    }

    pub fn all_zero_flux(dim: usize) -> Self {
        Self {
            faces: vec![(FaceCondition::ZeroFlux, FaceCondition::ZeroFlux); dim],
        }
    }

    pub fn is_dirichlet(&self, grid: &TensorGrid, p: usize) -> bool {
        let m = grid.multi_index(p);
        self.faces.iter().enumerate().any(|(a, &(lo, hi))| {
            (m[a] == 0 && lo == FaceCondition::Dirichlet)
                || (m[a] + 1 == grid.len(a) && hi == FaceCondition::Dirichlet)
        })
    }
}

/// Dirichlet values from a function of the grid coordinates; `None` marks free nodes.
pub fn dirichlet_from_fn(
    grid: &TensorGrid,
    faces: &BoundaryFaces,
    f: impl Fn(&[f64]) -> f64,
) -> Vec<Option<f64>> {
    let n = grid.dim();
    (0..grid.node_count())
        .map(|p| faces.is_dirichlet(grid, p).then(|| f(&grid.coords(p)[..n])))
        .collect()
}

/// Dirichlet values obtained by pulling the physical data back through `map`.
pub fn dirichlet_trace(
    data: &BoundaryData,
    map: &dyn CoordinateMap,
    grid: &TensorGrid,
    faces: &BoundaryFaces,
) -> Result<Vec<Option<f64>>, DiscretizeError> {
    data.validate(grid.dim())?;
    let n = grid.dim();
    let mut out = vec![None; grid.node_count()];
    for (p, slot) in out.iter_mut().enumerate() {
        if faces.is_dirichlet(grid, p) {
            let x = map.inverse(&grid.coords(p)[..n])?;
            *slot = Some(data.evaluate(&x));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::uniform_axis;
    use crate::geometry::GapGeometry;
    use crate::transform::FlattenMap;

    #[test]
    fn non_harmonic_quadratic_is_rejected() {
        let bad = BoundaryData::HarmonicPolynomial {
            constant: 0.0,
            linear: vec![0.0; 2],
            quadratic: vec![1.0, 0.0, 0.0, 1.0],
        };
        assert!(bad.validate(2).is_err());
        let good = BoundaryData::HarmonicPolynomial {
            constant: 1.0,
            linear: vec![0.0; 2],
            quadratic: vec![1.0, 0.0, 0.0, -1.0],
        };
        good.validate(2).unwrap();
        assert_eq!(good.evaluate(&[2.0, 1.0]), 4.0);
    }

    #[test]
    fn trace_recovers_physical_coordinates() {
        let geom = GapGeometry::balls(2, 1.0, 0.01, 0.9, 1.0).unwrap();
        let map = FlattenMap::global(geom.clone());
        let grid = TensorGrid::new(vec![
            uniform_axis(-0.5, 0.5, 16),
            uniform_axis(-1.0, 1.0, 8),
        ])
        .unwrap();
        let faces = BoundaryFaces::gap(2);
        let data = BoundaryData::Linear {
            direction: vec![0.0, 1.0],
        };
        let trace = dirichlet_trace(&data, &map, &grid, &faces).unwrap();
        let top = grid.index(&[0, 8]);
        assert!((trace[top].unwrap() - geom.top(&[-0.5])).abs() < 1e-14);
        assert!(trace[grid.index(&[3, 4])].is_none());
        assert_eq!(trace.iter().filter(|v| v.is_some()).count(), 2 * 9);
    }
}
