use rayon::prelude::*;

use crate::discretize::{DiscreteField, TensorGrid};
use crate::linalg::MAX_DIM;
use crate::transform::{CoordinateMap, TransformError};

use super::AnalyzeError;

/// Nodal values carried back to physical space.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    pub grid: TensorGrid,
    pub values: Vec<f64>,
    /// Physical preimage of every node.
    pub points: Vec<[f64; MAX_DIM]>,
}

impl PhysicalField {
    pub fn new(
        field: &DiscreteField,
        map: &dyn CoordinateMap,
        parallel: bool,
    ) -> Result<Self, TransformError> {
        let grid = &field.grid;
        let n = grid.dim();
        let point = |p: usize| -> Result<[f64; MAX_DIM], TransformError> {
            let x = map.inverse(&grid.coords(p)[..n])?;
            let mut out = [0.0; MAX_DIM];
            out[..n].copy_from_slice(&x);
            Ok(out)
        };
        let points = if parallel {
            (0..grid.node_count())
                .into_par_iter()
                .map(point)
                .collect::<Result<_, _>>()?
        } else {
            (0..grid.node_count())
                .map(point)
                .collect::<Result<_, _>>()?
        };
        Ok(Self {
            grid: grid.clone(),
            values: field.values.clone(),
            points,
        })
    }

    /// Lateral distance of node `p` from `x0p`.
    pub fn lateral_distance(&self, p: usize, x0p: &[f64]) -> f64 {
        let x = &self.points[p];
        x0p.iter()
            .enumerate()
            .map(|(i, c)| (x[i] - c).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Physical gradient `∇_x u = Jᵀ ∇_z w` at every node.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub grid: TensorGrid,
    pub components: Vec<[f64; MAX_DIM]>,
    pub magnitude: Vec<f64>,
    pub points: Vec<[f64; MAX_DIM]>,
}

/// Weights of the three-point derivative at node `i` of `axis`
/// (centred inside, one-sided second order at the ends).
fn stencil(axis: &[f64], i: usize) -> ([usize; 3], [f64; 3]) {
    let last = axis.len() - 1;
    if i == 0 || i == last {
        let (k0, k1, k2) = if i == 0 {
            (0, 1, 2)
        } else {
            (last, last - 1, last - 2)
        };
        let h1 = axis[k1] - axis[k0];
        let h2 = axis[k2] - axis[k1];
        let w = [
            -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
            (h1 + h2) / (h1 * h2),
            -h1 / (h2 * (h1 + h2)),
        ];
        ([k0, k1, k2], w)
    } else {
        let h1 = axis[i] - axis[i - 1];
        let h2 = axis[i + 1] - axis[i];
        let w = [
            -h2 / (h1 * (h1 + h2)),
            (h2 - h1) / (h1 * h2),
            h1 / (h2 * (h1 + h2)),
        ];
        ([i - 1, i, i + 1], w)
    }
}

/// Gradient of `w ∘ forward` at the nodes; `w` lives on the map's flat domain.
pub fn gradient_pullback(
    field: &DiscreteField,
    map: &dyn CoordinateMap,
    parallel: bool,
) -> Result<GradientField, TransformError> {
    let grid = &field.grid;
    let n = grid.dim();
    let node = |p: usize| -> Result<([f64; MAX_DIM], f64, [f64; MAX_DIM]), TransformError> {
        let m = grid.multi_index(p);
        let mut gz = [0.0; MAX_DIM];
        for a in 0..n {
            let (idx, w) = stencil(grid.axis(a), m[a]);
            let base = p - m[a] * grid.stride(a);
            gz[a] = (0..3)
                .map(|k| w[k] * field.values[base + idx[k] * grid.stride(a)])
                .sum();
        }
        let x = map.inverse(&grid.coords(p)[..n])?;
        let j = map.physical_jacobian(&x)?;
        let g = j.tmul_vec(&gz[..n]);
        let mag = g[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut xp = [0.0; MAX_DIM];
        xp[..n].copy_from_slice(&x);
        Ok((g, mag, xp))
    };
    let all: Vec<_> = if parallel {
        (0..grid.node_count())
            .into_par_iter()
            .map(node)
            .collect::<Result<_, _>>()?
    } else {
        (0..grid.node_count()).map(node).collect::<Result<_, _>>()?
    };
    let mut components = Vec::with_capacity(all.len());
    let mut magnitude = Vec::with_capacity(all.len());
    let mut points = Vec::with_capacity(all.len());
    for (g, m, x) in all {
        components.push(g);
        magnitude.push(m);
        points.push(x);
    }
    Ok(GradientField {
        grid: grid.clone(),
        components,
        magnitude,
        points,
    })
}

impl GradientField {
    /// Bottom node of the vertical column closest to `x0p` in grid coordinates.
    pub fn nearest_column(&self, x0p: &[f64]) -> usize {
        let n = self.grid.dim();
        let mut multi = [0usize; MAX_DIM];
        for a in 0..n - 1 {
            let ax = self.grid.axis(a);
            let target = x0p.get(a).copied().unwrap_or(0.0);
            multi[a] = (0..ax.len())
                .min_by(|&i, &j| (ax[i] - target).abs().total_cmp(&(ax[j] - target).abs()))
                .unwrap();
        }
        self.grid.index(&multi[..n])
    }

    /// Max of `|∇u|` over the vertical node column nearest to `x0p`.
    pub fn segment_max(&self, x0p: &[f64]) -> f64 {
        let start = self.nearest_column(x0p);
        self.magnitude[start..start + self.grid.column_len()]
            .iter()
            .fold(0.0, |m, v| m.max(*v))
    }

    /// Max of `|∇u|` over nodes with `|x'| < radius` at least `margin` cells
    /// away from the lateral faces.
    pub fn max_in_disk(&self, radius: f64, margin: usize) -> f64 {
        let n = self.grid.dim();
        (0..self.magnitude.len())
            .filter(|&p| {
                let r2: f64 = self.points[p][..n - 1].iter().map(|v| v * v).sum();
                r2 < radius * radius && self.grid.lateral_depth(p) >= margin
            })
            .map(|p| self.magnitude[p])
            .fold(0.0, f64::max)
    }
}

pub fn segment_max_gradient(gf: &GradientField, x0p: &[f64]) -> f64 {
    gf.segment_max(x0p)
}

/// `sup − inf` of the nodal values over `Ω_{x0,r}`.
pub fn oscillation(u: &PhysicalField, x0p: &[f64], r: f64) -> Result<f64, AnalyzeError> {
    let (lo, hi) = range_in(u, x0p, 0.0, r)?;
    Ok(hi - lo)
}

fn range_in(
    u: &PhysicalField,
    x0p: &[f64],
    r_in: f64,
    r_out: f64,
) -> Result<(f64, f64), AnalyzeError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (p, v) in u.values.iter().enumerate() {
        let d = u.lateral_distance(p, x0p);
        if d >= r_in && d < r_out {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if lo > hi {
        return Err(AnalyzeError::EmptyRegion {
            center: x0p.to_vec(),
            radius: r_out,
        });
    }
    Ok((lo, hi))
}

/// Oscillations below this fraction of the local magnitude count as flat;
/// solver roundoff would otherwise pass for structure.
pub const FLAT_TOLERANCE: f64 = 1e-9;

/// Which of the two nonnegative shifts of the proof to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarnackShift {
    /// `sup_{Ω_{2r}} u − u`
    FromAbove,
    /// `u − inf_{Ω_{2r}} u`
    FromBelow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnackRatio {
    pub ratio: f64,
    /// Set in two dimensions, where the inequality is not expected to hold.
    pub warning: bool,
}

/// `sup / inf` of the shifted field over the annulus `r/2 ≤ |x' − x0'| < r`.
pub fn harnack_ratio(
    u: &PhysicalField,
    x0p: &[f64],
    r: f64,
    shift: HarnackShift,
) -> Result<HarnackRatio, AnalyzeError> {
    let (lo2, hi2) = range_in(u, x0p, 0.0, 2.0 * r)?;
    let (lo, hi) = range_in(u, x0p, 0.5 * r, r)?;
    let (s_min, s_max) = match shift {
        HarnackShift::FromAbove => (hi2 - hi, hi2 - lo),
        HarnackShift::FromBelow => (lo - lo2, hi - lo2),
    };
    if hi2 - lo2 <= FLAT_TOLERANCE * lo2.abs().max(hi2.abs()) {
        return Ok(HarnackRatio {
            ratio: 1.0,
            warning: u.grid.dim() == 2,
        });
    }
    if !(s_min > 0.0) {
        if s_max == 0.0 {
            return Ok(HarnackRatio {
                ratio: 1.0,
                warning: u.grid.dim() == 2,
            });
        }
        return Err(AnalyzeError::NonPositive {
            center: x0p.to_vec(),
            radius: r,
            value: s_min,
        });
    }
    Ok(HarnackRatio {
        ratio: s_max / s_min,
        warning: u.grid.dim() == 2,
    })
}
