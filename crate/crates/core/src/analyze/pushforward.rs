use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::GapGeometry;
use crate::linalg::{Mat, MAX_DIM};
use crate::transform::{
    CoefficientField, CoordinateMap, FlattenMap, PushforwardField, TransformError,
};

/// Spectral range and Hölder quotient of the pushed-forward coefficient on
/// `Q̄_{1,δ}` at a lateral centre.
#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardStats {
    pub epsilon: f64,
    pub delta: f64,
    pub min_eig: f64,
    pub max_eig: f64,
    /// Location of the smallest eigenvalue in flattened coordinates.
    pub min_at: Vec<f64>,
    /// Sampled `max |b(z) − b(z̃)|_F / |z − z̃|^α`.
    pub holder: f64,
    pub nodes: usize,
}

/// Evaluates `b` for the local map at `x0` on a uniform grid of
/// `{|z'| ≤ 1, |z_n| ≤ δ}` with `lateral_cells` per lateral axis and
/// `vertical_cells` across the height.
pub fn pushforward_stats(
    geometry: &GapGeometry,
    coefficient: &CoefficientField,
    x0: &[f64],
    lateral_cells: usize,
    vertical_cells: usize,
    alpha: f64,
    pairs: usize,
    seed: u64,
) -> Result<PushforwardStats, TransformError> {
    let map = FlattenMap::local(geometry.clone(), x0)?;
    let push = PushforwardField::new(coefficient, &map);
    let n = geometry.dim;
    let delta = map.half_height();
    let mut nodes: Vec<([f64; MAX_DIM], Mat)> = Vec::new();
    let lat = |i: usize| -1.0 + 2.0 * i as f64 / lateral_cells as f64;
    let lateral_total = (lateral_cells + 1).pow((n - 1) as u32);
    for k in 0..lateral_total {
        let mut z = [0.0; MAX_DIM];
        let mut rem = k;
        for a in 0..n - 1 {
            z[a] = lat(rem % (lateral_cells + 1));
            rem /= lateral_cells + 1;
        }
        if z[..n - 1].iter().map(|v| v * v).sum::<f64>() > 1.0 + 1e-12 {
            continue;
        }
        for j in 0..=vertical_cells {
            z[n - 1] = delta * (-1.0 + 2.0 * j as f64 / vertical_cells as f64);
            nodes.push((z, push.at(&z[..n])?));
        }
    }
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    let mut min_at = Vec::new();
    for (z, b) in &nodes {
        let e = b.sym_eigenvalues();
        if e[0] < min_eig {
            min_eig = e[0];
            min_at = z[..n].to_vec();
        }
        max_eig = max_eig.max(e[n - 1]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holder = 0.0f64;
    let dist = |a: &[f64; MAX_DIM], b: &[f64; MAX_DIM]| {
        (0..n).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
    };
    for i in 0..pairs {
        let p = rng.gen_range(0..nodes.len());
        // alternate between arbitrary pairs and vertical neighbours
        let q = if i % 2 == 0 {
            rng.gen_range(0..nodes.len())
        } else if p + 1 < nodes.len() && nodes[p + 1].0[..n - 1] == nodes[p].0[..n - 1] {
            p + 1
        } else {
            continue;
        };
        let d = dist(&nodes[p].0, &nodes[q].0);
        if d > 0.0 {
            holder = holder.max(nodes[p].1.sub(&nodes[q].1).frobenius() / d.powf(alpha));
        }
    }
    Ok(PushforwardStats {
        epsilon: geometry.epsilon,
        delta,
        min_eig,
        max_eig,
        min_at,
        holder,
        nodes: nodes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_pushforward_stays_elliptic_and_regular() {
        let a = CoefficientField::identity(3);
        let mut holders = Vec::new();
        for eps in [4e-2, 1e-2, 2.5e-3] {
            let g = GapGeometry::balls(3, 1.0, eps, 0.9, 1.0).unwrap();
            let s = pushforward_stats(&g, &a, &[0.0, 0.0], 16, 8, 0.5, 4000, 1).unwrap();
            assert!(s.min_eig >= 0.1 && s.max_eig <= 10.0, "{s:?}");
            holders.push(s.holder);
        }
        let hi = holders.iter().cloned().fold(0.0, f64::max);
        let lo = holders.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(lo > 0.0 && hi / lo <= 2.0, "{holders:?}");
    }
}
