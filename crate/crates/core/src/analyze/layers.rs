use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretize::{
    assemble, dirichlet_from_fn, evaluate_coefficients, uniform_axis, BoundaryData, BoundaryFaces,
    CellSampling, DiscreteField, TensorGrid,
};
use crate::linalg::{Mat, MAX_DIM};
use crate::solve::{cg_solve, SolverConfig};
use crate::transform::{IdentityMap, LayerCoefficient, LayeredPartition};

use super::{gradient_pullback, holder_norm_sampled, y_norm, AnalyzeError};

/// The piecewise-constant companion `Ā`: each layer is frozen at its
/// interface facing the origin, and the origin layer at `A(0)`.
pub fn piecewise_constant_approx(a: &LayeredPartition) -> LayeredPartition {
    let n = a.dim();
    let m0 = a.origin_layer();
    let cuts = a.cuts();
    let layers = (0..a.layer_count())
        .map(|k| {
            let mut x = [0.0; MAX_DIM];
            x[n - 1] = match k.cmp(&m0) {
                std::cmp::Ordering::Greater => cuts[k],
                std::cmp::Ordering::Less => cuts[k + 1],
                std::cmp::Ordering::Equal => 0.0,
            };
            LayerCoefficient::Constant(a.evaluate_in_layer(k, &x[..n]))
        })
        .collect();
    a.with_layers(layers)
}

/// Parameters of the randomized layered families.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFamily {
    pub dim: usize,
    /// Perturbation amplitude, at most 0.3 so that `0.7 I ≤ A ≤ 1.3 I`.
    pub amplitude: f64,
    /// Length of the per-layer wavevector.
    pub wavenumber: f64,
    /// Cut displacement as a fraction of the nominal layer thickness.
    pub jitter: f64,
}

impl LayerFamily {
    /// `l` layers with jittered cuts and independent random phases,
    /// directions and perturbation matrices.
    pub fn sample(&self, l: usize, seed: u64) -> LayeredPartition {
        let n = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((l as u64) << 32));
        let width = 2.0 / l as f64;
        let mut cuts: Vec<f64> = (0..=l).map(|m| -1.0 + m as f64 * width).collect();
        for c in cuts[1..l].iter_mut() {
            *c += self.jitter * width * rng.gen_range(-0.5..0.5);
        }
        let layers = (0..l)
            .map(|_| {
                let mut k = [0.0; MAX_DIM];
                let mut len = 0.0;
                while len < 1e-3 {
                    for v in k[..n].iter_mut() {
                        *v = rng.gen_range(-1.0..1.0);
                    }
                    len = k[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                }
                k[..n].iter_mut().for_each(|v| *v *= self.wavenumber / len);
                let mut m = Mat::zeros(n);
                for i in 0..n {
                    for j in i..n {
                        let v = rng.gen_range(-1.0..1.0);
                        m.set(i, j, v);
                        m.set(j, i, v);
                    }
                }
                let direction = m.scale(1.0 / m.frobenius());
                LayerCoefficient::Smooth {
                    amplitude: self.amplitude,
                    wavevector: k,
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                    direction,
                }
            })
            .collect();
        LayeredPartition::new(cuts, layers, n).expect("jittered cuts stay ordered")
    }
}

/// Sampled `max_m ‖A‖_{C^μ(S̄_m)}` (sup plus seminorm) over all layers.
pub fn max_layer_holder(a: &LayeredPartition, mu: f64, pairs: usize, seed: u64) -> f64 {
    let cuts = a.cuts();
    (0..a.layer_count())
        .map(|k| {
            holder_norm_sampled(
                |x| a.evaluate_in_layer(k, x),
                a.dim(),
                cuts[k],
                cuts[k + 1],
                mu,
                pairs,
                seed.wrapping_add(k as u64),
            )
        })
        .fold(0.0, f64::max)
}

/// `‖A − Ā‖_{Y^{1+μ,2}}` with Frobenius pointwise norm.
pub fn layer_y_norm(a: &LayeredPartition, mu: f64, per_axis: usize) -> Result<f64, AnalyzeError> {
    let bar = piecewise_constant_approx(a);
    y_norm(
        |x| a.evaluate(x).sub(&bar.evaluate(x)).frobenius(),
        a.dim(),
        1.0 + mu,
        2.0,
        per_axis,
    )
}

/// Discretization of the cylinder problem on `[−1, 1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredExperiment {
    pub lateral_cells: usize,
    pub vertical_cells: usize,
    /// Samples per cell height for the interface averaging.
    pub vertical_samples: usize,
    pub boundary: BoundaryData,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredOutcome {
    /// `‖∇u‖_{L∞(½S)} / ‖u‖_{L²(S)}`, zero when `u ≡ 0`.
    pub grad_ratio: f64,
    pub grad_max: f64,
    pub l2_norm: f64,
    pub iterations: usize,
}

impl LayeredExperiment {
    pub fn grid(&self, dim: usize) -> Result<TensorGrid, AnalyzeError> {
        let mut axes = vec![uniform_axis(-1.0, 1.0, self.lateral_cells); dim - 1];
        axes.push(uniform_axis(-1.0, 1.0, self.vertical_cells));
        Ok(TensorGrid::new(axes)?)
    }

    /// Solves `div(A ∇u) = 0` with `u = H` on the whole box boundary.
    pub fn solve(&self, a: &LayeredPartition) -> Result<(DiscreteField, usize), AnalyzeError> {
        let n = a.dim();
        self.boundary.validate(n)?;
        let grid = self.grid(n)?;
        let cells = evaluate_coefficients(
            &grid,
            CellSampling::VerticalAverage(self.vertical_samples),
            self.solver.parallel,
            |x| Ok(a.evaluate(x)),
        )?;
        let dir = dirichlet_from_fn(&grid, &BoundaryFaces::all_dirichlet(n), |x| {
            self.boundary.evaluate(x)
        });
        let sys = assemble(&grid, &cells, &dir, self.solver.parallel)?;
        let (w, rep) = cg_solve(&sys, None, &self.solver)?;
        Ok((DiscreteField::new(grid, w), rep.iterations))
    }

    pub fn run(&self, a: &LayeredPartition) -> Result<LayeredOutcome, AnalyzeError> {
        let n = a.dim();
        let (u, iterations) = self.solve(a)?;
        let grid = &u.grid;
        let vol = grid.dual_volumes();
        let mut l2 = 0.0;
        for p in 0..grid.node_count() {
            let x = grid.coords(p);
            if x[..n - 1].iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                l2 += vol[p] * u.values[p] * u.values[p];
            }
        }
        let l2_norm = l2.sqrt();
        let g = gradient_pullback(
            &u,
            &IdentityMap {
                dim: n,
                half_height: 1.0,
            },
            self.solver.parallel,
        )?;
        let grad_max = (0..grid.node_count())
            .filter(|&p| {
                let x = grid.coords(p);
                x[..n - 1].iter().map(|v| v * v).sum::<f64>() <= 0.25 && x[n - 1].abs() <= 0.5
            })
            .map(|p| g.magnitude[p])
            .fold(0.0, f64::max);
        let grad_ratio = if l2_norm > 0.0 {
            grad_max / l2_norm
        } else {
            0.0
        };
        Ok(LayeredOutcome {
            grad_ratio,
            grad_max,
            l2_norm,
            iterations,
        })
    }
}
