use crate::linalg::{Mat, MAX_DIM};

use super::TransformError;

/// Coefficient on a single horizontal layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerCoefficient {
    Constant(Mat),
    /// `I + amplitude · cos(k·x + phase) · M` with `M` symmetric, `‖M‖₂ ≤ 1`.
    Smooth {
        amplitude: f64,
        wavevector: [f64; MAX_DIM],
        phase: f64,
        direction: Mat,
    },
}

impl LayerCoefficient {
    pub fn evaluate(&self, x: &[f64]) -> Mat {
        match self {
            Self::Constant(m) => *m,
            Self::Smooth {
                amplitude,
                wavevector,
                phase,
                direction,
            } => {
                let n = direction.dim();
                let arg: f64 = (0..n).map(|i| wavevector[i] * x[i]).sum::<f64>() + phase;
                Mat::identity(n).add(&direction.scale(amplitude * arg.cos()))
            }
        }
    }
}

/// Horizontal cuts `−1 = c_0 < c_1 < … < c_l = 1` with one coefficient per layer.
///
/// Layers are indexed from zero: layer `k` is `c_k < x_n < c_{k+1}`. A point
/// lying exactly on an interior cut belongs to the layer below it.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredPartition {
    cuts: Vec<f64>,
    layers: Vec<LayerCoefficient>,
    origin_layer: usize,
    dim: usize,
}

impl LayeredPartition {
    pub fn new(
        cuts: Vec<f64>,
        layers: Vec<LayerCoefficient>,
        dim: usize,
    ) -> Result<Self, TransformError> {
        if cuts.len() < 2 || layers.len() != cuts.len() - 1 {
            return Err(TransformError::Invalid(format!(
                "{} cuts cannot bound {} layers",
                cuts.len(),
                layers.len()
            )));
        }
        if cuts[0] != -1.0 || *cuts.last().unwrap() != 1.0 {
            return Err(TransformError::Invalid(
                "cuts must start at −1 and end at 1".into(),
            ));
        }
        if cuts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(TransformError::Invalid(
                "cuts must be strictly increasing".into(),
            ));
        }
        // c_{m0} ≤ 0 < c_{m0+1}
        let origin_layer = cuts
            .windows(2)
            .position(|w| w[0] <= 0.0 && 0.0 < w[1])
            .expect("0 ∈ [−1, 1)");
        Ok(Self {
            cuts,
            layers,
            origin_layer,
            dim,
        })
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn layers(&self) -> &[LayerCoefficient] {
        &self.layers
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Index of the layer containing the origin.
    pub fn origin_layer(&self) -> usize {
        self.origin_layer
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layer_of(&self, xn: f64) -> usize {
        // first interior cut ≥ xn
        let k = self.cuts[1..self.cuts.len() - 1].partition_point(|&c| c < xn);
        k.min(self.layers.len() - 1)
    }

    pub fn evaluate(&self, x: &[f64]) -> Mat {
        self.layers[self.layer_of(x[self.dim - 1])].evaluate(x)
    }

    /// Evaluates layer `k`'s expression, including on its closure.
    pub fn evaluate_in_layer(&self, k: usize, x: &[f64]) -> Mat {
        self.layers[k].evaluate(x)
    }

    pub fn with_layers(&self, layers: Vec<LayerCoefficient>) -> Self {
        assert_eq!(layers.len(), self.layers.len());
        Self {
            layers,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientFamily {
    Identity,
    /// `I + amplitude · sin(k·x) · k̂k̂ᵀ`.
    SmoothPerturbation {
        amplitude: f64,
        wavevector: Vec<f64>,
    },
    Layered(LayeredPartition),
}

/// Symmetric conductivity tensor `a(x)` with its ellipticity and Hölder data.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub family: CoefficientFamily,
    pub dim: usize,
    pub lambda: f64,
    pub big_lambda: f64,
    pub alpha: f64,
    pub holder_seminorm: f64,
}

impl CoefficientField {
    pub fn identity(dim: usize) -> Self {
        Self {
            family: CoefficientFamily::Identity,
            dim,
            lambda: 1.0,
            big_lambda: 1.0,
            alpha: 0.5,
            holder_seminorm: 0.0,
        }
    }

    pub fn smooth_perturbation(
        dim: usize,
        amplitude: f64,
        wavevector: Vec<f64>,
        alpha: f64,
    ) -> Result<Self, TransformError> {
        if !(0.0..1.0).contains(&amplitude) {
            return Err(TransformError::Invalid(format!(
                "amplitude {amplitude} must lie in [0, 1)"
            )));
        }
        if wavevector.len() != dim {
            return Err(TransformError::Invalid(
                "wavevector dimension mismatch".into(),
            ));
        }
        let k = crate::linalg::norm(&wavevector);
        // |sin a − sin b| ≤ min(2, |a − b|) ≤ 2^{1−α} |a − b|^α
        let holder = amplitude * 2f64.powf(1.0 - alpha) * k.powf(alpha);
        Ok(Self {
            family: CoefficientFamily::SmoothPerturbation {
                amplitude,
                wavevector,
            },
            dim,
            lambda: 1.0 - amplitude,
            big_lambda: 1.0 + amplitude,
            alpha,
            holder_seminorm: holder,
        })
    }

    /// Wraps a layered partition; bounds are supplied by the caller's construction.
    pub fn layered(
        partition: LayeredPartition,
        lambda: f64,
        big_lambda: f64,
        alpha: f64,
        holder_seminorm: f64,
    ) -> Self {
        let dim = partition.dim();
        Self {
            family: CoefficientFamily::Layered(partition),
            dim,
            lambda,
            big_lambda,
            alpha,
            holder_seminorm,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Mat {
        match &self.family {
            CoefficientFamily::Identity => Mat::identity(self.dim),
            CoefficientFamily::SmoothPerturbation {
                amplitude,
                wavevector,
            } => {
                let k2: f64 = wavevector.iter().map(|v| v * v).sum();
                let arg: f64 = wavevector.iter().zip(x).map(|(k, xi)| k * xi).sum();
                let mut a = Mat::identity(self.dim);
                if k2 > 0.0 {
                    let s = amplitude * arg.sin() / k2;
                    for i in 0..self.dim {
                        for j in 0..self.dim {
                            a.set(i, j, a.get(i, j) + s * wavevector[i] * wavevector[j]);
                        }
                    }
                }
                a
            }
            CoefficientFamily::Layered(p) => p.evaluate(x),
        }
    }

    /// Checks `λ|ξ|² ≤ ξᵀa(x)ξ ≤ Λ|ξ|²` and symmetry at the given points.
    pub fn check_ellipticity<'p>(
        &self,
        points: impl IntoIterator<Item = &'p [f64]>,
    ) -> Result<(), TransformError> {
        for x in points {
            let a = self.evaluate(x);
            let ev = a.sym_eigenvalues();
            let tol = 1e-12 * self.big_lambda;
            if !a.is_symmetric()
                || ev[0] < self.lambda - tol
                || ev[self.dim - 1] > self.big_lambda + tol
            {
                return Err(TransformError::Invalid(format!(
                    "coefficient at {x:?} has spectrum {:?} outside [{}, {}]",
                    &ev[..self.dim],
                    self.lambda,
                    self.big_lambda
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_perturbation_respects_bounds() {
        let a = CoefficientField::smooth_perturbation(3, 0.3, vec![2.0, -1.0, 0.5], 0.5).unwrap();
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.037;
                vec![t.sin(), (1.3 * t).cos(), 0.1 * t - 0.5]
            })
            .collect();
        a.check_ellipticity(pts.iter().map(|p| p.as_slice()))
            .unwrap();
    }

    #[test]
    fn layered_partition_finds_origin_layer() {
        let id = LayerCoefficient::Constant(Mat::identity(2));
        let p =
            LayeredPartition::new(vec![-1.0, -0.5, 0.0, 0.4, 1.0], vec![id.clone(); 4], 2).unwrap();
        assert_eq!(p.origin_layer(), 2);
        assert_eq!(p.layer_of(-0.7), 0);
        assert_eq!(p.layer_of(-0.5), 0);
        assert_eq!(p.layer_of(0.0), 1);
        assert_eq!(p.layer_of(0.2), 2);
        assert_eq!(p.layer_of(1.0), 3);

        assert!(LayeredPartition::new(vec![-1.0, 0.3, 0.3, 1.0], vec![id.clone(); 3], 2).is_err());
        assert!(LayeredPartition::new(vec![-1.0, 1.0], vec![id.clone(); 2], 2).is_err());
    }
}
