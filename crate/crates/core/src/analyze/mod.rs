//! Turning solutions into the quantities of the gradient estimate: physical
//! gradients, oscillation and Harnack diagnostics, blow-up exponents, and the
//! Y-norm machinery for layered media.

mod fit;
mod gradient;
mod layers;
mod pushforward;
mod verify;
mod ynorm;

pub use fit::{fit_power_law, osc_decay_fit, sigma_from_harnack, OscDecay, PowerLawFit};
pub use gradient::{
    gradient_pullback, harnack_ratio, oscillation, segment_max_gradient, GradientField,
    HarnackRatio, HarnackShift, PhysicalField, FLAT_TOLERANCE,
};
pub use layers::{
    layer_y_norm, max_layer_holder, piecewise_constant_approx, LayerFamily, LayeredExperiment,
    LayeredOutcome,
};
pub use pushforward::{pushforward_stats, PushforwardStats};
pub use verify::{
    pushforward_check, slab_refinement, slab_solution, transform_checks, Check, SlabStudy,
    SLAB_HALF_HEIGHT,
};
pub use ynorm::{
    holder_norm_sampled, holder_seminorm_sampled, mean_over_cylinder, y_norm, MIN_SAMPLES_PER_AXIS,
    Y_NORM_LEVELS,
};

use thiserror::Error;

use crate::discretize::DiscretizeError;
use crate::solve::SolveError;
use crate::transform::TransformError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyzeError {
    #[error("no nodes in the region of radius {radius} around {center:?}")]
    EmptyRegion { center: Vec<f64>, radius: f64 },
    #[error("shifted field is not positive ({value:e}) on the annulus of radius {radius} around {center:?}")]
    NonPositive {
        center: Vec<f64>,
        radius: f64,
        value: f64,
    },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("{per_axis} samples per axis cannot resolve the smallest cylinder (need {required})")]
    Resolution { per_axis: usize, required: usize },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
