//! Flat `section.key = value` scenario files.
//!
//! Blank lines and text after `#` are ignored; lists are comma separated.
//! Every key must be known, and each may appear once.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::discretize::{BoundaryData, GridSpec};
use crate::geometry::{GapGeometry, GeometryError};
use crate::solve::{PreconditionerKind, SolverConfig};
use crate::transform::CoefficientField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: {message}")]
    Value { key: String, message: String },
}

/// Default lateral box: the square inscribed in the disk `|x'| < 0.999 R0`.
pub const LATERAL_FILL: f64 = 0.999;

const KNOWN_KEYS: &[&str] = &[
    "scenario.id",
    "geometry.dim",
    "geometry.family",
    "geometry.radius",
    "geometry.q",
    "geometry.r0_outer",
    "geometry.kappa",
    "geometry.epsilon",
    "coefficient.family",
    "coefficient.lambda",
    "coefficient.big_lambda",
    "coefficient.alpha",
    "coefficient.amplitude",
    "coefficient.wavevector",
    "boundary.family",
    "boundary.direction",
    "boundary.constant",
    "boundary.linear",
    "boundary.quadratic",
    "numerics.lateral_cells",
    "numerics.vertical_cells",
    "numerics.c_grade",
    "numerics.lateral_extent",
    "numerics.tol",
    "numerics.max_iter",
    "numerics.preconditioner",
    "numerics.gamma",
    "numerics.osc_levels",
    "numerics.r0",
    "numerics.local_cells",
    "numerics.local_vertical_cells",
    "numerics.holder_pairs",
    "sweep.epsilons",
    "sweep.metric",
    "sweep.samples",
    "harnack.epsilons",
    "harnack.center",
    "layers.dim",
    "layers.counts",
    "layers.seeds",
    "layers.mu",
    "layers.amplitude",
    "layers.wavenumber",
    "layers.jitter",
    "layers.lateral_cells",
    "layers.vertical_cells",
    "layers.vertical_samples",
    "layers.holder_pairs",
    "layers.y_samples",
    "layers.max_growth",
    "layers.max_y_increase",
    "report.slope_target",
    "report.slope_tolerance",
    "report.min_r_squared",
    "report.slope_floor",
    "report.pointwise_spread",
    "report.harnack_spread",
    "report.sigma_floor",
    "report.sigma_spread",
];

/// Raw key/value pairs of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(ConfigError::Duplicate {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn str(&self, key: &'static str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn required(&self, key: &'static str) -> Result<&str, ConfigError> {
        self.str(key).ok_or(ConfigError::Missing(key))
    }

    fn num<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError> {
        self.str(key)
            .map(|v| {
                v.parse::<T>().map_err(|_| ConfigError::Value {
                    key: key.into(),
                    message: format!("cannot parse `{v}`"),
                })
            })
            .transpose()
    }

    fn num_or<T: std::str::FromStr>(
        &self,
        key: &'static str,
        default: T,
    ) -> Result<T, ConfigError> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn list<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<Vec<T>>, ConfigError> {
        self.str(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        let s = s.trim();
                        s.parse::<T>().map_err(|_| ConfigError::Value {
                            key: key.into(),
                            message: format!("cannot parse `{s}`"),
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Ball { radius: f64 },
    Quadratic { q: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySpec {
    pub dim: usize,
    pub shape: ShapeSpec,
    pub r0_outer: f64,
    pub kappa: f64,
    pub epsilon: Option<f64>,
}

impl GeometrySpec {
    pub fn build(&self, epsilon: f64) -> Result<GapGeometry, GeometryError> {
        match &self.shape {
            ShapeSpec::Ball { radius } => {
                GapGeometry::balls(self.dim, *radius, epsilon, self.r0_outer, self.kappa)
            }
            ShapeSpec::Quadratic { q } => {
                GapGeometry::quadratic(self.dim, q.clone(), epsilon, self.r0_outer, self.kappa)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    Global,
    Segment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub lateral_cells: usize,
    pub vertical_cells: usize,
    pub c_grade: f64,
    pub lateral_extent: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: PreconditionerKind,
    pub gamma: f64,
    pub osc_levels: usize,
    /// Radius of the estimate region `Ω_{0,r0}`.
    pub r0: f64,
    pub local_cells: usize,
    pub local_vertical_cells: usize,
    pub holder_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub epsilons: Vec<f64>,
    pub metric: SweepMetric,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnackSpec {
    pub epsilons: Vec<f64>,
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayersSpec {
    pub dim: usize,
    pub counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub mu: f64,
    pub amplitude: f64,
    pub wavenumber: f64,
    pub jitter: f64,
    pub lateral_cells: usize,
    pub vertical_cells: usize,
    pub vertical_samples: usize,
    pub holder_pairs: usize,
    pub y_samples: usize,
    pub max_growth: f64,
    pub max_y_increase: f64,
}

/// Thresholds checked by `report`; absent entries are not checked.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportSpec {
    pub slope_target: Option<f64>,
    pub slope_tolerance: Option<f64>,
    pub min_r_squared: Option<f64>,
    pub slope_floor: Option<f64>,
    pub pointwise_spread: Option<f64>,
    pub harnack_spread: Option<f64>,
    pub sigma_floor: Option<f64>,
    pub sigma_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub geometry: Option<GeometrySpec>,
    pub coefficient: CoefficientField,
    pub boundary: Option<BoundaryData>,
    pub numerics: Numerics,
    pub sweep: Option<SweepSpec>,
    pub harnack: Option<HarnackSpec>,
    pub layers: Option<LayersSpec>,
    pub report: ReportSpec,
}

fn epsilon_list(
    raw: &RawConfig,
    key: &'static str,
    min_len: usize,
) -> Result<Option<Vec<f64>>, ConfigError> {
    let Some(eps) = raw.list::<f64>(key)? else {
        return Ok(None);
    };
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(invalid(key, "epsilon values must be positive"));
    }
    if eps.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(invalid(key, "epsilon values must be strictly decreasing"));
    }
    if eps.len() < min_len {
        return Err(invalid(key, format!("need at least {min_len} values")));
    }
    Ok(Some(eps))
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw = RawConfig::parse(text)?;
        let id = raw.required("scenario.id")?.to_string();
        if id.is_empty() || id.contains(',') {
            return Err(invalid(
                "scenario.id",
                "must be non-empty and free of commas",
            ));
        }

        let geometry = if raw.contains("geometry.dim") {
            let dim: usize = raw.num("geometry.dim")?.unwrap();
            if !(dim == 2 || dim == 3) {
                return Err(invalid("geometry.dim", "must be 2 or 3"));
            }
            let shape = match raw.str("geometry.family").unwrap_or("ball") {
                "ball" => ShapeSpec::Ball {
                    radius: raw.num_or("geometry.radius", 1.0)?,
                },
                "quadratic" => ShapeSpec::Quadratic {
                    q: raw
                        .list("geometry.q")?
                        .ok_or(ConfigError::Missing("geometry.q"))?,
                },
                other => {
                    return Err(invalid(
                        "geometry.family",
                        format!("unsupported family `{other}`"),
                    ))
                }
            };
            let spec = GeometrySpec {
                dim,
                shape,
                r0_outer: raw
                    .num("geometry.r0_outer")?
                    .ok_or(ConfigError::Missing("geometry.r0_outer"))?,
                kappa: raw.num_or("geometry.kappa", 1.0)?,
                epsilon: raw.num("geometry.epsilon")?,
            };
            // surface shape errors now rather than mid-run
            spec.build(spec.epsilon.unwrap_or(1e-2))
                .map_err(|e| invalid("geometry", e.to_string()))?;
            Some(spec)
        } else {
            None
        };
        let dim = geometry.as_ref().map_or(3, |g| g.dim);

        let alpha = raw.num_or("coefficient.alpha", 0.5)?;
        let mut coefficient = match raw.str("coefficient.family").unwrap_or("identity") {
            "identity" => {
                let mut c = CoefficientField::identity(dim);
                c.alpha = alpha;
                c
            }
            "smooth" => {
                let amp = raw
                    .num("coefficient.amplitude")?
                    .ok_or(ConfigError::Missing("coefficient.amplitude"))?;
                let k = raw
                    .list("coefficient.wavevector")?
                    .ok_or(ConfigError::Missing("coefficient.wavevector"))?;
                CoefficientField::smooth_perturbation(dim, amp, k, alpha)
                    .map_err(|e| invalid("coefficient", e.to_string()))?
            }
            other => {
                return Err(invalid(
                    "coefficient.family",
                    format!("unsupported family `{other}`"),
                ))
            }
        };
        if let Some(l) = raw.num("coefficient.lambda")? {
            coefficient.lambda = l;
        }
        if let Some(l) = raw.num("coefficient.big_lambda")? {
            coefficient.big_lambda = l;
        }
        if !(coefficient.lambda > 0.0 && coefficient.lambda <= coefficient.big_lambda) {
            return Err(invalid(
                "coefficient.lambda",
                "need 0 < lambda ≤ big_lambda",
            ));
        }

        let boundary = match raw.str("boundary.family") {
            None => None,
            Some("linear") => Some(BoundaryData::Linear {
                direction: raw
                    .list("boundary.direction")?
                    .ok_or(ConfigError::Missing("boundary.direction"))?,
            }),
            Some("harmonic-quadratic") => Some(BoundaryData::HarmonicPolynomial {
                constant: raw.num_or("boundary.constant", 0.0)?,
                linear: raw
                    .list("boundary.linear")?
                    .unwrap_or_else(|| vec![0.0; dim]),
                quadratic: raw
                    .list("boundary.quadratic")?
                    .ok_or(ConfigError::Missing("boundary.quadratic"))?,
            }),
            Some(other) => {
                return Err(invalid(
                    "boundary.family",
                    format!("unsupported family `{other}`"),
                ))
            }
        };
        if let Some(b) = &boundary {
            let bdim = if geometry.is_some() {
                dim
            } else {
                raw.num_or("layers.dim", 3)?
            };
            b.validate(bdim)
                .map_err(|e| invalid("boundary", e.to_string()))?;
        }

        let r0_outer = geometry.as_ref().map_or(1.0, |g| g.r0_outer);
        let numerics = Numerics {
            lateral_cells: raw.num_or("numerics.lateral_cells", 128)?,
            vertical_cells: raw.num_or("numerics.vertical_cells", 32)?,
            c_grade: raw.num_or("numerics.c_grade", 0.5)?,
            lateral_extent: raw.num_or(
                "numerics.lateral_extent",
                LATERAL_FILL * r0_outer / ((dim - 1) as f64).sqrt(),
            )?,
            tol: raw.num_or("numerics.tol", 1e-10)?,
            max_iter: raw.num_or("numerics.max_iter", 20_000)?,
            preconditioner: match raw.str("numerics.preconditioner") {
                None => PreconditionerKind::TwoLevel,
                Some(s) => PreconditionerKind::parse(s)
                    .ok_or_else(|| invalid("numerics.preconditioner", format!("unknown `{s}`")))?,
            },
            gamma: raw.num_or("numerics.gamma", 0.3)?,
            osc_levels: raw.num_or("numerics.osc_levels", 5)?,
            r0: raw.num_or("numerics.r0", r0_outer / 4.0)?,
            local_cells: raw.num_or("numerics.local_cells", 32)?,
            local_vertical_cells: raw.num_or("numerics.local_vertical_cells", 8)?,
            holder_pairs: raw.num_or("numerics.holder_pairs", 20_000)?,
        };
        if !(numerics.tol > 0.0 && numerics.tol <= 1.0) {
            return Err(invalid("numerics.tol", "must lie in (0, 1]"));
        }
        if !(numerics.gamma > 0.0 && numerics.gamma < 1.0) {
            return Err(invalid("numerics.gamma", "must lie in (0, 1)"));
        }
        if numerics.osc_levels < 4 {
            return Err(invalid(
                "numerics.osc_levels",
                "need at least 4 dyadic radii",
            ));
        }

        let sweep = match epsilon_list(&raw, "sweep.epsilons", 4)? {
            None => None,
            Some(epsilons) => Some(SweepSpec {
                epsilons,
                metric: match raw.str("sweep.metric") {
                    None if dim == 2 => SweepMetric::Global,
                    None | Some("segment") => SweepMetric::Segment,
                    Some("global") => SweepMetric::Global,
                    Some(other) => {
                        return Err(invalid("sweep.metric", format!("unknown metric `{other}`")))
                    }
                },
                samples: raw.num_or("sweep.samples", 25)?,
            }),
        };
        let harnack =
            epsilon_list(&raw, "harnack.epsilons", 1)?.map(|epsilons| -> Result<_, ConfigError> {
                let center = raw
                    .list("harnack.center")?
                    .unwrap_or_else(|| vec![0.0; dim - 1]);
                if center.len() != dim - 1 {
                    return Err(invalid(
                        "harnack.center",
                        format!("need {} coordinates", dim - 1),
                    ));
                }
                Ok(HarnackSpec { epsilons, center })
            });
        let harnack = harnack.transpose()?;

        let layers = match raw.list::<usize>("layers.counts")? {
            None => None,
            Some(counts) => {
                if counts.iter().any(|&l| !(1..=64).contains(&l)) {
                    return Err(invalid("layers.counts", "layer counts must lie in [1, 64]"));
                }
                let spec = LayersSpec {
                    dim: raw.num_or("layers.dim", 3)?,
                    counts,
                    seeds: raw.list("layers.seeds")?.unwrap_or_else(|| vec![1]),
                    mu: raw.num_or("layers.mu", 0.5)?,
                    amplitude: raw.num_or("layers.amplitude", 0.3)?,
                    wavenumber: raw.num_or("layers.wavenumber", 3.0)?,
                    jitter: raw.num_or("layers.jitter", 0.6)?,
                    lateral_cells: raw.num_or("layers.lateral_cells", 24)?,
                    vertical_cells: raw.num_or("layers.vertical_cells", 64)?,
                    vertical_samples: raw.num_or("layers.vertical_samples", 8)?,
                    holder_pairs: raw.num_or("layers.holder_pairs", 4000)?,
                    y_samples: raw.num_or("layers.y_samples", 24)?,
                    max_growth: raw.num_or("layers.max_growth", 1.5)?,
                    max_y_increase: raw.num_or("layers.max_y_increase", 0.3)?,
                };
                if !(spec.dim == 2 || spec.dim == 3) {
                    return Err(invalid("layers.dim", "must be 2 or 3"));
                }
                if !(spec.amplitude >= 0.0 && spec.amplitude <= 0.3) {
                    return Err(invalid("layers.amplitude", "must lie in [0, 0.3]"));
                }
                if !(spec.mu > 0.0 && spec.mu < 1.0) {
                    return Err(invalid("layers.mu", "must lie in (0, 1)"));
                }
                if !(0.0..1.0).contains(&spec.jitter) {
                    return Err(invalid("layers.jitter", "must lie in [0, 1)"));
                }
                Some(spec)
            }
        };

        let report = ReportSpec {
            slope_target: raw.num("report.slope_target")?,
            slope_tolerance: raw.num("report.slope_tolerance")?,
            min_r_squared: raw.num("report.min_r_squared")?,
            slope_floor: raw.num("report.slope_floor")?,
            pointwise_spread: raw.num("report.pointwise_spread")?,
            harnack_spread: raw.num("report.harnack_spread")?,
            sigma_floor: raw.num("report.sigma_floor")?,
            sigma_spread: raw.num("report.sigma_spread")?,
        };

        if let (Some(b), Some(_)) = (&boundary, &geometry) {
            let _ = b;
        } else if geometry.is_some() && boundary.is_none() {
            return Err(ConfigError::Missing("boundary.family"));
        }
        Ok(Self {
            id,
            geometry,
            coefficient,
            boundary,
            numerics,
            sweep,
            harnack,
            layers,
            report,
        })
    }

    pub fn geometry(&self) -> Result<&GeometrySpec, ConfigError> {
        self.geometry
            .as_ref()
            .ok_or(ConfigError::Missing("geometry.dim"))
    }

    pub fn sweep_spec(&self) -> Result<&SweepSpec, ConfigError> {
        self.sweep
            .as_ref()
            .ok_or(ConfigError::Missing("sweep.epsilons"))
    }

    pub fn harnack_spec(&self) -> Result<&HarnackSpec, ConfigError> {
        self.harnack
            .as_ref()
            .ok_or(ConfigError::Missing("harnack.epsilons"))
    }

    pub fn layers_spec(&self) -> Result<&LayersSpec, ConfigError> {
        self.layers
            .as_ref()
            .ok_or(ConfigError::Missing("layers.counts"))
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            lateral_extent: self.numerics.lateral_extent,
            lateral_cells: self.numerics.lateral_cells,
            vertical_cells: self.numerics.vertical_cells,
            c_grade: self.numerics.c_grade,
            half_height: 1.0,
        }
    }

    pub fn solver(&self, parallel: bool) -> SolverConfig {
        SolverConfig {
            tol: self.numerics.tol,
            max_iter: self.numerics.max_iter,
            preconditioner: self.numerics.preconditioner,
            parallel,
        }
    }

    /// Separation used by `solve`: `geometry.epsilon`, else the first sweep value.
    pub fn single_epsilon(&self) -> Result<f64, ConfigError> {
        self.geometry()?
            .epsilon
            .or_else(|| self.sweep.as_ref().map(|s| s.epsilons[0]))
            .or_else(|| self.harnack.as_ref().map(|h| h.epsilons[0]))
            .ok_or(ConfigError::Missing("geometry.epsilon"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "scenario.id = t\ngeometry.dim = 3\ngeometry.r0_outer = 0.9\nboundary.family = linear\nboundary.direction = 1, 0, 0\n";

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = Scenario::parse(BASE).unwrap();
        assert_eq!(s.id, "t");
        assert_eq!(s.numerics.tol, 1e-10);
        assert_eq!(s.numerics.preconditioner, PreconditionerKind::TwoLevel);
        assert!((s.numerics.lateral_extent - 0.999 * 0.9 / 2f64.sqrt()).abs() < 1e-12);
        assert!(s.sweep.is_none());
    }

    #[test]
    fn unknown_and_duplicate_keys_abort() {
        let e = Scenario::parse(&format!("{BASE}numerics.tolerance = 1e-8\n")).unwrap_err();
        assert_eq!(
            e,
            ConfigError::UnknownKey {
                line: 6,
                key: "numerics.tolerance".into()
            }
        );
        let e = Scenario::parse(&format!("{BASE}scenario.id = u\n")).unwrap_err();
        assert!(matches!(e, ConfigError::Duplicate { .. }));
        assert!(matches!(
            Scenario::parse("scenario.id t"),
            Err(ConfigError::Syntax { line: 1 })
        ));
    }

    #[test]
    fn epsilon_lists_are_checked() {
        let ok = Scenario::parse(&format!(
            "{BASE}sweep.epsilons = 4e-2, 2e-2, 1e-2, 5e-3 # four\n"
        ))
        .unwrap();
        assert_eq!(ok.sweep.unwrap().epsilons.len(), 4);
        assert!(Scenario::parse(&format!("{BASE}sweep.epsilons = 4e-2, 2e-2, 1e-2\n")).is_err());
        assert!(
            Scenario::parse(&format!("{BASE}sweep.epsilons = 4e-2, 5e-2, 1e-2, 5e-3\n")).is_err()
        );
        assert!(Scenario::parse(&format!("{BASE}sweep.epsilons = 4e-2, 2e-2, 0, -1\n")).is_err());
    }

    #[test]
    fn bad_values_are_reported_with_their_key() {
        match Scenario::parse(&format!("{BASE}numerics.lateral_cells = many\n")) {
            Err(ConfigError::Value { key, .. }) => assert_eq!(key, "numerics.lateral_cells"),
            other => panic!("{other:?}"),
        }
        assert!(Scenario::parse(&BASE.replace("1, 0, 0", "1, 0")).is_err());
        assert!(Scenario::parse(&format!("{BASE}geometry.family = cone\n")).is_err());
    }
}
