//! Flattening changes of variables for the thin gap.
//!
//! Each map sends the curved region between the inclusions to a flat slab
//! `|z_n| < H` by an affine rescaling of the gap fraction
//! `t = (x_n − g(x') + ε/2) / (ε + f(x') − g(x'))`:
//!
//! ```text
//! z' = s (x' − c'),      z_n = 2H (t − 1/2)
//! ```
//!
//! | kind      | s     | c'   | H     | reference scale |
//! |-----------|-------|------|-------|-----------------|
//! | global    | 1     | 0'   | 1     | 1               |
//! | local     | 4/δ   | x0'  | δ     | δ               |
//! | annulus   | 1     | x0'  | h_r   | 1               |
//!
//! The *reference* Jacobian is the physical Jacobian `∂_x z` multiplied by the
//! reference scale; for the local map it is the derivative with respect to the
//! dilated variable `y = x/δ`, which is what the coefficient pushforward uses.

mod coefficients;
mod reflect;

pub use coefficients::{CoefficientFamily, CoefficientField, LayerCoefficient, LayeredPartition};
pub use reflect::{reflect_coefficient, reflect_point, reflect_scalar, slab_index};

use thiserror::Error;

use crate::geometry::{GapGeometry, GeometryError};
use crate::linalg::{Mat, MAX_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("point {point:?} lies outside the map domain ({reason})")]
    Domain {
        point: Vec<f64>,
        reason: &'static str,
    },
    #[error("Jacobian determinant {det} is not positive at {point:?}")]
    Orientation { point: Vec<f64>, det: f64 },
    #[error("invalid map parameters: {0}")]
    Invalid(String),
}

/// Tolerance on the gap fraction when deciding whether a point is inside the gap.
const FRACTION_SLACK: f64 = 1e-9;

/// A smooth, orientation-preserving change of variables `x ↦ z`.
pub trait CoordinateMap: Sync {
    fn dim(&self) -> usize;
    fn forward(&self, x: &[f64]) -> Result<Vec<f64>, TransformError>;
    fn inverse(&self, z: &[f64]) -> Result<Vec<f64>, TransformError>;
    /// `∂_x z` at the physical point `x`.
    fn physical_jacobian(&self, x: &[f64]) -> Result<Mat, TransformError>;
    /// Jacobian used for coefficient transport (see module docs).
    fn reference_jacobian(&self, x: &[f64]) -> Result<Mat, TransformError> {
        self.physical_jacobian(x)
    }
    /// Half thickness of the flattened slab.
    fn half_height(&self) -> f64;
}

/// `z = x`, used on domains that are already flat (layered cylinders, test slabs).
#[derive(Debug, Clone, Copy)]
pub struct IdentityMap {
    pub dim: usize,
    pub half_height: f64,
}

impl CoordinateMap for IdentityMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn forward(&self, x: &[f64]) -> Result<Vec<f64>, TransformError> {
        Ok(x.to_vec())
    }
    fn inverse(&self, z: &[f64]) -> Result<Vec<f64>, TransformError> {
        Ok(z.to_vec())
    }
    fn physical_jacobian(&self, _x: &[f64]) -> Result<Mat, TransformError> {
        Ok(Mat::identity(self.dim))
    }
    fn half_height(&self) -> f64 {
        self.half_height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    Global,
    Local { x0: Vec<f64>, delta: f64 },
    Annulus { x0: Vec<f64>, r: f64, h_r: f64 },
}

#[derive(Debug, Clone)]
pub struct FlattenMap {
    pub kind: MapKind,
    pub geometry: GapGeometry,
    center: [f64; MAX_DIM],
    lateral_scale: f64,
    half_height: f64,
    reference_scale: f64,
}

impl FlattenMap {
    /// Vertical normalization over the whole working disk; `z_n ∈ [−1, 1]`.
    pub fn global(geometry: GapGeometry) -> Self {
        Self {
            kind: MapKind::Global,
            geometry,
            center: [0.0; MAX_DIM],
            lateral_scale: 1.0,
            half_height: 1.0,
            reference_scale: 1.0,
        }
    }

    /// Composite dilation and flattening of `Ω_{x0, δ/4}` onto `Q_{1,δ}`.
    pub fn local(geometry: GapGeometry, x0: &[f64]) -> Result<Self, TransformError> {
        check_center(&geometry, x0)?;
        let delta = geometry.delta_scale(x0);
        let mut center = [0.0; MAX_DIM];
        center[..x0.len()].copy_from_slice(x0);
        Ok(Self {
            kind: MapKind::Local {
                x0: x0.to_vec(),
                delta,
            },
            geometry,
            center,
            lateral_scale: 4.0 / delta,
            half_height: delta,
            reference_scale: delta,
        })
    }

    /// Flattening of `Ω_{x0,2r} \ Ω_{x0,r/4}` onto an annular slab of half height `h_r`.
    ///
    /// At `x0' = 0'` the retraction direction defaults to `e1`.
    pub fn annulus(geometry: GapGeometry, x0: &[f64], r: f64) -> Result<Self, TransformError> {
        check_center(&geometry, x0)?;
        if !(r > 0.0) {
            return Err(TransformError::Invalid(format!(
                "annulus radius must be positive, got {r}"
            )));
        }
        let h_r = geometry.h_r_limit(x0, r)?;
        let mut center = [0.0; MAX_DIM];
        center[..x0.len()].copy_from_slice(x0);
        Ok(Self {
            kind: MapKind::Annulus {
                x0: x0.to_vec(),
                r,
                h_r,
            },
            geometry,
            center,
            lateral_scale: 1.0,
            half_height: h_r,
            reference_scale: 1.0,
        })
    }

    pub fn lateral_scale(&self) -> f64 {
        self.lateral_scale
    }

    pub fn reference_scale(&self) -> f64 {
        self.reference_scale
    }

    /// Short description for result metadata.
    pub fn describe(&self) -> String {
        match &self.kind {
            MapKind::Global => "global(half_height=1)".to_string(),
            MapKind::Local { x0, delta } => format!("local(x0={x0:?}, delta={delta})"),
            MapKind::Annulus { x0, r, h_r } => format!("annulus(x0={x0:?}, r={r}, h_r={h_r})"),
        }
    }

    fn lateral_of(&self, x: &[f64]) -> Result<(), TransformError> {
        let k = self.geometry.lateral_dim();
        if x.len() != k + 1 {
            return Err(TransformError::Invalid(format!(
                "expected a point of dimension {}, got {}",
                k + 1,
                x.len()
            )));
        }
        Ok(())
    }

    /// Gap fraction and gap height at a physical point.
    fn fraction(&self, x: &[f64]) -> Result<(f64, f64), TransformError> {
        self.lateral_of(x)?;
        let k = self.geometry.lateral_dim();
        let xp = &x[..k];
        let h = self.geometry.gap_height(xp)?;
        let t = (x[k] - self.geometry.bottom(xp)) / h;
        if !(-FRACTION_SLACK..=1.0 + FRACTION_SLACK).contains(&t) {
            return Err(TransformError::Domain {
                point: x.to_vec(),
                reason: "outside the gap",
            });
        }
        Ok((t, h))
    }
}

fn check_center(geometry: &GapGeometry, x0: &[f64]) -> Result<(), TransformError> {
    if x0.len() != geometry.lateral_dim() {
        return Err(TransformError::Invalid(format!(
            "center must have {} lateral coordinates",
            geometry.lateral_dim()
        )));
    }
    geometry.gap_height(x0)?;
    Ok(())
}

impl CoordinateMap for FlattenMap {
    fn dim(&self) -> usize {
        self.geometry.dim
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>, TransformError> {
        let (t, _) = self.fraction(x)?;
        let k = self.geometry.lateral_dim();
        let mut z = Vec::with_capacity(k + 1);
        for i in 0..k {
            z.push(self.lateral_scale * (x[i] - self.center[i]));
        }
        z.push(2.0 * self.half_height * (t - 0.5));
        Ok(z)
    }

    fn inverse(&self, z: &[f64]) -> Result<Vec<f64>, TransformError> {
        self.lateral_of(z)?;
        let k = self.geometry.lateral_dim();
        if z[k].abs() > self.half_height * (1.0 + FRACTION_SLACK) {
            return Err(TransformError::Domain {
                point: z.to_vec(),
                reason: "beyond the flattened slab",
            });
        }
        let mut x = Vec::with_capacity(k + 1);
        for i in 0..k {
            x.push(self.center[i] + z[i] / self.lateral_scale);
        }
        let h = self.geometry.gap_height(&x[..k])?;
        let t = z[k] / (2.0 * self.half_height) + 0.5;
        let xn = self.geometry.bottom(&x[..k]) + t * h;
        x.push(xn);
        Ok(x)
    }

    fn physical_jacobian(&self, x: &[f64]) -> Result<Mat, TransformError> {
        let (t, h) = self.fraction(x)?;
        let k = self.geometry.lateral_dim();
        let xp = &x[..k];
        let df = self.geometry.upper.gradient(xp);
        let dg = self.geometry.lower.gradient(xp);
        let mut j = Mat::zeros(k + 1);
        let two_h = 2.0 * self.half_height;
        for i in 0..k {
            j.set(i, i, self.lateral_scale);
            // ∂t/∂x_i = −(∂_i g + t ∂_i(f − g)) / h
            j.set(k, i, -two_h * (dg[i] + t * (df[i] - dg[i])) / h);
        }
        j.set(k, k, two_h / h);
        Ok(j)
    }

    fn reference_jacobian(&self, x: &[f64]) -> Result<Mat, TransformError> {
        Ok(self.physical_jacobian(x)?.scale(self.reference_scale))
    }

    fn half_height(&self) -> f64 {
        self.half_height
    }
}

/// `b(z) = J a(x) Jᵀ / det J` with `J` the reference Jacobian at `x = inverse(z)`.
pub fn pushforward_coefficients(
    a: &CoefficientField,
    map: &dyn CoordinateMap,
    z: &[f64],
) -> Result<Mat, TransformError> {
    let x = map.inverse(z)?;
    pushforward_at_physical(a, map, &x)
}

/// Same as [`pushforward_coefficients`] but starting from the physical point.
pub fn pushforward_at_physical(
    a: &CoefficientField,
    map: &dyn CoordinateMap,
    x: &[f64],
) -> Result<Mat, TransformError> {
    let j = map.reference_jacobian(x)?;
    let (b, det) = Mat::congruence_over_det(&j, &a.evaluate(x));
    if !(det > 0.0) {
        return Err(TransformError::Orientation {
            point: x.to_vec(),
            det,
        });
    }
    Ok(b)
}

/// Deliberate corruptions used to check that validation catches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectedFault {
    /// Flip the sign of the mixed entries `b^{n1} = b^{1n}`.
    FlipNormalCross,
}

/// Pushforward coefficient field bound to a map, evaluated on flattened points.
pub struct PushforwardField<'a> {
    pub coefficients: &'a CoefficientField,
    pub map: &'a dyn CoordinateMap,
    pub fault: Option<InjectedFault>,
}

impl<'a> PushforwardField<'a> {
    pub fn new(coefficients: &'a CoefficientField, map: &'a dyn CoordinateMap) -> Self {
        Self {
            coefficients,
            map,
            fault: None,
        }
    }

    pub fn with_fault(mut self, fault: InjectedFault) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn at(&self, z: &[f64]) -> Result<Mat, TransformError> {
        let mut b = pushforward_coefficients(self.coefficients, self.map, z)?;
        if let Some(InjectedFault::FlipNormalCross) = self.fault {
            let n = b.dim() - 1;
            let v = -b.get(n, 0);
            b.set(n, 0, v);
            b.set(0, n, v);
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn balls(eps: f64) -> GapGeometry {
        GapGeometry::balls(3, 1.0, eps, 0.9, 1.0).unwrap()
    }

    /// Random point strictly inside the gap over the lateral disk of radius `rad` around `c`.
    fn interior_point(rng: &mut ChaCha8Rng, g: &GapGeometry, c: &[f64], rad: f64) -> Vec<f64> {
        let k = g.lateral_dim();
        loop {
            let xp: Vec<f64> = (0..k)
                .map(|i| c[i] + rad * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            let dist: f64 = xp
                .iter()
                .zip(c)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist >= rad || g.gap_height(&xp).is_err() {
                continue;
            }
            let t = 0.02 + 0.96 * rng.gen::<f64>();
            let mut x = xp.clone();
            x.push(g.bottom(&xp) + t * g.gap_height(&xp).unwrap());
            return x;
        }
    }

    #[test]
    fn boundaries_map_to_slab_faces() {
        let g = balls(0.01);
        for map in [
            FlattenMap::global(g.clone()),
            FlattenMap::local(g.clone(), &[0.05, 0.02]).unwrap(),
            FlattenMap::annulus(g.clone(), &[0.01, 0.0], 0.2).unwrap(),
        ] {
            let xp = [0.07, -0.03];
            let top = map.forward(&[xp[0], xp[1], g.top(&xp)]).unwrap();
            let bot = map.forward(&[xp[0], xp[1], g.bottom(&xp)]).unwrap();
            let mid = map
                .forward(&[xp[0], xp[1], 0.5 * (g.top(&xp) + g.bottom(&xp))])
                .unwrap();
            assert_relative_eq!(top[2], map.half_height(), epsilon = 1e-14);
            assert_relative_eq!(bot[2], -map.half_height(), epsilon = 1e-14);
            assert!(mid[2].abs() < 1e-14);
        }
    }

    #[test]
    fn local_map_example() {
        // x = (0.02, 0, 0.001), unit balls, ε = 0.01, δ = 0.1:
        // z' = (0.8, 0); h = 0.01 + 2(1 − sqrt(1 − 4e−4)), t = (0.001 + h/2)/h
        let g = balls(0.01);
        let map = FlattenMap::local(g, &[0.0, 0.0]).unwrap();
        let z = map.forward(&[0.02, 0.0, 0.001]).unwrap();
        assert_relative_eq!(z[0], 0.8, epsilon = 1e-14);
        assert_eq!(z[1], 0.0);
        // 50-digit evaluation of 2δ(t − 1/2) = 2δ · 0.001 / h
        assert_relative_eq!(z[2], 0.019_230_695_251_760_182, epsilon = 1e-15);
    }

    #[test]
    fn local_jacobian_at_center() {
        let g = balls(0.01);
        let map = FlattenMap::local(g, &[0.0, 0.0]).unwrap();
        let j = map.reference_jacobian(&[0.0, 0.0, 0.002]).unwrap();
        assert_relative_eq!(j.get(0, 0), 4.0, epsilon = 1e-14);
        assert_relative_eq!(j.get(1, 1), 4.0, epsilon = 1e-14);
        assert_relative_eq!(j.get(2, 2), 2.0, epsilon = 1e-12);
        assert_eq!(j.get(2, 0), 0.0);
        assert_eq!(j.get(2, 1), 0.0);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for eps in [1e-2, 1e-3] {
            let g = balls(eps);
            let maps = [
                FlattenMap::global(g.clone()),
                FlattenMap::local(g.clone(), &[0.03, -0.01]).unwrap(),
                FlattenMap::annulus(g.clone(), &[0.01, 0.005], 0.15).unwrap(),
            ];
            for map in &maps {
                let delta = g.delta_scale(&[0.03, -0.01]);
                for _ in 0..100 {
                    let x = interior_point(&mut rng, &g, &[0.0, 0.0], 0.3);
                    let j = map.physical_jacobian(&x).unwrap();
                    let h = g.gap_height(&x[..2]).unwrap();
                    for col in 0..3 {
                        // vertical steps must stay inside the gap
                        let step = if col == 2 { 1e-5 * h } else { 1e-5 * delta };
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[col] += step;
                        xm[col] -= step;
                        let zp = map.forward(&xp).unwrap();
                        let zm = map.forward(&xm).unwrap();
                        for row in 0..3 {
                            let fd = (zp[row] - zm[row]) / (2.0 * step);
                            let exact = j.get(row, col);
                            let scale = exact.abs().max(j.max_abs() * 1e-3);
                            assert!(
                                (fd - exact).abs() <= 1e-6 * scale,
                                "{:?} ({row},{col}): fd {fd} vs {exact}",
                                map.kind
                            );
                        }
                    }
                    assert!(j.det() > 0.0);
                }
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = balls(1e-3);
        let maps = [
            FlattenMap::global(g.clone()),
            FlattenMap::local(g.clone(), &[0.02, 0.01]).unwrap(),
            FlattenMap::annulus(g.clone(), &[0.0, 0.0], 0.1).unwrap(),
        ];
        for map in &maps {
            let mut worst: f64 = 0.0;
            for _ in 0..1000 {
                let x = interior_point(&mut rng, &g, &[0.0, 0.0], 0.5);
                let z = map.forward(&x).unwrap();
                let back = map.forward(&map.inverse(&z).unwrap()).unwrap();
                for i in 0..3 {
                    let scale = z[i].abs().max(map.half_height());
                    worst = worst.max((back[i] - z[i]).abs() / scale);
                }
            }
            assert!(worst <= 1e-12, "{:?}: {worst}", map.kind);
        }
        // top face goes to the upper boundary
        let map = &maps[0];
        let x = map.inverse(&[0.1, 0.2, 1.0]).unwrap();
        assert_relative_eq!(x[2], g.top(&[0.1, 0.2]), epsilon = 1e-15);
        let x = map.inverse(&[0.1, 0.2, 0.0]).unwrap();
        assert_relative_eq!(
            x[2],
            0.5 * (g.top(&[0.1, 0.2]) + g.bottom(&[0.1, 0.2])),
            epsilon = 1e-15
        );
    }

    #[test]
    fn out_of_domain_points_are_rejected() {
        let g = balls(1e-2);
        let map = FlattenMap::global(g.clone());
        assert!(matches!(
            map.forward(&[0.1, 0.0, 1.0]),
            Err(TransformError::Domain { .. })
        ));
        assert!(matches!(
            map.inverse(&[0.1, 0.0, 1.5]),
            Err(TransformError::Domain { .. })
        ));
        assert!(matches!(
            map.inverse(&[0.95, 0.0, 0.0]),
            Err(TransformError::Geometry(_))
        ));
    }

    #[test]
    fn pushforward_of_identity_examples() {
        let a = CoefficientField::identity(2);
        let id = IdentityMap {
            dim: 2,
            half_height: 1.0,
        };
        let b = pushforward_coefficients(&a, &id, &[0.1, 0.2]).unwrap();
        assert_eq!(b, Mat::identity(2));
        let j = Mat::diagonal(&[4.0, 0.5]);
        let (b, _) = Mat::congruence_over_det(&j, &Mat::identity(2));
        assert_relative_eq!(b.get(0, 0), 4.0 / 0.5);
        assert_relative_eq!(b.get(1, 1), 0.5 / 4.0);
    }

    #[test]
    fn local_map_cross_entries_scale_with_delta() {
        // |(∂_y z)^{ni}| ≤ C δ with C stable across a decade of ε
        let mut constants = Vec::new();
        for eps in [1e-2, 3e-3, 1e-3] {
            let g = balls(eps);
            let x0 = [0.5 * eps.sqrt(), 0.0];
            let map = FlattenMap::local(g.clone(), &x0).unwrap();
            let delta = g.delta_scale(&x0);
            let mut c: f64 = 0.0;
            for a in 0..24 {
                for rad in [0.25, 0.5, 0.75, 1.0] {
                    for zn in [-0.9, 0.0, 0.9] {
                        let th = a as f64 * std::f64::consts::TAU / 24.0;
                        let z = [rad * th.cos(), rad * th.sin(), zn * delta];
                        let x = map.inverse(&z).unwrap();
                        let j = map.reference_jacobian(&x).unwrap();
                        c = c.max(j.get(2, 0).abs().max(j.get(2, 1).abs()) / delta);
                    }
                }
            }
            constants.push(c);
        }
        let max = constants.iter().cloned().fold(0.0, f64::max);
        let min = constants.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min <= 2.0, "{constants:?}");
    }

    #[test]
    fn annulus_vertical_stretch_is_bounded() {
        let gamma: f64 = 0.3;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for eps in [1e-2, 5e-3, 2e-3, 1e-3] {
            let g = balls(eps);
            let delta = eps.sqrt();
            let mut r = delta.powf(1.0 - gamma);
            while r > 2.0 * delta {
                // centred on the axis, where the diagnostics run
                let x0 = [0.0, 0.0];
                let map = FlattenMap::annulus(g.clone(), &x0, r).unwrap();
                for a in 0..16 {
                    for s in [0.26, 0.5, 1.0, 1.5, 1.99] {
                        let th = a as f64 * std::f64::consts::TAU / 16.0;
                        let xp = [x0[0] + s * r * th.cos(), s * r * th.sin()];
                        let x = [xp[0], xp[1], 0.0];
                        let j = map.physical_jacobian(&x).unwrap();
                        lo = lo.min(j.get(2, 2));
                        hi = hi.max(j.get(2, 2));
                    }
                }
                r *= 0.5;
            }
        }
        assert!(hi / lo <= 25.0, "ratio {}", hi / lo);
    }

    #[test]
    fn fault_injection_flips_mixed_entry() {
        let g = balls(1e-2);
        let map = FlattenMap::global(g);
        let a = CoefficientField::identity(3);
        let clean = PushforwardField::new(&a, &map)
            .at(&[0.2, 0.1, 0.5])
            .unwrap();
        let bad = PushforwardField::new(&a, &map)
            .with_fault(InjectedFault::FlipNormalCross)
            .at(&[0.2, 0.1, 0.5])
            .unwrap();
        assert!(clean.get(2, 0).abs() > 1e-3);
        assert_eq!(bad.get(2, 0), -clean.get(2, 0));
        assert_eq!(bad.get(0, 2), -clean.get(0, 2));
    }
}
