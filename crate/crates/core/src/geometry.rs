//! Inclusion profiles and the thin gap between them.
//!
//! The upper inclusion boundary is the graph `x_n = ε/2 + f(x')` and the lower
//! one is `x_n = −ε/2 + g(x')`, for lateral points `|x'| < R0`. Both profiles
//! vanish to first order at the origin, and the gap height
//! `ε + f(x') − g(x')` controls every length scale downstream.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{norm, Mat, MAX_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("lateral point with |x'| = {radius} lies outside the working disk of radius {limit}")]
    OutsideDomain { radius: f64, limit: f64 },
    #[error("retraction direction undefined at x0' = 0'; use the e1 limit convention")]
    DegenerateDirection,
    #[error("profile family `{0}` has no analytic Hessian")]
    UnsupportedFamily(&'static str),
    #[error("invalid geometry: {0}")]
    Invalid(String),
}

/// Which side of the gap a profile bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Upper,
    Lower,
}

/// Value and gradient of a user-supplied profile.
pub type CustomProfileFn = Arc<dyn Fn(&[f64]) -> (f64, [f64; MAX_DIM]) + Send + Sync>;

#[derive(Clone)]
pub enum ProfileFamily {
    /// `R − sqrt(R² − |x'|²)`.
    Ball { radius: f64 },
    /// `½ x'ᵀ Q x'` with `Q` symmetric positive definite, row-major.
    Quadratic { q: Vec<f64> },
    /// `Σ_k c_k |x'|^{2k}`, `k = 1, 2, …`.
    Monomials { coefficients: Vec<f64> },
    /// Value and gradient only; rejected by convexity checks.
    Custom(CustomProfileFn),
}

impl fmt::Debug for ProfileFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ball { radius } => write!(f, "Ball {{ radius: {radius} }}"),
            Self::Quadratic { q } => write!(f, "Quadratic {{ q: {q:?} }}"),
            Self::Monomials { coefficients } => write!(f, "Monomials {{ {coefficients:?} }}"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// One inclusion boundary written as a graph over the lateral variables.
///
/// The lower profile is the negative of the family expression, so a pair of
/// identical families gives a gap symmetric about `x_n = 0`.
#[derive(Debug, Clone)]
pub struct InclusionProfile {
    pub family: ProfileFamily,
    pub orientation: Orientation,
}

impl InclusionProfile {
    pub fn new(family: ProfileFamily, orientation: Orientation) -> Self {
        Self {
            family,
            orientation,
        }
    }

    fn sign(&self) -> f64 {
        match self.orientation {
            Orientation::Upper => 1.0,
            Orientation::Lower => -1.0,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            ProfileFamily::Ball { .. } => "ball",
            ProfileFamily::Quadratic { .. } => "quadratic",
            ProfileFamily::Monomials { .. } => "monomials",
            ProfileFamily::Custom(_) => "custom",
        }
    }

    /// Radius beyond which the profile is undefined (ball families only).
    pub fn support_radius(&self) -> f64 {
        match self.family {
            ProfileFamily::Ball { radius } => radius,
            _ => f64::INFINITY,
        }
    }

    pub fn value(&self, xp: &[f64]) -> f64 {
        let rho2: f64 = xp.iter().map(|x| x * x).sum();
        let v = match &self.family {
            ProfileFamily::Ball { radius } => {
                // R − sqrt(R² − ρ²) = ρ² / (R + sqrt(R² − ρ²)), stable near 0
                rho2 / (radius + (radius * radius - rho2).sqrt())
            }
            ProfileFamily::Quadratic { q } => {
                let k = xp.len();
                let mut s = 0.0;
                for i in 0..k {
                    for j in 0..k {
                        s += xp[i] * q[i * k + j] * xp[j];
                    }
                }
                0.5 * s
            }
            ProfileFamily::Monomials { coefficients } => {
                let mut s = 0.0;
                let mut p = rho2;
                for c in coefficients {
                    s += c * p;
                    p *= rho2;
                }
                s
            }
            ProfileFamily::Custom(func) => return func(xp).0 * self.sign(),
        };
        v * self.sign()
    }

    pub fn gradient(&self, xp: &[f64]) -> [f64; MAX_DIM] {
        let k = xp.len();
        let rho2: f64 = xp.iter().map(|x| x * x).sum();
        let mut g = [0.0; MAX_DIM];
        match &self.family {
            ProfileFamily::Ball { radius } => {
                let s = (radius * radius - rho2).sqrt();
                for i in 0..k {
                    g[i] = xp[i] / s;
                }
            }
            ProfileFamily::Quadratic { q } => {
                for i in 0..k {
                    g[i] = (0..k).map(|j| q[i * k + j] * xp[j]).sum();
                }
            }
            ProfileFamily::Monomials { coefficients } => {
                // d/dx_i ρ^{2m} = 2m ρ^{2m−2} x_i
                let mut radial = 0.0;
                let mut p = 1.0;
                for (idx, c) in coefficients.iter().enumerate() {
                    let m = (idx + 1) as f64;
                    radial += 2.0 * m * c * p;
                    p *= rho2;
                }
                for i in 0..k {
                    g[i] = radial * xp[i];
                }
            }
            ProfileFamily::Custom(func) => g = func(xp).1,
        }
        let s = self.sign();
        for v in g.iter_mut() {
            *v *= s;
        }
        g
    }

    /// Analytic Hessian as a `(n−1)×(n−1)` matrix.
    pub fn hessian(&self, xp: &[f64]) -> Result<Mat, GeometryError> {
        let k = xp.len();
        let rho2: f64 = xp.iter().map(|x| x * x).sum();
        let mut h = Mat::zeros(k);
        match &self.family {
            ProfileFamily::Ball { radius } => {
                let s2 = radius * radius - rho2;
                let s = s2.sqrt();
                for i in 0..k {
                    for j in 0..k {
                        let delta = if i == j { 1.0 / s } else { 0.0 };
                        h.set(i, j, delta + xp[i] * xp[j] / (s2 * s));
                    }
                }
            }
            ProfileFamily::Quadratic { q } => {
                for i in 0..k {
                    for j in 0..k {
                        h.set(i, j, q[i * k + j]);
                    }
                }
            }
            ProfileFamily::Monomials { coefficients } => {
                let mut iso = 0.0;
                let mut outer = 0.0;
                for (idx, c) in coefficients.iter().enumerate() {
                    let m = (idx + 1) as i32;
                    iso += 2.0 * m as f64 * c * rho2.powi(m - 1);
                    if m >= 2 {
                        outer += 2.0 * m as f64 * (2.0 * m as f64 - 2.0) * c * rho2.powi(m - 2);
                    }
                }
                for i in 0..k {
                    for j in 0..k {
                        let delta = if i == j { iso } else { 0.0 };
                        h.set(i, j, delta + outer * xp[i] * xp[j]);
                    }
                }
            }
            ProfileFamily::Custom(_) => return Err(GeometryError::UnsupportedFamily("custom")),
        }
        Ok(h.scale(self.sign()))
    }
}

/// Which boundary of the gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

/// Two relatively convex inclusions at distance `epsilon`.
#[derive(Debug, Clone)]
pub struct GapGeometry {
    pub upper: InclusionProfile,
    pub lower: InclusionProfile,
    pub epsilon: f64,
    /// Radius of the lateral disk on which both boundaries are graphs.
    pub r0_outer: f64,
    /// Lower bound on the eigenvalues of `∇²(f − g)`.
    pub kappa: f64,
    pub dim: usize,
}

impl GapGeometry {
    pub fn new(
        upper: InclusionProfile,
        lower: InclusionProfile,
        epsilon: f64,
        r0_outer: f64,
        kappa: f64,
        dim: usize,
    ) -> Result<Self, GeometryError> {
        if !(dim == 2 || dim == 3) {
            return Err(GeometryError::Invalid(format!(
                "dimension {dim} not in {{2, 3}}"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(GeometryError::Invalid(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(r0_outer > 0.0) {
            return Err(GeometryError::Invalid(format!(
                "R0 must be positive, got {r0_outer}"
            )));
        }
        if !(kappa > 0.0) {
            return Err(GeometryError::Invalid(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        if upper.orientation != Orientation::Upper || lower.orientation != Orientation::Lower {
            return Err(GeometryError::Invalid(
                "profile orientations swapped".into(),
            ));
        }
        let k = dim - 1;
        for p in [&upper, &lower] {
            match &p.family {
                ProfileFamily::Ball { radius } => {
                    if !(*radius > r0_outer) {
                        return Err(GeometryError::Invalid(format!(
                            "ball radius {radius} must exceed R0 = {r0_outer}"
                        )));
                    }
                }
                ProfileFamily::Quadratic { q } => {
                    if q.len() != k * k {
                        return Err(GeometryError::Invalid(format!(
                            "quadratic profile needs {} entries, got {}",
                            k * k,
                            q.len()
                        )));
                    }
                    let m = Mat::from_row_major(q).expect("square");
                    if !m.is_symmetric() || m.min_eigenvalue() <= 0.0 {
                        return Err(GeometryError::Invalid(
                            "Q must be symmetric positive definite".into(),
                        ));
                    }
                }
                ProfileFamily::Monomials { coefficients } => {
                    if coefficients.first().copied().unwrap_or(0.0) <= 0.0 {
                        return Err(GeometryError::Invalid(
                            "leading monomial coefficient must be positive".into(),
                        ));
                    }
                }
                ProfileFamily::Custom(_) => {}
            }
        }
        Ok(Self {
            upper,
            lower,
            epsilon,
            r0_outer,
            kappa,
            dim,
        })
    }

    /// Two balls of equal radius, e.g. unit disks in 2D or unit balls in 3D.
    pub fn balls(
        dim: usize,
        radius: f64,
        epsilon: f64,
        r0_outer: f64,
        kappa: f64,
    ) -> Result<Self, GeometryError> {
        let fam = ProfileFamily::Ball { radius };
        Self::new(
            InclusionProfile::new(fam.clone(), Orientation::Upper),
            InclusionProfile::new(fam, Orientation::Lower),
            epsilon,
            r0_outer,
            kappa,
            dim,
        )
    }

    /// `f = ½ x'ᵀQx'`, `g = −f`, so that `f − g = x'ᵀQx'`.
    pub fn quadratic(
        dim: usize,
        q: Vec<f64>,
        epsilon: f64,
        r0_outer: f64,
        kappa: f64,
    ) -> Result<Self, GeometryError> {
        let fam = ProfileFamily::Quadratic { q };
        Self::new(
            InclusionProfile::new(fam.clone(), Orientation::Upper),
            InclusionProfile::new(fam, Orientation::Lower),
            epsilon,
            r0_outer,
            kappa,
            dim,
        )
    }

    /// Same shapes, different separation.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, GeometryError> {
        Self::new(
            self.upper.clone(),
            self.lower.clone(),
            epsilon,
            self.r0_outer,
            self.kappa,
            self.dim,
        )
    }

    pub fn lateral_dim(&self) -> usize {
        self.dim - 1
    }

    fn check_lateral(&self, xp: &[f64]) -> Result<(), GeometryError> {
        debug_assert_eq!(xp.len(), self.lateral_dim());
        let radius = norm(xp);
        if radius >= self.r0_outer {
            return Err(GeometryError::OutsideDomain {
                radius,
                limit: self.r0_outer,
            });
        }
        Ok(())
    }

    /// `ε + f(x') − g(x')`.
    pub fn gap_height(&self, xp: &[f64]) -> Result<f64, GeometryError> {
        self.check_lateral(xp)?;
        Ok(self.gap_height_unchecked(xp))
    }

    #[inline]
    pub(crate) fn gap_height_unchecked(&self, xp: &[f64]) -> f64 {
        self.epsilon + self.upper.value(xp) - self.lower.value(xp)
    }

    /// Height of the upper boundary `ε/2 + f(x')`.
    pub fn top(&self, xp: &[f64]) -> f64 {
        0.5 * self.epsilon + self.upper.value(xp)
    }

    /// Height of the lower boundary `−ε/2 + g(x')`.
    pub fn bottom(&self, xp: &[f64]) -> f64 {
        -0.5 * self.epsilon + self.lower.value(xp)
    }

    /// Local length scale `sqrt(ε + |x0'|²)`.
    pub fn delta_scale(&self, x0p: &[f64]) -> f64 {
        delta_scale(self.epsilon, x0p)
    }

    /// Gap height at the point retracted from `x0'` toward the origin by `r/4`.
    pub fn h_r(&self, x0p: &[f64], r: f64) -> Result<f64, GeometryError> {
        let rad = norm(x0p);
        if rad < 1e-12 {
            return Err(GeometryError::DegenerateDirection);
        }
        let mut p = [0.0; MAX_DIM];
        for i in 0..x0p.len() {
            p[i] = x0p[i] - 0.25 * r * x0p[i] / rad;
        }
        self.gap_height(&p[..x0p.len()])
    }

    /// [`h_r`](Self::h_r) with the retraction direction fixed to `e1` when
    /// `|x0'| < 1e−12`.
    pub fn h_r_limit(&self, x0p: &[f64], r: f64) -> Result<f64, GeometryError> {
        match self.h_r(x0p, r) {
            Err(GeometryError::DegenerateDirection) => {
                let mut p = [0.0; MAX_DIM];
                p[..x0p.len()].copy_from_slice(x0p);
                p[0] -= 0.25 * r;
                self.gap_height(&p[..x0p.len()])
            }
            other => other,
        }
    }

    /// Unit normal to the upper (resp. lower) boundary, pointing up (resp. down).
    pub fn boundary_normal(&self, xp: &[f64], side: Side) -> Result<Vec<f64>, GeometryError> {
        self.check_lateral(xp)?;
        let k = xp.len();
        let mut v = vec![0.0; k + 1];
        match side {
            Side::Upper => {
                let g = self.upper.gradient(xp);
                for i in 0..k {
                    v[i] = -g[i];
                }
                v[k] = 1.0;
            }
            Side::Lower => {
                let g = self.lower.gradient(xp);
                v[..k].copy_from_slice(&g[..k]);
                v[k] = -1.0;
            }
        }
        let len = norm(&v);
        v.iter_mut().for_each(|x| *x /= len);
        Ok(v)
    }

    /// Samples `∇²(f − g)` over the working disk and reports its smallest eigenvalue.
    pub fn verify_relative_convexity(
        &self,
        sample_count: usize,
    ) -> Result<ConvexityReport, GeometryError> {
        if sample_count < 10 {
            return Err(GeometryError::Invalid(format!(
                "need at least 10 samples, got {sample_count}"
            )));
        }
        let mut min_eig = f64::INFINITY;
        let mut max_eig = f64::NEG_INFINITY;
        let mut worst = vec![0.0; self.lateral_dim()];
        for p in lateral_samples(self.lateral_dim(), self.r0_outer, sample_count) {
            let h = self.upper.hessian(&p)?.sub(&self.lower.hessian(&p)?);
            let ev = h.sym_eigenvalues();
            if ev[0] < min_eig {
                min_eig = ev[0];
                worst = p.clone();
            }
            max_eig = max_eig.max(ev[h.dim() - 1]);
        }
        Ok(ConvexityReport {
            min_eig,
            max_eig,
            worst_point: worst,
            passed: min_eig >= self.kappa,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub min_eig: f64,
    pub max_eig: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

/// `sqrt(ε + |x0'|²)`; accepts `ε = 0`.
pub fn delta_scale(epsilon: f64, x0p: &[f64]) -> f64 {
    (epsilon + x0p.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Quasi-uniform points in the open lateral disk of the given radius, origin first.
///
/// In one lateral dimension this is a symmetric uniform set; in two it is a
/// sunflower (golden-angle) spiral.
pub fn lateral_samples(lateral_dim: usize, radius: f64, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    out.push(vec![0.0; lateral_dim]);
    let rest = count.saturating_sub(1);
    match lateral_dim {
        1 => {
            for i in 0..rest {
                let t = (i as f64 + 0.5) / rest as f64;
                out.push(vec![radius * (2.0 * t - 1.0)]);
            }
        }
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for i in 0..rest {
                let rr = radius * ((i as f64 + 0.5) / rest as f64).sqrt();
                let th = golden * i as f64;
                out.push(vec![rr * th.cos(), rr * th.sin()]);
            }
        }
    }
    out
}
