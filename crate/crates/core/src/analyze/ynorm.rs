use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{Mat, MAX_DIM};

use super::AnalyzeError;

/// Dyadic radii `1, 1/2, …, 2^{−8}` used for the scaled cylinders `rS`.
pub const Y_NORM_LEVELS: usize = 9;

/// Smallest number of midpoints per axis accepted by [`y_norm`].
pub const MIN_SAMPLES_PER_AXIS: usize = 8;

/// Midpoints of an `m^n` grid over `rS = {|x'| < r, |x_n| < r}`.
fn cylinder_midpoints(dim: usize, r: f64, m: usize) -> Vec<[f64; MAX_DIM]> {
    let h = 2.0 * r / m as f64;
    let coord = |i: usize| -r + (i as f64 + 0.5) * h;
    let total = m.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    for k in 0..total {
        let mut x = [0.0; MAX_DIM];
        let mut rem = k;
        for a in 0..dim {
            x[a] = coord(rem % m);
            rem /= m;
        }
        let lateral: f64 = x[..dim - 1].iter().map(|v| v * v).sum();
        if lateral < r * r {
            out.push(x);
        }
    }
    out
}

/// `max_k r_k^{1−s} (⨍_{r_k S} |f|^p)^{1/p}` over the dyadic radii, each
/// average taken by the midpoint rule with `m` points per axis.
pub fn y_norm(
    f: impl Fn(&[f64]) -> f64,
    dim: usize,
    s: f64,
    p: f64,
    m: usize,
) -> Result<f64, AnalyzeError> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(AnalyzeError::Degenerate(format!(
            "integrability exponent {p} must lie in (1, ∞)"
        )));
    }
    if m < MIN_SAMPLES_PER_AXIS {
        return Err(AnalyzeError::Resolution {
            per_axis: m,
            required: MIN_SAMPLES_PER_AXIS,
        });
    }
    let mut best = 0.0f64;
    for k in 0..Y_NORM_LEVELS {
        let r = 0.5f64.powi(k as i32);
        let pts = cylinder_midpoints(dim, r, m);
        let mean = pts.iter().map(|x| f(&x[..dim]).abs().powf(p)).sum::<f64>() / pts.len() as f64;
        best = best.max(r.powf(1.0 - s) * mean.powf(1.0 / p));
    }
    Ok(best)
}

/// Average of `f` over the unit cylinder `S` by the midpoint rule.
pub fn mean_over_cylinder(f: impl Fn(&[f64]) -> f64, dim: usize, m: usize) -> f64 {
    let pts = cylinder_midpoints(dim, 1.0, m);
    pts.iter().map(|x| f(&x[..dim])).sum::<f64>() / pts.len() as f64
}

/// Sampled Hölder seminorm `max |F(x) − F(y)|_F / |x − y|^μ` over the slab
/// `{|x'| ≤ 1, lo ≤ x_n ≤ hi}`.
///
/// Pairs mix long random chords with short ones at separations down to
/// `1e−3`; the value is a lower bound for the true seminorm.
pub fn holder_seminorm_sampled(
    f: impl Fn(&[f64]) -> Mat,
    dim: usize,
    lo: f64,
    hi: f64,
    mu: f64,
    pairs: usize,
    seed: u64,
) -> f64 {
    holder_sampled(f, dim, lo, hi, mu, pairs, seed).1
}

/// Sampled `sup |F|_F + [F]_{C^μ}` over the same slab.
pub fn holder_norm_sampled(
    f: impl Fn(&[f64]) -> Mat,
    dim: usize,
    lo: f64,
    hi: f64,
    mu: f64,
    pairs: usize,
    seed: u64,
) -> f64 {
    let (sup, semi) = holder_sampled(f, dim, lo, hi, mu, pairs, seed);
    sup + semi
}

fn holder_sampled(
    f: impl Fn(&[f64]) -> Mat,
    dim: usize,
    lo: f64,
    hi: f64,
    mu: f64,
    pairs: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        loop {
            for v in x[..dim - 1].iter_mut() {
                *v = rng.gen_range(-1.0..=1.0);
            }
            if x[..dim - 1].iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                break;
            }
        }
        x[dim - 1] = rng.gen_range(lo..=hi);
        x
    };
    let mut best = 0.0f64;
    let mut sup = 0.0f64;
    for i in 0..pairs {
        let x = point(&mut rng);
        let y = if i % 2 == 0 {
            point(&mut rng)
        } else {
            let scale = 10f64.powf(-rng.gen_range(0.0..3.0));
            let mut y = x;
            for v in y[..dim].iter_mut() {
                *v += scale * rng.gen_range(-1.0..1.0);
            }
            y[dim - 1] = y[dim - 1].clamp(lo, hi);
            let r2: f64 = y[..dim - 1].iter().map(|v| v * v).sum();
            if r2 > 1.0 {
                let s = 1.0 / r2.sqrt();
                y[..dim - 1].iter_mut().for_each(|v| *v *= s);
            }
            y
        };
        let d: f64 = (0..dim).map(|a| (x[a] - y[a]).powi(2)).sum::<f64>().sqrt();
        let (fx, fy) = (f(&x[..dim]), f(&y[..dim]));
        sup = sup.max(fx.frobenius()).max(fy.frobenius());
        if d > 0.0 {
            best = best.max(fx.sub(&fy).frobenius() / d.powf(mu));
        }
    }
    (sup, best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_fields() {
        assert_eq!(y_norm(|_| 0.0, 3, 1.5, 2.0, 16).unwrap(), 0.0);
        assert!((y_norm(|_| 1.0, 3, 1.0, 3.0, 16).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(
            y_norm(|_| 1.0, 3, 1.0, 2.0, 4),
            Err(AnalyzeError::Resolution { .. })
        ));
        assert!(y_norm(|_| 1.0, 3, 1.0, 1.0, 16).is_err());
    }

    #[test]
    fn scale_invariant_power_is_flat_across_radii() {
        let mu = 0.5;
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt().powf(mu);
        let got = y_norm(f, 3, 1.0 + mu, 2.0, 20).unwrap();
        // independent midpoint sum over S
        let m = 20;
        let h = 2.0 / m as f64;
        let (mut sum, mut count) = (0.0, 0usize);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let x = [
                        -1.0 + (i as f64 + 0.5) * h,
                        -1.0 + (j as f64 + 0.5) * h,
                        -1.0 + (k as f64 + 0.5) * h,
                    ];
                    if x[0] * x[0] + x[1] * x[1] < 1.0 {
                        sum += (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(mu);
                        count += 1;
                    }
                }
            }
        }
        let oracle = (sum / count as f64).sqrt();
        assert!((got - oracle).abs() < 1e-12 * oracle, "{got} {oracle}");
    }

    #[test]
    fn positively_homogeneous() {
        let f = |x: &[f64]| (3.0 * x[0]).sin() + x[1] * x[1];
        let a = y_norm(f, 2, 1.3, 2.0, 24).unwrap();
        let b = y_norm(|x| -4.0 * f(x), 2, 1.3, 2.0, 24).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn holder_quotient_of_a_linear_map() {
        // |F(x) − F(y)| = |x_1 − y_1| ≤ |x − y|, equality along e1
        let f = |x: &[f64]| Mat::diagonal(&[x[0], 0.0, 0.0]);
        let h = holder_seminorm_sampled(f, 3, -0.5, 0.5, 1.0, 4000, 7);
        assert!(h <= 1.0 + 1e-12 && h > 0.9, "{h}");
        let mean = mean_over_cylinder(|x| x[2] + 1.0, 3, 16);
        assert!((mean - 1.0).abs() < 1e-12);
    }
}
