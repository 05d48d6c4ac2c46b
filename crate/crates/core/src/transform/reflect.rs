//! Even reflection across the faces of a flattened slab.
//!
//! Slab `l` is `(2l − 1)H < z_n ≤ (2l + 1)H`; a point there is folded back to
//! `(z', (−1)^l (z_n − 2lH))` in the base slab. Scalar fields are read at the
//! folded point. Coefficients also pick up the sign `(−1)^l` on the mixed
//! entries `b^{nk}`, `k < n`, which makes the extended tensor an orthogonal
//! conjugate of the original one.

use crate::linalg::Mat;

/// Index `l` of the slab containing `z_n`; interfaces go to the lower slab.
pub fn slab_index(zn: f64, half_height: f64) -> i64 {
    ((zn - half_height) / (2.0 * half_height)).ceil() as i64
}

/// Folded point in the base slab together with the slab index.
pub fn reflect_point(z: &[f64], half_height: f64) -> (Vec<f64>, i64) {
    let n = z.len();
    let l = slab_index(z[n - 1], half_height);
    let sign = if l.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut src = z.to_vec();
    src[n - 1] = sign * (z[n - 1] - 2.0 * l as f64 * half_height);
    (src, l)
}

pub fn reflect_scalar(w: impl Fn(&[f64]) -> f64, half_height: f64, z: &[f64]) -> f64 {
    let (src, _) = reflect_point(z, half_height);
    w(&src)
}

pub fn reflect_coefficient(b: impl Fn(&[f64]) -> Mat, half_height: f64, z: &[f64]) -> Mat {
    let (src, l) = reflect_point(z, half_height);
    let mut m = b(&src);
    if l.rem_euclid(2) == 1 {
        let n = m.dim() - 1;
        for k in 0..n {
            let v = -m.get(n, k);
            m.set(n, k, v);
            m.set(k, n, v);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample_b(z: &[f64]) -> Mat {
        let mut m = Mat::identity(3);
        m.set(0, 0, 2.0 + z[0]);
        m.set(2, 0, 0.3 * z[2] + 0.1);
        m.set(0, 2, 0.3 * z[2] + 0.1);
        m.set(2, 1, -0.2);
        m.set(1, 2, -0.2);
        m.set(2, 2, 1.5 + z[1] * z[1]);
        m
    }

    #[test]
    fn slab_zero_is_identity() {
        let d = 0.1;
        let z = [0.3, -0.2, 0.07];
        let (src, l) = reflect_point(&z, d);
        assert_eq!(l, 0);
        assert_eq!(src, z.to_vec());
        assert_eq!(reflect_coefficient(sample_b, d, &z), sample_b(&z));
    }

    #[test]
    fn first_slab_folds_and_flips() {
        let d = 0.1;
        let z = [0.3, -0.2, 1.5 * d];
        let (src, l) = reflect_point(&z, d);
        assert_eq!(l, 1);
        assert_relative_eq!(src[2], 0.5 * d, epsilon = 1e-15);
        let b = reflect_coefficient(sample_b, d, &z);
        let orig = sample_b(&src);
        assert_eq!(b.get(2, 0), -orig.get(2, 0));
        assert_eq!(b.get(1, 2), -orig.get(1, 2));
        assert_eq!(b.get(2, 2), orig.get(2, 2));
        assert_eq!(b.get(0, 0), orig.get(0, 0));
    }

    #[test]
    fn interfaces_belong_to_the_lower_slab() {
        assert_eq!(slab_index(0.1, 0.1), 0);
        assert_eq!(slab_index(0.1 + 1e-12, 0.1), 1);
        assert_eq!(slab_index(-0.1, 0.1), -1);
    }

    #[test]
    fn extension_is_continuous_across_the_face() {
        let d = 0.25;
        let w = |z: &[f64]| z[0] * z[0] + 3.0 * z[1];
        let below = reflect_scalar(w, d, &[0.4, d - 1e-13]);
        let above = reflect_scalar(w, d, &[0.4, d + 1e-13]);
        assert_relative_eq!(below, above, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn reflected_tensor_is_orthogonally_conjugate(
            x in -1.0f64..1.0, y in -1.0f64..1.0, zn in -2.0f64..2.0,
        ) {
            let d = 0.1;
            let z = [x, y, zn];
            let (src, _) = reflect_point(&z, d);
            prop_assert!(src[2].abs() <= d * (1.0 + 1e-12));
            let e1 = reflect_coefficient(sample_b, d, &z).sym_eigenvalues();
            let e0 = sample_b(&src).sym_eigenvalues();
            for i in 0..3 {
                prop_assert!((e1[i] - e0[i]).abs() <= 1e-12 * e0[2].abs());
            }
        }
    }
}
