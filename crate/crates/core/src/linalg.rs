//! Small dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Spectral norm by power iteration on `AᵀA`.
///
/// The start vector is drawn from a fixed seed, so the result is
/// deterministic. Iteration stops when the Rayleigh estimate stalls.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    v /= v.norm();
    let mut est = 0.0f64;
    for _ in 0..200_000 {
        let av = a * &v;
        let next = av.norm();
        if next == 0.0 {
            return 0.0;
        }
        let mut w = a.tr_mul(&av);
        let wn = w.norm();
        if wn == 0.0 {
            return next;
        }
        w /= wn;
        v = w;
        if (next - est).abs() <= 1e-15 * next {
            est = next;
            break;
        }
        est = next;
    }
    (a * &v).norm().max(est)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Largest absolute entry of `m - mᵀ`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn dist_sq(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn norm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -3.0, 2.0]));
        assert!((operator_norm(&a) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn norm_of_zero_and_empty() {
        assert_eq!(operator_norm(&DMatrix::zeros(3, 2)), 0.0);
        assert_eq!(operator_norm(&DMatrix::zeros(0, 2)), 0.0);
    }

    #[test]
    fn extremes_of_2x2() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (lo, hi) = symmetric_extremes(&m);
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn power_iteration_matches_svd(
            rows in 1usize..7, cols in 1usize..7, seed in any::<u64>()
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
            let svd_norm = a.clone().svd(false, false).singular_values.max();
            let pi = operator_norm(&a);
            prop_assert!((pi - svd_norm).abs() <= 1e-10 * svd_norm.max(1.0));
        }
    }
}
