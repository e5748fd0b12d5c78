//! Proximal maps used by the auxiliary-variable updates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Singular-value shrinkage: `U diag((sigma - threshold)_+) V^T`.
///
/// This is the proximal map of `threshold * ||.||_*`.
pub fn shrink_singular_values(x: &DMatrix<f64>, threshold: f64) -> Result<DMatrix<f64>> {
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::Svd(format!("input contains {bad}")));
    }
    let svd = x.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Svd("decomposition did not produce singular vectors".into())),
    };
    let shrunk = svd.singular_values.map(|s| (s - threshold).max(0.0));
    let mut scaled_u = u;
    for (j, mut col) in scaled_u.column_iter_mut().enumerate() {
        col *= shrunk[j];
    }
    Ok(scaled_u * v_t)
}

/// One-sided elementwise soft threshold `max(x - threshold, 0)`.
///
/// This is the proximal map of `threshold * ||.||_1` restricted to
/// non-negative matrices.
pub fn soft_threshold(x: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    x.map(|v| soft_threshold_scalar(v, threshold))
}

pub fn soft_threshold_scalar(x: f64, threshold: f64) -> f64 {
    (x - threshold).max(0.0)
}

/// Sum of singular values.
pub fn nuclear_norm(x: &DMatrix<f64>) -> f64 {
    x.singular_values().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_threshold_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&mut rng, 6);
        let y = shrink_singular_values(&x, 0.0).unwrap();
        assert!((&x - &y).amax() < 1e-10);
    }

    #[test]
    fn diagonal_shrinks_in_place() {
        let x = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
        let y = shrink_singular_values(&x, 2.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((&y - &expected).amax() < 1e-12);
    }

    #[test]
    fn nuclear_norm_of_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = random(&mut rng, 5);
            let thr = rng.random_range(0.0..1.5);
            let expected: f64 = x.singular_values().iter().map(|s| (s - thr).max(0.0)).sum();
            let y = shrink_singular_values(&x, thr).unwrap();
            assert!((nuclear_norm(&y) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_input_fails() {
        let mut x = DMatrix::zeros(3, 3);
        x[(1, 1)] = f64::NAN;
        assert!(matches!(shrink_singular_values(&x, 0.1), Err(Error::Svd(_))));
    }

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold_scalar(2.0, 1.0), 1.0);
        assert_eq!(soft_threshold_scalar(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold_scalar(-3.0, 1.0), 0.0);
        let x = DMatrix::from_row_slice(1, 3, &[0.2, 1.7, 3.0]);
        assert_eq!(soft_threshold(&x, 0.0), x);
    }
}
