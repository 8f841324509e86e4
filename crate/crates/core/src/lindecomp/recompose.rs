use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::svd::{compose, orthonormality_residual, singular_values, SvdFactors};
use crate::{Error, Result};

/// Orthogonality tolerance required of `P` and `Q` by [`check_orthogonal_invariance`].
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

/// `U_a · diag_pad(σ_b) · V_aᵀ`: singular vectors from `vectors_from`,
/// singular values from `values_from`.
pub fn recompose(vectors_from: &SvdFactors, values_from: &SvdFactors) -> Result<DMatrix<f64>> {
    if (vectors_from.rows(), vectors_from.cols()) != (values_from.rows(), values_from.cols()) {
        return Err(Error::ShapeMismatch(format!(
            "vectors from {}x{}, values from {}x{}",
            vectors_from.rows(),
            vectors_from.cols(),
            values_from.rows(),
            values_from.cols()
        )));
    }
    Ok(compose(vectors_from.u(), values_from.sigma(), vectors_from.v()))
}

/// `‖a − b‖_F / max(‖b‖_F, ε)`.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Maximum singular-value deviation between `P X Q` and `X`, relative to
/// `σ_1(X)`. Orthogonal transforms on either side leave singular values
/// unchanged, so this is at rounding level for valid inputs.
pub fn check_orthogonal_invariance(x: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    if p.nrows() != x.nrows() || !p.is_square() || q.nrows() != x.ncols() || !q.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "X {:?} with P {:?} and Q {:?}",
            x.shape(),
            p.shape(),
            q.shape()
        )));
    }
    for m in [p, q] {
        let r = orthonormality_residual(m);
        if !(r <= ORTHOGONALITY_TOLERANCE) {
            return Err(Error::NotOrthogonal {
                residual: r,
                tolerance: ORTHOGONALITY_TOLERANCE,
            });
        }
    }
    let before = singular_values(x)?;
    let after = singular_values(&(p * x * q))?;
    let scale = before[0].max(f64::MIN_POSITIVE);
    Ok(before
        .iter()
        .zip(&after)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `diag(R)` folded into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindecomp::svd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(h: usize, w: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(h, w, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn self_recomposition_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(9, 13, &mut rng);
        let f = svd(&x).unwrap();
        assert!(relative_error(&recompose(&f, &f).unwrap(), &x) <= 1e-12);
    }

    #[test]
    fn positive_scaling_lives_in_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let clean = random(16, 16, &mut rng);
        let degraded = &clean * 0.25;
        let fc = svd(&clean).unwrap();
        let fd = svd(&degraded).unwrap();
        assert!(relative_error(&recompose(&fd, &fc).unwrap(), &clean) <= 1e-6);
    }

    #[test]
    fn identity_and_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(6, 5, &mut rng);
        let i6 = DMatrix::identity(6, 6);
        let i5 = DMatrix::identity(5, 5);
        assert_eq!(check_orthogonal_invariance(&x, &i6, &i5).unwrap(), 0.0);
        let mut perm = DMatrix::zeros(6, 6);
        for (r, c) in [(0, 3), (1, 0), (2, 5), (3, 1), (4, 2), (5, 4)] {
            perm[(r, c)] = 1.0;
        }
        assert!(check_orthogonal_invariance(&x, &perm, &i5).unwrap() <= 1e-12);
    }

    #[test]
    fn non_orthogonal_rejected() {
        let x = DMatrix::identity(3, 3);
        let mut p = DMatrix::identity(3, 3);
        p[(0, 1)] = 1e-3;
        assert!(matches!(
            check_orthogonal_invariance(&x, &p, &DMatrix::identity(3, 3)),
            Err(Error::NotOrthogonal { .. })
        ));
        assert!(matches!(
            check_orthogonal_invariance(&x, &DMatrix::identity(4, 4), &DMatrix::identity(3, 3)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1, 2, 7, 32] {
            assert!(orthonormality_residual(&random_orthogonal(n, &mut rng)) < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let a = svd(&DMatrix::identity(3, 4)).unwrap();
        let b = svd(&DMatrix::identity(4, 3)).unwrap();
        assert!(recompose(&a, &b).is_err());
    }
}
