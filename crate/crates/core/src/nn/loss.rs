use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Real;
use crate::lindecomp::{svd, SvdFactors};
use crate::{Error, Result};

/// Charbonnier smoothing constant; `√(e² + ε²)` with `ε = 1e-3`.
pub const CHARBONNIER_EPS: f64 = 1e-3;

/// Floor on `σ_i + σ_j` in the polar-factor gradient.
pub const DEC_DENOM_FLOOR: f64 = 1e-8;

/// Weights of the auxiliary terms in the total objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// Weight of the `UVᵀ` term inside the decomposition loss.
    pub beta: f64,
    pub lambda_orth: f64,
    pub lambda_dec: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            beta: 0.01,
            lambda_orth: 1e-4,
            lambda_dec: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("lambda_orth", self.lambda_orth),
            ("lambda_dec", self.lambda_dec),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn charbonnier<T: Real>(a: &[T], b: &[T], eps: f64) -> (T, Vec<T>) {
    let e2 = T::of(eps * eps);
    let inv = T::one() / T::of(a.len() as f64);
    let mut total = T::zero();
    let grad = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x - *y;
            let r = (d * d + e2).sqrt();
            total += r;
            d / r * inv
        })
        .collect();
    (total * inv, grad)
}

/// `Σ_{i≠j} (W Wᵀ)_{ij}²` for a row-major `rows × cols` weight, with its
/// gradient `4 · offdiag(W Wᵀ) · W`.
pub(crate) fn orth<T: Real>(w: &[T], rows: usize, cols: usize) -> (T, Vec<T>) {
    let mut m = vec![T::zero(); rows * rows];
    super::real::matmul(rows, cols, rows, w, false, w, true, &mut m, false);
    let mut value = T::zero();
    for i in 0..rows {
        m[i * rows + i] = T::zero();
    }
    for v in &m {
        value += *v * *v;
    }
    let mut grad = vec![T::zero(); rows * cols];
    super::real::matmul(rows, rows, cols, &m, false, w, false, &mut grad, false);
    let four = T::of(4.0);
    grad.iter_mut().for_each(|g| *g *= four);
    (value, grad)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Polar factor `U_k V_kᵀ` over the leading `k = min(h, w)` singular pairs.
fn polar(f: &SvdFactors) -> DMatrix<f64> {
    let k = f.rank_bound();
    f.u().columns(0, k) * f.v().columns(0, k).transpose()
}

/// Decomposition loss of one square channel,
/// `β‖U_r V_rᵀ − U_c V_cᵀ‖₁ + ‖σ_r − σ_c‖₁`, and its gradient with respect
/// to the restored channel.
///
/// The polar-factor gradient is `U [(H − Hᵀ) ⊘ (σ_i + σ_j)] Vᵀ` with
/// `H = Uᵀ G V`. When either channel is all zero its polar factor is
/// undefined and only the singular-value term is used.
pub fn dec_channel(rec: &DMatrix<f64>, clean: &DMatrix<f64>, beta: f64) -> Result<(f64, DMatrix<f64>)> {
    if !rec.is_square() || rec.shape() != clean.shape() {
        return Err(Error::ShapeMismatch(format!(
            "decomposition loss needs matching square channels, got {:?} and {:?}",
            rec.shape(),
            clean.shape()
        )));
    }
    let fr = svd(rec)?;
    let fc = svd(clean)?;
    let n = rec.nrows();
    let u = fr.u();
    let v = fr.v();
    let sr = fr.sigma();
    let sc = fc.sigma();
    let mut value: f64 = sr.iter().zip(sc).map(|(a, b)| (a - b).abs()).sum();
    let signs = DMatrix::from_fn(n, n, |i, j| if i == j { sign(sr[i] - sc[i]) } else { 0.0 });
    let mut inner = signs;
    let degenerate = rec.iter().all(|v| *v == 0.0) || clean.iter().all(|v| *v == 0.0);
    if degenerate {
        log::warn!("decomposition loss: all-zero channel, polar-factor term skipped");
    } else if beta != 0.0 {
        let diff = polar(&fr) - polar(&fc);
        value += beta * diff.iter().map(|d| d.abs()).sum::<f64>();
        let g = diff.map(|d| beta * sign(d));
        let h = u.transpose() * g * v;
        for i in 0..n {
            for j in 0..n {
                let denom = (sr[i] + sr[j]).max(DEC_DENOM_FLOOR);
                inner[(i, j)] += (h[(i, j)] - h[(j, i)]) / denom;
            }
        }
    }
    Ok((value, u * inner * v.transpose()))
}

/// Batched decomposition loss: summed over channels, averaged over the batch.
/// Returns the value and the gradient with respect to `rec`.
pub(crate) fn dec_batch<T: Real>(
    rec: &[T],
    clean: &[T],
    dims: (usize, usize, usize, usize),
    beta: f64,
) -> Result<(f64, Vec<T>)> {
    let (b, c, h, w) = dims;
    let plane = h * w;
    let scale = 1.0 / b as f64;
    let mut total = 0.0;
    let mut grad = vec![T::zero(); rec.len()];
    for p in 0..b * c {
        let r = DMatrix::from_fn(h, w, |y, x| rec[p * plane + y * w + x].f64());
        let cl = DMatrix::from_fn(h, w, |y, x| clean[p * plane + y * w + x].f64());
        let (v, g) = dec_channel(&r, &cl, beta)?;
        total += v * scale;
        for y in 0..h {
            for x in 0..w {
                grad[p * plane + y * w + x] = T::of(g[(y, x)] * scale);
            }
        }
    }
    Ok((total, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orth_two_by_two() {
        let (v, _) = orth(&[1.0f64, 1.0, 0.0, 1.0], 2, 2);
        assert_eq!(v, 2.0);
        let (v, _) = orth(&[1.0f64, 0.0, 0.0, 1.0], 2, 2);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn charbonnier_floor() {
        let a = [0.5f64; 10];
        let (v, g) = charbonnier(&a, &a, CHARBONNIER_EPS);
        assert!((v - 1e-3).abs() < 1e-15);
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn dec_identical_and_scaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(8, 8, |_, _| rng.random_range(0.0..1.0));
        let (v, _) = dec_channel(&x, &x, 0.01).unwrap();
        assert_eq!(v, 0.0);
        let (v, _) = dec_channel(&(&x * 2.0), &x, 0.01).unwrap();
        let s: f64 = crate::lindecomp::singular_values(&x).unwrap().iter().sum();
        assert!((v - s).abs() < 1e-10 * s);
    }

    #[test]
    fn dec_rejects_non_square() {
        let x = DMatrix::<f64>::zeros(4, 5);
        assert!(dec_channel(&x, &x, 0.01).is_err());
    }

    #[test]
    fn dec_zero_channel_keeps_sigma_term() {
        let z = DMatrix::<f64>::zeros(4, 4);
        let x = DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64 * 0.1);
        let (v, _) = dec_channel(&z, &x, 1.0).unwrap();
        let s: f64 = crate::lindecomp::singular_values(&x).unwrap().iter().sum();
        assert!((v - s).abs() < 1e-12);
    }
}
