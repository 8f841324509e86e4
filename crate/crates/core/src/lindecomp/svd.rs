use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Full singular value decomposition `X = U Σ Vᵀ` of an `h × w` matrix.
///
/// `u` is `h × h`, `v` is `w × w`, both orthonormal; `sigma` has
/// `min(h, w)` entries sorted in descending order. The sign of each pair
/// `(u_i, v_i)` is fixed so that the largest-magnitude entry of `u_i` is
/// nonnegative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvdFactors {
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn new(u: DMatrix<f64>, sigma: Vec<f64>, v: DMatrix<f64>) -> Result<Self> {
        let (h, w) = (u.nrows(), v.nrows());
        if !u.is_square() || !v.is_square() || sigma.len() != h.min(w) {
            return Err(Error::ShapeMismatch(format!(
                "u {:?}, sigma {}, v {:?}",
                u.shape(),
                sigma.len(),
                v.shape()
            )));
        }
        Ok(SvdFactors { u, sigma, v })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank_bound(&self) -> usize {
        self.sigma.len()
    }

    /// `U Σ Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        compose(&self.u, &self.sigma, &self.v)
    }

    /// `Σ_{i<k} u_i v_iᵀ`, the sign-invariant "singular vector" part.
    pub fn uv_t(&self) -> DMatrix<f64> {
        let k = self.rank_bound();
        self.u.columns(0, k) * self.v.columns(0, k).transpose()
    }
}

/// `U[:, :k] · diag(σ) · V[:, :k]ᵀ` with `k = σ.len()`.
pub(crate) fn compose(u: &DMatrix<f64>, sigma: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
    let k = sigma.len();
    let mut us = u.columns(0, k).into_owned();
    for (j, s) in sigma.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    us * v.columns(0, k).transpose()
}

/// Full SVD by one-sided (Hestenes) Jacobi rotations.
pub fn svd(x: &DMatrix<f64>) -> Result<SvdFactors> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::InvalidParameter("svd of an empty matrix".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    let (u, sigma, v) = if x.nrows() >= x.ncols() {
        jacobi_tall(x)
    } else {
        let (v, sigma, u) = jacobi_tall(&x.transpose());
        (u, sigma, v)
    };
    let mut f = SvdFactors { u, sigma, v };
    fix_signs(&mut f);
    Ok(f)
}

/// Singular values only (same algorithm, same ordering).
pub fn singular_values(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(svd(x)?.sigma)
}

fn two_columns(buf: &mut [f64], n: usize, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(i < j);
    let (lo, hi) = buf.split_at_mut(j * n);
    (&mut lo[i * n..(i + 1) * n], &mut hi[..n])
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xi, yi) = (*x, *y);
        *x = c * xi - s * yi;
        *y = s * xi + c * yi;
    }
}

/// `h ≥ w`. Returns `(U h×h, σ (w), V w×w)` with σ sorted descending.
fn jacobi_tall(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (h, w) = a.shape();
    debug_assert!(h >= w);
    // nalgebra is column-major, so columns are contiguous.
    let mut cols = a.as_slice().to_vec();
    let mut vcols = vec![0.0; w * w];
    for i in 0..w {
        vcols[i * w + i] = 1.0;
    }
    let tol = f64::EPSILON * h as f64;
    let mut norms = vec![0.0; w];

    for _ in 0..MAX_SWEEPS {
        for (j, n) in norms.iter_mut().enumerate() {
            let c = &cols[j * h..(j + 1) * h];
            *n = dot(c, c);
        }
        let mut rotated = false;
        for i in 0..w.saturating_sub(1) {
            for j in i + 1..w {
                let (alpha, beta) = (norms[i], norms[j]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let (ci, cj) = two_columns(&mut cols, h, i, j);
                let gamma = dot(ci, cj);
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + 1f64.hypot(zeta));
                let c = 1.0 / 1f64.hypot(t);
                let s = c * t;
                rotate(ci, cj, c, s);
                norms[i] = alpha - t * gamma;
                norms[j] = beta + t * gamma;
                let (vi, vj) = two_columns(&mut vcols, w, i, j);
                rotate(vi, vj, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let raw_sigma: Vec<f64> = (0..w)
        .map(|j| {
            let c = &cols[j * h..(j + 1) * h];
            dot(c, c).sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..w).collect();
    order.sort_by(|&p, &q| raw_sigma[q].total_cmp(&raw_sigma[p]).then(p.cmp(&q)));

    let sigma: Vec<f64> = order.iter().map(|&j| raw_sigma[j]).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cutoff = smax * f64::EPSILON * h as f64;

    let mut v = DMatrix::zeros(w, w);
    for (dst, &src) in order.iter().enumerate() {
        v.column_mut(dst).copy_from_slice(&vcols[src * w..(src + 1) * w]);
    }

    let mut ucols: Vec<Option<Vec<f64>>> = vec![None; h];
    for (dst, &src) in order.iter().enumerate() {
        let s = sigma[dst];
        if s > cutoff && s > 0.0 {
            ucols[dst] = Some(cols[src * h..(src + 1) * h].iter().map(|x| x / s).collect());
        }
    }
    let u = complete_basis(ucols, h);
    (u, sigma, v)
}

/// Fills the `None` slots with unit vectors orthogonal to every other column.
fn complete_basis(mut slots: Vec<Option<Vec<f64>>>, n: usize) -> DMatrix<f64> {
    // row_energy[k] = Σ_j u_j[k]², the squared projection of e_k onto the span.
    let mut row_energy = vec![0.0; n];
    for c in slots.iter().flatten() {
        for (e, x) in row_energy.iter_mut().zip(c) {
            *e += x * x;
        }
    }
    for slot in 0..slots.len() {
        if slots[slot].is_some() {
            continue;
        }
        let k = row_energy
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let mut cand = vec![0.0; n];
        cand[k] = 1.0;
        for _ in 0..2 {
            for c in slots.iter().flatten() {
                let p = dot(&cand, c);
                for (x, y) in cand.iter_mut().zip(c) {
                    *x -= p * y;
                }
            }
        }
        let norm = dot(&cand, &cand).sqrt();
        cand.iter_mut().for_each(|x| *x /= norm);
        for (e, x) in row_energy.iter_mut().zip(&cand) {
            *e += x * x;
        }
        slots[slot] = Some(cand);
    }
    let mut m = DMatrix::zeros(n, slots.len());
    for (j, c) in slots.into_iter().enumerate() {
        m.column_mut(j).copy_from_slice(&c.expect("filled"));
    }
    m
}

fn largest_entry_negative(col: nalgebra::DVectorView<'_, f64>) -> bool {
    let mut best = 0.0f64;
    let mut neg = false;
    for &x in col.iter() {
        if x.abs() > best {
            best = x.abs();
            neg = x < 0.0;
        }
    }
    neg
}

fn fix_signs(f: &mut SvdFactors) {
    let k = f.sigma.len();
    for i in 0..f.u.ncols() {
        if largest_entry_negative(f.u.column(i)) {
            f.u.column_mut(i).neg_mut();
            if i < k {
                f.v.column_mut(i).neg_mut();
            }
        }
    }
    for i in k..f.v.ncols() {
        if largest_entry_negative(f.v.column(i)) {
            f.v.column_mut(i).neg_mut();
        }
    }
}

/// `max |MᵀM − I|`.
pub fn orthonormality_residual(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// `‖U Σ Vᵀ − X‖_F / max(‖X‖_F, ε)`.
pub fn reconstruction_residual(x: &DMatrix<f64>, f: &SvdFactors) -> f64 {
    (f.reconstruct() - x).norm() / x.norm().max(f64::MIN_POSITIVE)
}
