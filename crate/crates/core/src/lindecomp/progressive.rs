use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fourier::{conjugate_index, dft2_complex, frequency_radius};
use super::svd::svd;
use crate::{Error, Result};

/// Order in which components are accumulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressiveOrder {
    /// Rank-1 terms `σ_i u_i v_iᵀ` by descending `σ_i`.
    SvdRank,
    /// Fourier components by ascending frequency radius.
    FftRadius,
}

impl FromStr for ProgressiveOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svd" | "svd_rank" => Ok(ProgressiveOrder::SvdRank),
            "fft" | "fft_radius" => Ok(ProgressiveOrder::FftRadius),
            _ => Err(Error::InvalidParameter(format!(
                "unknown order '{s}' (expected svd or fft)"
            ))),
        }
    }
}

/// Relative Frobenius error after the first `j` components, `j = 1..=len`.
///
/// The SVD curve has `min(h, w)` entries and is built by explicit rank-1
/// accumulation. The Fourier curve has `h·w` entries; when a frequency is
/// reached its conjugate partner is added with it so the partial
/// reconstruction stays real, and the error is read off the remaining
/// spectral energy.
pub fn progressive_reconstruction(x: &DMatrix<f64>, order: ProgressiveOrder) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("progressive input"));
    }
    let norm = x.norm().max(f64::MIN_POSITIVE);
    match order {
        ProgressiveOrder::SvdRank => {
            let f = svd(x)?;
            let mut residual = x.clone();
            let mut curve = Vec::with_capacity(f.rank_bound());
            for (i, s) in f.sigma().iter().enumerate() {
                let u = f.u().column(i);
                let v = f.v().column(i);
                residual.ger(-s, &u, &v, 1.0);
                curve.push(residual.norm() / norm);
            }
            Ok(curve)
        }
        ProgressiveOrder::FftRadius => {
            let (h, w) = x.shape();
            let g = dft2_complex(x)?;
            let n = h * w;
            let mut idx: Vec<usize> = (0..n).collect();
            let group_of = |i: usize| {
                let (pu, pv) = conjugate_index(i / w, i % w, h, w);
                i.min(pu * w + pv)
            };
            let radius: Vec<f64> = (0..n).map(|i| frequency_radius(i / w, i % w, h, w)).collect();
            idx.sort_by(|&a, &b| {
                radius[a]
                    .total_cmp(&radius[b])
                    .then(group_of(a).cmp(&group_of(b)))
                    .then(a.cmp(&b))
            });
            // Groups in order of first appearance, and how many groups are in
            // after each component.
            let mut seen = vec![false; n];
            let mut group_energy = Vec::new();
            let mut groups_in = Vec::with_capacity(n);
            for &i in &idx {
                let gid = group_of(i);
                if !seen[gid] {
                    seen[gid] = true;
                    let (pu, pv) = conjugate_index(i / w, i % w, h, w);
                    let partner = pu * w + pv;
                    let mut e = g[i].norm_sqr();
                    if partner != i {
                        e += g[partner].norm_sqr();
                    }
                    group_energy.push(e);
                }
                groups_in.push(group_energy.len());
            }
            let mut tail = vec![0.0; group_energy.len() + 1];
            for k in (0..group_energy.len()).rev() {
                tail[k] = tail[k + 1] + group_energy[k];
            }
            Ok(groups_in
                .into_iter()
                .map(|k| (tail[k] / n as f64).sqrt() / norm)
                .collect())
        }
    }
}

/// CSV with one row per component count: `components,relative_error`.
pub fn curve_to_csv<W: std::io::Write>(curve: &[f64], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["components", "relative_error"])?;
    for (j, e) in curve.iter().enumerate() {
        wr.write_record([(j + 1).to_string(), format!("{e:.17e}")])?;
    }
    wr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindecomp::fourier::Fft2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rustfft::num_complex::Complex64;

    fn random(h: usize, w: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(h, w, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn svd_curve_monotone_and_complete() {
        let x = random(12, 9, 1);
        let c = progressive_reconstruction(&x, ProgressiveOrder::SvdRank).unwrap();
        assert_eq!(c.len(), 9);
        assert!(c.windows(2).all(|p| p[1] <= p[0] + 1e-15));
        assert!(*c.last().unwrap() <= 1e-5);
    }

    #[test]
    fn fft_curve_complete_and_monotone() {
        let x = random(7, 10, 2);
        let c = progressive_reconstruction(&x, ProgressiveOrder::FftRadius).unwrap();
        assert_eq!(c.len(), 70);
        assert!(c.windows(2).all(|p| p[1] <= p[0] + 1e-15));
        assert!(*c.last().unwrap() <= 1e-5);
    }

    /// Explicit partial inverse transforms reproduce the energy-based curve.
    #[test]
    fn fft_curve_matches_explicit_partial_inverse() {
        let (h, w) = (6, 5);
        let x = random(h, w, 3);
        let curve = progressive_reconstruction(&x, ProgressiveOrder::FftRadius).unwrap();
        let g = dft2_complex(&x).unwrap();
        let mut order: Vec<usize> = (0..h * w).collect();
        let radius = |i: usize| frequency_radius(i / w, i % w, h, w);
        let group = |i: usize| {
            let (pu, pv) = conjugate_index(i / w, i % w, h, w);
            i.min(pu * w + pv)
        };
        order.sort_by(|&a, &b| {
            radius(a)
                .total_cmp(&radius(b))
                .then(group(a).cmp(&group(b)))
                .then(a.cmp(&b))
        });
        let mut kept = vec![false; h * w];
        let mut plan = Fft2::<f64>::new(h, w);
        for (j, &i) in order.iter().enumerate() {
            let (pu, pv) = conjugate_index(i / w, i % w, h, w);
            kept[i] = true;
            kept[pu * w + pv] = true;
            let mut buf: Vec<Complex64> = g
                .iter()
                .enumerate()
                .map(|(k, z)| if kept[k] { *z } else { Complex64::new(0.0, 0.0) })
                .collect();
            plan.inverse(&mut buf);
            let rec = DMatrix::from_fn(h, w, |y, xx| buf[y * w + xx].re);
            let imag: f64 = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            assert!(imag < 1e-12);
            let err = (&rec - &x).norm() / x.norm();
            assert!((err - curve[j]).abs() < 1e-12, "j={j}: {err} vs {}", curve[j]);
        }
    }

    #[test]
    fn csv_has_one_row_per_component() {
        let mut out = Vec::new();
        curve_to_csv(&[0.5, 0.25, 0.0], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("components,relative_error\n1,"));
    }
}
