use serde::{Deserialize, Serialize};

use super::real::matmul;
use super::Real;

/// Zero padding on each side of the spatial dims.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub fn uniform(p: usize) -> Self {
        Padding {
            top: p,
            bottom: p,
            left: p,
            right: p,
        }
    }

    /// Output size equal to input size for stride 1; for even kernels the
    /// extra row/column of padding goes at the bottom/right.
    pub fn same(k: usize) -> Self {
        let lo = (k - 1) / 2;
        let hi = k - 1 - lo;
        Padding {
            top: lo,
            bottom: hi,
            left: lo,
            right: hi,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub pad: Padding,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn new(cin: usize, h: usize, w: usize, kh: usize, kw: usize, pad: Padding) -> Option<Self> {
        let ph = h + pad.top + pad.bottom;
        let pw = w + pad.left + pad.right;
        if ph < kh || pw < kw {
            return None;
        }
        Some(ConvGeom {
            cin,
            h,
            w,
            kh,
            kw,
            pad,
            oh: ph - kh + 1,
            ow: pw - kw + 1,
        })
    }

    pub fn k(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    pub fn p(&self) -> usize {
        self.oh * self.ow
    }

    /// Valid output-column range `[lo, hi)` for kernel column `kx`.
    fn ox_range(&self, kx: usize) -> (usize, usize) {
        let lo = self.pad.left.saturating_sub(kx);
        let hi = (self.w + self.pad.left).saturating_sub(kx).min(self.ow);
        (lo.min(hi), hi)
    }
}

/// Unfolds one `(cin, h, w)` image into a `(cin·kh·kw) × (oh·ow)` matrix.
pub(crate) fn im2col<T: Real>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let p = g.p();
    for ci in 0..g.cin {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = &mut cols[((ci * g.kh + ky) * g.kw + kx) * p..][..p];
                let (lo, hi) = g.ox_range(kx);
                for oy in 0..g.oh {
                    let dst = &mut row[oy * g.ow..(oy + 1) * g.ow];
                    let iy = oy + ky;
                    if iy < g.pad.top || iy - g.pad.top >= g.h || lo >= hi {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[(iy - g.pad.top) * g.w..];
                    dst[..lo].iter_mut().for_each(|v| *v = T::zero());
                    dst[hi..].iter_mut().for_each(|v| *v = T::zero());
                    let ix0 = lo + kx - g.pad.left;
                    dst[lo..hi].copy_from_slice(&src[ix0..ix0 + (hi - lo)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back into `dx`.
pub(crate) fn col2im<T: Real>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let p = g.p();
    for ci in 0..g.cin {
        let plane = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = &cols[((ci * g.kh + ky) * g.kw + kx) * p..][..p];
                let (lo, hi) = g.ox_range(kx);
                for oy in 0..g.oh {
                    let iy = oy + ky;
                    if iy < g.pad.top || iy - g.pad.top >= g.h || lo >= hi {
                        continue;
                    }
                    let ix0 = lo + kx - g.pad.left;
                    let dst = &mut plane[(iy - g.pad.top) * g.w + ix0..][..hi - lo];
                    for (d, s) in dst.iter_mut().zip(&row[oy * g.ow + lo..oy * g.ow + hi]) {
                        *d += *s;
                    }
                }
            }
        }
    }
}

/// Forward convolution over a batch. Returns the output and the unfolded
/// inputs (kept for the backward pass).
pub(crate) fn conv2d_forward<T: Real>(
    x: &[T],
    batch: usize,
    g: &ConvGeom,
    w: &[T],
    cout: usize,
    bias: Option<&[T]>,
) -> (Vec<T>, Vec<T>) {
    let (k, p) = (g.k(), g.p());
    let in_len = g.cin * g.h * g.w;
    let mut cols = vec![T::zero(); batch * k * p];
    let mut out = vec![T::zero(); batch * cout * p];
    for b in 0..batch {
        let cb = &mut cols[b * k * p..(b + 1) * k * p];
        im2col(&x[b * in_len..(b + 1) * in_len], g, cb);
        let ob = &mut out[b * cout * p..(b + 1) * cout * p];
        if let Some(bias) = bias {
            for (co, bv) in bias.iter().enumerate() {
                ob[co * p..(co + 1) * p].iter_mut().for_each(|v| *v = *bv);
            }
        }
        matmul(cout, k, p, w, false, cb, false, ob, bias.is_some());
    }
    (out, cols)
}

/// Gradients of a convolution given the output gradient. Each returned
/// buffer is `None` when that input does not need a gradient.
pub(crate) struct ConvGrads<T> {
    pub dx: Option<Vec<T>>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

pub(crate) fn conv2d_backward<T: Real>(
    dy: &[T],
    cols: &[T],
    batch: usize,
    g: &ConvGeom,
    w: &[T],
    cout: usize,
    need_dx: bool,
) -> ConvGrads<T> {
    let (k, p) = (g.k(), g.p());
    let in_len = g.cin * g.h * g.w;
    let mut dw = vec![T::zero(); cout * k];
    let mut db = vec![T::zero(); cout];
    let mut dx = need_dx.then(|| vec![T::zero(); batch * in_len]);
    let mut dcols = vec![T::zero(); if need_dx { k * p } else { 0 }];
    for b in 0..batch {
        let dyb = &dy[b * cout * p..(b + 1) * cout * p];
        for (co, d) in db.iter_mut().enumerate() {
            *d += dyb[co * p..(co + 1) * p].iter().copied().sum::<T>();
        }
        matmul(
            cout,
            p,
            k,
            dyb,
            false,
            &cols[b * k * p..(b + 1) * k * p],
            true,
            &mut dw,
            true,
        );
        if let Some(dx) = &mut dx {
            matmul(k, cout, p, w, true, dyb, false, &mut dcols, false);
            col2im(&dcols, g, &mut dx[b * in_len..(b + 1) * in_len]);
        }
    }
    ConvGrads { dx, dw, db }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[f64], g: &ConvGeom, w: &[f64], cout: usize) -> Vec<f64> {
        let mut out = vec![0.0; cout * g.oh * g.ow];
        for co in 0..cout {
            for oy in 0..g.oh {
                for ox in 0..g.ow {
                    let mut acc = 0.0;
                    for ci in 0..g.cin {
                        for ky in 0..g.kh {
                            for kx in 0..g.kw {
                                let iy = oy as isize + ky as isize - g.pad.top as isize;
                                let ix = ox as isize + kx as isize - g.pad.left as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < g.h && (ix as usize) < g.w {
                                    acc += x[(ci * g.h + iy as usize) * g.w + ix as usize]
                                        * w[((co * g.cin + ci) * g.kh + ky) * g.kw + kx];
                                }
                            }
                        }
                    }
                    out[(co * g.oh + oy) * g.ow + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn matches_direct_convolution() {
        for (k, pad) in [
            (3, Padding::uniform(1)),
            (4, Padding::same(4)),
            (2, Padding::uniform(0)),
        ] {
            let g = ConvGeom::new(2, 5, 6, k, k, pad).unwrap();
            let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
            let w: Vec<f64> = (0..3 * 2 * k * k).map(|i| (i as f64 * 0.11).cos()).collect();
            let (out, _) = conv2d_forward(&x, 1, &g, &w, 3, None);
            let expect = naive(&x, &g, &w, 3);
            for (a, b) in out.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_padding_keeps_size() {
        for k in 1..6 {
            let g = ConvGeom::new(1, 7, 9, k, k, Padding::same(k)).unwrap();
            assert_eq!((g.oh, g.ow), (7, 9));
        }
    }

    /// `<im2col(x), c> = <x, col2im(c)>`.
    #[test]
    fn col2im_is_adjoint() {
        let g = ConvGeom::new(2, 4, 5, 3, 3, Padding::same(3)).unwrap();
        let x: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let c: Vec<f64> = (0..g.k() * g.p()).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut cols = vec![0.0; c.len()];
        im2col(&x, &g, &mut cols);
        let mut back = vec![0.0; x.len()];
        col2im(&c, &g, &mut back);
        let lhs: f64 = cols.iter().zip(&c).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
