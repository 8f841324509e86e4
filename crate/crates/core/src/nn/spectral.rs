use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::real::matmul;
use super::Real;
use crate::lindecomp::fourier::Fft2;

/// Nonlinearity applied to the mixed amplitude map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeActivation {
    #[default]
    Identity,
    Relu,
}

/// Values kept from the forward pass of the amplitude operator.
pub(crate) struct SvaoCache<T: Real> {
    /// Spectra `G`, laid out `(b, c, h·w)`.
    spectra: Vec<Complex<T>>,
    /// Mixed amplitudes before the activation.
    mixed: Vec<T>,
}

pub(crate) struct SvaoGeom {
    pub batch: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub eps: f64,
    pub act: AmplitudeActivation,
}

impl SvaoGeom {
    fn n(&self) -> usize {
        self.h * self.w
    }

    fn activate<T: Real>(&self, z: T) -> T {
        match self.act {
            AmplitudeActivation::Identity => z,
            AmplitudeActivation::Relu => z.max(T::zero()),
        }
    }

    fn slope<T: Real>(&self, z: T) -> T {
        match self.act {
            AmplitudeActivation::Identity => T::one(),
            AmplitudeActivation::Relu if z > T::zero() => T::one(),
            AmplitudeActivation::Relu => T::zero(),
        }
    }
}

/// `y = Re IDFT( G · act(W·|G|) / (|G| + eps) )` with `G = DFT(x)` per channel.
/// The ratio is real, so the phase of every coefficient is kept.
pub(crate) fn svao_forward<T: Real>(x: &[T], w: &[T], g: &SvaoGeom) -> (Vec<T>, SvaoCache<T>) {
    let (c, n) = (g.c, g.n());
    let eps = T::of(g.eps);
    let mut plan = Fft2::<T>::new(g.h, g.w);
    let mut spectra: Vec<Complex<T>> = x.iter().map(|v| Complex::new(*v, T::zero())).collect();
    let mut mixed = vec![T::zero(); g.batch * c * n];
    let mut y = vec![T::zero(); g.batch * c * n];
    let mut amp = vec![T::zero(); c * n];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for b in 0..g.batch {
        let off = b * c * n;
        for ch in 0..c {
            plan.forward(&mut spectra[off + ch * n..off + (ch + 1) * n]);
        }
        for (a, z) in amp.iter_mut().zip(&spectra[off..off + c * n]) {
            *a = z.norm();
        }
        matmul(c, c, n, w, false, &amp, false, &mut mixed[off..off + c * n], false);
        for ch in 0..c {
            for k in 0..n {
                let i = ch * n + k;
                let ratio = g.activate(mixed[off + i]) / (amp[i] + eps);
                buf[k] = spectra[off + i] * ratio;
            }
            plan.inverse(&mut buf);
            for k in 0..n {
                y[off + ch * n + k] = buf[k].re;
            }
        }
    }
    (y, SvaoCache { spectra, mixed })
}

pub(crate) fn svao_backward<T: Real>(
    dy: &[T],
    w: &[T],
    g: &SvaoGeom,
    cache: &SvaoCache<T>,
    need_dx: bool,
) -> (Option<Vec<T>>, Vec<T>) {
    let (c, n) = (g.c, g.n());
    let eps = T::of(g.eps);
    let nn = T::of(n as f64);
    let inv_n = T::one() / nn;
    let mut plan = Fft2::<T>::new(g.h, g.w);
    let mut dw = vec![T::zero(); c * c];
    let mut dx = need_dx.then(|| vec![T::zero(); dy.len()]);
    let zero = Complex::new(T::zero(), T::zero());
    let mut g_out = vec![zero; c * n];
    let mut g_spec = vec![zero; c * n];
    let mut amp = vec![T::zero(); c * n];
    let mut g_amp = vec![T::zero(); c * n];
    let mut g_mix = vec![T::zero(); c * n];
    for b in 0..g.batch {
        let off = b * c * n;
        let spec = &cache.spectra[off..off + c * n];
        let mixed = &cache.mixed[off..off + c * n];
        for (z, d) in g_out.iter_mut().zip(&dy[off..off + c * n]) {
            *z = Complex::new(*d, T::zero());
        }
        for ch in 0..c {
            plan.forward(&mut g_out[ch * n..(ch + 1) * n]);
        }
        for i in 0..c * n {
            let go = g_out[i] * inv_n;
            let a = spec[i].norm();
            amp[i] = a;
            let denom = a + eps;
            let act = g.activate(mixed[i]);
            let ratio = act / denom;
            g_spec[i] = go * ratio;
            let g_ratio = spec[i].re * go.re + spec[i].im * go.im;
            g_mix[i] = g_ratio / denom * g.slope(mixed[i]);
            g_amp[i] = -g_ratio * act / (denom * denom);
        }
        matmul(c, n, c, &g_mix, false, &amp, true, &mut dw, true);
        matmul(c, c, n, w, true, &g_mix, false, &mut g_amp, true);
        if let Some(dx) = &mut dx {
            for i in 0..c * n {
                let a = amp[i];
                if a > T::zero() {
                    g_spec[i] += spec[i] * (g_amp[i] / a);
                }
            }
            for ch in 0..c {
                let s = &mut g_spec[ch * n..(ch + 1) * n];
                plan.inverse(s);
                for k in 0..n {
                    dx[off + ch * n + k] = s[k].re * nn;
                }
            }
        }
    }
    (dx, dw)
}
