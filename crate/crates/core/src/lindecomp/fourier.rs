use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::{Complex, Complex64};
use rustfft::{Fft, FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Planned 2D transform over a row-major `h × w` complex buffer.
///
/// The forward transform is unnormalized, `G(u,v) = Σ x(m,n) e^{−j2π(um/h + vn/w)}`;
/// the inverse carries the `1/(hw)` factor.
pub struct Fft2<T: FftNum> {
    h: usize,
    w: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
    scratch: Vec<Complex<T>>,
    transposed: Vec<Complex<T>>,
}

impl<T: FftNum> Fft2<T> {
    pub fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(w);
        let row_inv = planner.plan_fft_inverse(w);
        let col_fwd = planner.plan_fft_forward(h);
        let col_inv = planner.plan_fft_inverse(h);
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Fft2 {
            h,
            w,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            scratch: vec![Complex::new(T::zero(), T::zero()); scratch_len],
            transposed: vec![Complex::new(T::zero(), T::zero()); h * w],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn forward(&mut self, buf: &mut [Complex<T>]) {
        self.run(buf, false);
    }

    /// Inverse transform including the `1/(hw)` normalization.
    pub fn inverse(&mut self, buf: &mut [Complex<T>]) {
        self.run(buf, true);
        let scale = T::from_f64(1.0 / (self.h * self.w) as f64).expect("representable");
        for z in buf.iter_mut() {
            *z = *z * scale;
        }
    }

    fn run(&mut self, buf: &mut [Complex<T>], inverse: bool) {
        let (h, w) = (self.h, self.w);
        assert_eq!(buf.len(), h * w, "buffer does not match the planned shape");
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process_with_scratch(buf, &mut self.scratch);
        for y in 0..h {
            for x in 0..w {
                self.transposed[x * h + y] = buf[y * w + x];
            }
        }
        col.process_with_scratch(&mut self.transposed, &mut self.scratch);
        for x in 0..w {
            for y in 0..h {
                buf[y * w + x] = self.transposed[x * h + y];
            }
        }
    }
}

/// One-shot 2D transform over a row-major buffer.
pub fn fft2_inplace<T: FftNum>(buf: &mut [Complex<T>], h: usize, w: usize, inverse: bool) {
    let mut plan = Fft2::new(h, w);
    if inverse {
        plan.inverse(buf);
    } else {
        plan.forward(buf);
    }
}

/// Per-channel amplitude and phase of the 2D DFT.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    height: usize,
    width: usize,
    amplitude: Vec<DMatrix<f64>>,
    phase: Vec<DMatrix<f64>>,
}

impl Spectrum {
    pub fn new(amplitude: Vec<DMatrix<f64>>, phase: Vec<DMatrix<f64>>) -> Result<Self> {
        let (h, w) = amplitude
            .first()
            .map(|a| a.shape())
            .ok_or_else(|| Error::InvalidParameter("spectrum needs a channel".into()))?;
        if amplitude.len() != phase.len() || amplitude.iter().chain(&phase).any(|m| m.shape() != (h, w)) {
            return Err(Error::ShapeMismatch("amplitude/phase shapes differ".into()));
        }
        if amplitude
            .iter()
            .flat_map(|m| m.iter())
            .any(|a| !(*a >= 0.0) || !a.is_finite())
        {
            return Err(Error::InvalidParameter(
                "amplitude must be finite and nonnegative".into(),
            ));
        }
        if phase.iter().flat_map(|m| m.iter()).any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("phase"));
        }
        Ok(Spectrum {
            height: h,
            width: w,
            amplitude,
            phase,
        })
    }

    pub fn channels(&self) -> usize {
        self.amplitude.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn amplitude(&self) -> &[DMatrix<f64>] {
        &self.amplitude
    }

    pub fn phase(&self) -> &[DMatrix<f64>] {
        &self.phase
    }

    /// Complex coefficients `A·e^{iP}` of one channel, row-major.
    pub fn coefficients(&self, c: usize) -> Vec<Complex64> {
        let (h, w) = self.shape();
        let mut out = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                out.push(Complex64::from_polar(self.amplitude[c][(y, x)], self.phase[c][(y, x)]));
            }
        }
        out
    }
}

fn to_row_major(plane: &DMatrix<f64>) -> Vec<Complex64> {
    let (h, w) = plane.shape();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            out.push(Complex64::new(plane[(y, x)], 0.0));
        }
    }
    out
}

/// Phase in `(−π, π]`.
#[inline]
pub fn phase_of(z: Complex64) -> f64 {
    let p = z.im.atan2(z.re);
    if p <= -PI {
        PI
    } else {
        p
    }
}

/// Unnormalized forward DFT of one real plane, row-major coefficients.
pub fn dft2_complex(plane: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if plane.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dft2 input"));
    }
    let (h, w) = plane.shape();
    let mut buf = to_row_major(plane);
    fft2_inplace(&mut buf, h, w, false);
    Ok(buf)
}

pub fn dft2(planes: &[DMatrix<f64>]) -> Result<Spectrum> {
    let mut amplitude = Vec::with_capacity(planes.len());
    let mut phase = Vec::with_capacity(planes.len());
    for p in planes {
        let (h, w) = p.shape();
        let g = dft2_complex(p)?;
        amplitude.push(DMatrix::from_fn(h, w, |y, x| g[y * w + x].norm()));
        phase.push(DMatrix::from_fn(h, w, |y, x| phase_of(g[y * w + x])));
    }
    Spectrum::new(amplitude, phase)
}

/// Inverse DFT returning the real part and the largest relative imaginary
/// residual `‖Im‖_F / max(‖Re‖_F, ε)` over channels.
pub fn idft2_with_residual(s: &Spectrum) -> Result<(Vec<DMatrix<f64>>, f64)> {
    let (h, w) = s.shape();
    let mut plan = Fft2::<f64>::new(h, w);
    let mut planes = Vec::with_capacity(s.channels());
    let mut worst = 0.0f64;
    for c in 0..s.channels() {
        let mut buf = s.coefficients(c);
        plan.inverse(&mut buf);
        let re = DMatrix::from_fn(h, w, |y, x| buf[y * w + x].re);
        let im_norm = buf.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
        worst = worst.max(im_norm / re.norm().max(f64::MIN_POSITIVE));
        planes.push(re);
    }
    Ok((planes, worst))
}

pub fn idft2(s: &Spectrum) -> Result<Vec<DMatrix<f64>>> {
    Ok(idft2_with_residual(s)?.0)
}

/// Index of the conjugate-symmetric partner `((h−u) mod h, (w−v) mod w)`.
#[inline]
pub fn conjugate_index(u: usize, v: usize, h: usize, w: usize) -> (usize, usize) {
    ((h - u) % h, (w - v) % w)
}

/// Normalized frequency radius `√((min(u,h−u)/h)² + (min(v,w−v)/w)²)`.
#[inline]
pub fn frequency_radius(u: usize, v: usize, h: usize, w: usize) -> f64 {
    let fu = u.min(h - u) as f64 / h as f64;
    let fv = v.min(w - v) as f64 / w as f64;
    (fu * fu + fv * fv).sqrt()
}
