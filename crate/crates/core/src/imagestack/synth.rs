//! Procedural clean images.
//!
//! A smooth colour gradient, a handful of flat-coloured ellipses and
//! rectangles, and a `1/f^α` random texture. The texture gives the images
//! the slowly decaying singular-value spectrum of natural photographs;
//! without it the scenes are close to low rank and additive noise stops
//! looking vector-dominated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::image::Image;
use crate::lindecomp::fourier::fft2_inplace;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    /// Standard deviation of the added texture field.
    pub texture: f64,
    /// Spectral exponent of the texture amplitude, `|G(f)| ∝ 1/|f|^α`.
    pub spectral_exponent: f64,
    pub min_shapes: usize,
    pub max_shapes: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            texture: 0.2,
            spectral_exponent: 1.0,
            min_shapes: 4,
            max_shapes: 8,
        }
    }
}

pub fn synthesize_clean(height: usize, width: usize, channels: usize, seed: u64) -> Result<Image> {
    synthesize_clean_with(height, width, channels, seed, &SceneParams::default())
}

pub fn synthesize_clean_with(
    height: usize,
    width: usize,
    channels: usize,
    seed: u64,
    params: &SceneParams,
) -> Result<Image> {
    if height == 0 || width == 0 || (channels != 1 && channels != 3) {
        return Err(Error::InvalidParameter(format!(
            "cannot synthesize a {height}x{width}x{channels} image"
        )));
    }
    if params.max_shapes < params.min_shapes {
        return Err(Error::InvalidParameter("max_shapes < min_shapes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w, c) = (height, width, channels);
    let mut data = vec![0.0f64; h * w * c];

    for ci in 0..c {
        let base = rng.random_range(0.2..0.6);
        let gx = rng.random_range(-0.2..0.2);
        let gy = rng.random_range(-0.2..0.2);
        for y in 0..h {
            for x in 0..w {
                data[(y * w + x) * c + ci] = base + gx * x as f64 / w as f64 + gy * y as f64 / h as f64;
            }
        }
    }

    let n_shapes = rng.random_range(params.min_shapes..=params.max_shapes);
    for _ in 0..n_shapes {
        let colour: Vec<f64> = (0..c).map(|_| rng.random_range(0.1..0.9)).collect();
        let (cx, cy) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let (rx, ry) = (rng.random_range(0.05..0.3), rng.random_range(0.05..0.3));
        let ellipse = rng.random_bool(0.5);
        let alpha = rng.random_range(0.5..1.0);
        for y in 0..h {
            let dy = (y as f64 / h as f64 - cy) / ry;
            for x in 0..w {
                let dx = (x as f64 / w as f64 - cx) / rx;
                let inside = if ellipse {
                    dx * dx + dy * dy < 1.0
                } else {
                    dx.abs() < 1.0 && dy.abs() < 1.0
                };
                if inside {
                    for (ci, col) in colour.iter().enumerate() {
                        let v = &mut data[(y * w + x) * c + ci];
                        *v = *v * (1.0 - alpha) + alpha * col;
                    }
                }
            }
        }
    }

    if params.texture > 0.0 {
        for ci in 0..c {
            let tex = power_law_field(h, w, params.spectral_exponent, &mut rng);
            for (i, t) in tex.iter().enumerate() {
                data[i * c + ci] += params.texture * t;
            }
        }
    }

    let data = data.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect();
    Image::new(h, w, c, data)
}

/// Zero-mean, unit-variance random field with amplitude spectrum `1/|f|^α`.
fn power_law_field(h: usize, w: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..h * w)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    fft2_inplace(&mut buf, h, w, false);
    let freq = |k: usize, n: usize| {
        let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        k / n as f64
    };
    for u in 0..h {
        for v in 0..w {
            let (fu, fv) = (freq(u, h), freq(v, w));
            let r = (fu * fu + fv * fv).sqrt();
            let g = &mut buf[u * w + v];
            *g = if r == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                *g / r.powf(alpha)
            };
        }
    }
    fft2_inplace(&mut buf, h, w, true);
    let field: Vec<f64> = buf.iter().map(|z| z.re).collect();
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let std = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std > 0.0 {
        field.iter().map(|v| (v - mean) / std).collect()
    } else {
        vec![0.0; field.len()]
    }
}
