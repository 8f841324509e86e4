use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::image::Image;
use crate::{Error, Result};

/// The five degradation families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DegradationKind {
    Rain,
    GaussianNoise,
    Blur,
    Haze,
    LowLight,
}

impl DegradationKind {
    pub const ALL: [DegradationKind; 5] = [
        DegradationKind::Rain,
        DegradationKind::GaussianNoise,
        DegradationKind::Blur,
        DegradationKind::Haze,
        DegradationKind::LowLight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DegradationKind::Rain => "Rain",
            DegradationKind::GaussianNoise => "GaussianNoise",
            DegradationKind::Blur => "Blur",
            DegradationKind::Haze => "Haze",
            DegradationKind::LowLight => "LowLight",
        }
    }
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DegradationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "rain" => Ok(DegradationKind::Rain),
            "gaussiannoise" | "noise" => Ok(DegradationKind::GaussianNoise),
            "blur" => Ok(DegradationKind::Blur),
            "haze" => Ok(DegradationKind::Haze),
            "lowlight" => Ok(DegradationKind::LowLight),
            _ => Err(Error::InvalidParameter(format!(
                "unknown degradation kind '{s}' (expected one of Rain, GaussianNoise, Blur, Haze, LowLight)"
            ))),
        }
    }
}

/// Rain streaks: `count` line segments, direction `angle_deg ± angle_jitter_deg`
/// measured from the horizontal axis (90° is vertical), blurred along the
/// streak direction and added to every channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RainParams {
    pub count: usize,
    pub angle_deg: f64,
    pub angle_jitter_deg: f64,
    pub length_min: f64,
    pub length_max: f64,
    pub intensity_min: f64,
    pub intensity_max: f64,
    pub blur_length: f64,
}

impl Default for RainParams {
    fn default() -> Self {
        RainParams {
            count: 60,
            angle_deg: 90.0,
            angle_jitter_deg: 20.0,
            length_min: 8.0,
            length_max: 24.0,
            intensity_min: 0.15,
            intensity_max: 0.5,
            blur_length: 3.0,
        }
    }
}

/// Additive white Gaussian noise; `sigma` is in 8-bit units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case", deny_unknown_fields)]
pub enum BlurParams {
    Gaussian { sigma: f64 },
    Motion { length: f64, angle_deg: f64 },
}

/// Scattering model `I = J·t + A·(1 − t)`. With `depth_ramp > 0` the depth
/// grows linearly from top to bottom and the transmission becomes
/// `t^(1 + depth_ramp · y/(h−1))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HazeParams {
    pub transmission: f64,
    pub airlight: f64,
    #[serde(default)]
    pub depth_ramp: f64,
}

/// `I = (J·scale)^gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowLightParams {
    pub scale: f64,
    #[serde(default = "one")]
    pub gamma: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum Degradation {
    Rain(RainParams),
    GaussianNoise(NoiseParams),
    Blur(BlurParams),
    Haze(HazeParams),
    LowLight(LowLightParams),
}

impl Degradation {
    pub fn kind(&self) -> DegradationKind {
        match self {
            Degradation::Rain(_) => DegradationKind::Rain,
            Degradation::GaussianNoise(_) => DegradationKind::GaussianNoise,
            Degradation::Blur(_) => DegradationKind::Blur,
            Degradation::Haze(_) => DegradationKind::Haze,
            Degradation::LowLight(_) => DegradationKind::LowLight,
        }
    }

    pub fn noise(sigma: f64) -> Self {
        Degradation::GaussianNoise(NoiseParams { sigma })
    }

    pub fn gaussian_blur(sigma: f64) -> Self {
        Degradation::Blur(BlurParams::Gaussian { sigma })
    }

    pub fn haze(transmission: f64, airlight: f64) -> Self {
        Degradation::Haze(HazeParams {
            transmission,
            airlight,
            depth_ramp: 0.0,
        })
    }

    pub fn low_light(scale: f64, gamma: f64) -> Self {
        Degradation::LowLight(LowLightParams { scale, gamma })
    }

    pub fn rain() -> Self {
        Degradation::Rain(RainParams::default())
    }

    /// Builds a degradation from a kind and a JSON params object; missing
    /// optional keys take their defaults.
    pub fn from_parts(kind: DegradationKind, params: serde_json::Value) -> Result<Self> {
        let v = serde_json::json!({ "kind": kind.name(), "params": params });
        let d: Degradation =
            serde_json::from_value(v).map_err(|e| Error::InvalidParameter(format!("{kind} params: {e}")))?;
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Degradation::GaussianNoise(p) => {
                if !(1.0..=100.0).contains(&p.sigma) {
                    return bad(format!("noise sigma {} outside [1, 100]", p.sigma));
                }
            }
            Degradation::Blur(BlurParams::Gaussian { sigma }) => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("blur sigma {sigma} must be positive"));
                }
            }
            Degradation::Blur(BlurParams::Motion { length, angle_deg }) => {
                if !(*length >= 1.0 && length.is_finite()) || !angle_deg.is_finite() {
                    return bad(format!("motion length {length} must be >= 1"));
                }
            }
            Degradation::Haze(p) => {
                if !(p.transmission > 0.0 && p.transmission <= 1.0) {
                    return bad(format!("transmission {} outside (0, 1]", p.transmission));
                }
                if !(0.0..=1.0).contains(&p.airlight) {
                    return bad(format!("airlight {} outside [0, 1]", p.airlight));
                }
                if !(p.depth_ramp >= 0.0 && p.depth_ramp.is_finite()) {
                    return bad(format!("depth_ramp {} must be >= 0", p.depth_ramp));
                }
            }
            Degradation::LowLight(p) => {
                if !(p.scale > 0.0 && p.scale <= 1.0) {
                    return bad(format!("low-light scale {} outside (0, 1]", p.scale));
                }
                if !(p.gamma > 0.0 && p.gamma.is_finite()) {
                    return bad(format!("gamma {} must be positive", p.gamma));
                }
            }
            Degradation::Rain(p) => {
                if !(p.length_min >= 1.0 && p.length_max >= p.length_min) {
                    return bad(format!(
                        "rain length range [{}, {}] invalid",
                        p.length_min, p.length_max
                    ));
                }
                if !(0.0..=1.0).contains(&p.intensity_min) || !(p.intensity_min..=1.0).contains(&p.intensity_max) {
                    return bad(format!(
                        "rain intensity range [{}, {}] invalid",
                        p.intensity_min, p.intensity_max
                    ));
                }
                if !(p.blur_length >= 1.0) || !p.angle_deg.is_finite() || !(p.angle_jitter_deg >= 0.0) {
                    return bad("rain blur_length must be >= 1 and angles finite".into());
                }
            }
        }
        Ok(())
    }
}

/// A degradation together with the seed that drives its randomness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    #[serde(flatten)]
    pub degradation: Degradation,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(degradation: Degradation, seed: u64) -> Self {
        DegradationSpec { degradation, seed }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: DegradationSpec = serde_json::from_str(s)?;
        spec.degradation.validate()?;
        Ok(spec)
    }
}

/// Applies a seeded degradation. Output is clamped to `[0, 1]` and is
/// bitwise reproducible for identical `(clean, spec)`.
pub fn apply_degradation(clean: &Image, spec: &DegradationSpec) -> Result<Image> {
    clean.ensure_generator_size()?;
    spec.degradation.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let out = match &spec.degradation {
        Degradation::GaussianNoise(p) => {
            let normal = Normal::new(0.0, p.sigma / 255.0).expect("sigma validated");
            clean.map_clamped(|v| (v as f64 + normal.sample(&mut rng)) as f32)
        }
        Degradation::LowLight(p) => {
            let (s, g) = (p.scale, p.gamma);
            if g == 1.0 {
                clean.map_clamped(|v| (v as f64 * s) as f32)
            } else {
                clean.map_clamped(|v| (v as f64 * s).powf(g) as f32)
            }
        }
        Degradation::Haze(p) => haze(clean, p),
        Degradation::Blur(p) => {
            let kernel = match p {
                BlurParams::Gaussian { sigma } => gaussian_kernel(*sigma),
                BlurParams::Motion { length, angle_deg } => motion_kernel(*length, *angle_deg),
            };
            convolve_channels(clean, &kernel)
        }
        Degradation::Rain(p) => rain(clean, p, &mut rng),
    };
    Ok(out)
}

fn haze(clean: &Image, p: &HazeParams) -> Image {
    let (h, w, c) = clean.shape();
    let mut data = clean.data().to_vec();
    for y in 0..h {
        let t = if p.depth_ramp > 0.0 && h > 1 {
            let depth = y as f64 / (h - 1) as f64;
            p.transmission.powf(1.0 + p.depth_ramp * depth)
        } else {
            p.transmission
        };
        let veil = p.airlight * (1.0 - t);
        for v in &mut data[y * w * c..(y + 1) * w * c] {
            *v = ((*v as f64) * t + veil).clamp(0.0, 1.0) as f32;
        }
    }
    Image::from_raw_unchecked(h, w, c, data)
}

/// Square odd-sized convolution kernel, normalized to unit sum.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    radius: usize,
    taps: Vec<f64>,
}

impl Kernel {
    fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    fn normalized(radius: usize, mut taps: Vec<f64>) -> Kernel {
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        Kernel { radius, taps }
    }
}

pub fn gaussian_kernel(sigma: f64) -> Kernel {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let side = 2 * radius + 1;
    let mut taps = Vec::with_capacity(side * side);
    for dy in 0..side {
        for dx in 0..side {
            let (y, x) = (dy as f64 - radius as f64, dx as f64 - radius as f64);
            taps.push((-(x * x + y * y) / (2.0 * sigma * sigma)).exp());
        }
    }
    Kernel::normalized(radius, taps)
}

/// Line kernel of the given length along `angle_deg` (from the horizontal
/// axis), rasterized with bilinear splatting.
pub fn motion_kernel(length: f64, angle_deg: f64) -> Kernel {
    let radius = ((length - 1.0) / 2.0).ceil().max(1.0) as usize;
    let side = 2 * radius + 1;
    let mut taps = vec![0.0; side * side];
    let theta = angle_deg.to_radians();
    let (dx, dy) = (theta.cos(), -theta.sin());
    let samples = (length * 4.0).ceil().max(1.0) as usize;
    let half = (length - 1.0) / 2.0;
    for i in 0..=samples {
        let s = if samples == 0 {
            0.0
        } else {
            -half + 2.0 * half * i as f64 / samples as f64
        };
        let (x, y) = (radius as f64 + s * dx, radius as f64 + s * dy);
        splat(&mut taps, side, y, x, 1.0);
    }
    Kernel::normalized(radius, taps)
}

fn splat(buf: &mut [f64], side: usize, y: f64, x: f64, weight: f64) {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    for (oy, wy) in [(0, 1.0 - fy), (1, fy)] {
        for (ox, wx) in [(0, 1.0 - fx), (1, fx)] {
            let (yy, xx) = (y0 as isize + oy, x0 as isize + ox);
            if yy >= 0 && xx >= 0 && (yy as usize) < side && (xx as usize) < side {
                buf[yy as usize * side + xx as usize] += weight * wy * wx;
            }
        }
    }
}

/// Mirror index without repeating the edge sample (`d c b | a b c d | c b a`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

fn convolve_plane(src: &[f64], h: usize, w: usize, kernel: &Kernel) -> Vec<f64> {
    let r = kernel.radius as isize;
    let side = kernel.side();
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..side {
                let sy = reflect(y as isize + ky as isize - r, h);
                let row = &kernel.taps[ky * side..(ky + 1) * side];
                for (kx, &t) in row.iter().enumerate() {
                    if t != 0.0 {
                        let sx = reflect(x as isize + kx as isize - r, w);
                        acc += t * src[sy * w + sx];
                    }
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn convolve_channels(img: &Image, kernel: &Kernel) -> Image {
    let (h, w, c) = img.shape();
    let mut data = vec![0.0f32; h * w * c];
    for ci in 0..c {
        let plane: Vec<f64> = (0..h * w).map(|i| img.data()[i * c + ci] as f64).collect();
        let out = convolve_plane(&plane, h, w, kernel);
        for (i, v) in out.into_iter().enumerate() {
            data[i * c + ci] = v.clamp(0.0, 1.0) as f32;
        }
    }
    Image::from_raw_unchecked(h, w, c, data)
}

fn rain(clean: &Image, p: &RainParams, rng: &mut ChaCha8Rng) -> Image {
    let (h, w, c) = clean.shape();
    let mut layer = vec![0.0f64; h * w];
    for _ in 0..p.count {
        let angle = p.angle_deg + rng.random_range(-1.0..=1.0) * p.angle_jitter_deg;
        let length = uniform(rng, p.length_min, p.length_max);
        let intensity = uniform(rng, p.intensity_min, p.intensity_max);
        let cx = rng.random_range(0.0..w as f64);
        let cy = rng.random_range(0.0..h as f64);
        let theta = angle.to_radians();
        let (dx, dy) = (theta.cos(), -theta.sin());
        let steps = (2.0 * length).ceil() as usize;
        for i in 0..=steps {
            let s = -length / 2.0 + length * i as f64 / steps as f64;
            let (x, y) = ((cx + s * dx).round(), (cy + s * dy).round());
            if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
                let idx = y as usize * w + x as usize;
                layer[idx] = layer[idx].max(intensity);
            }
        }
    }
    // Streaks are within the jitter of the centre angle; blur along the centre.
    let blurred = convolve_plane(&layer, h, w, &motion_kernel(p.blur_length, p.angle_deg));
    let mut data = clean.data().to_vec();
    for (i, px) in data.chunks_mut(c).enumerate() {
        for v in px {
            *v = (*v as f64 + blurred[i]).clamp(0.0, 1.0) as f32;
        }
    }
    Image::from_raw_unchecked(h, w, c, data)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, c: usize) -> Image {
        let data = (0..h * w * c).map(|i| ((i * 7919) % 1000) as f32 / 1000.0).collect();
        Image::new(h, w, c, data).unwrap()
    }

    #[test]
    fn haze_with_unit_transmission_is_identity() {
        let img = ramp(16, 12, 3);
        let out = apply_degradation(&img, &DegradationSpec::new(Degradation::haze(1.0, 0.7), 1)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn haze_constant_transmission_matches_model() {
        let img = ramp(8, 8, 1);
        let out = apply_degradation(&img, &DegradationSpec::new(Degradation::haze(0.4, 0.8), 0)).unwrap();
        for (o, i) in out.data().iter().zip(img.data()) {
            let expect = (*i as f64 * 0.4 + 0.8 * 0.6) as f32;
            assert_eq!(*o, expect);
        }
    }

    #[test]
    fn haze_depth_ramp_darkens_transmission_downwards() {
        let img = Image::filled(16, 16, 1, 0.0).unwrap();
        let spec = DegradationSpec::new(
            Degradation::Haze(HazeParams {
                transmission: 0.8,
                airlight: 1.0,
                depth_ramp: 2.0,
            }),
            0,
        );
        let out = apply_degradation(&img, &spec).unwrap();
        assert!((out.get(0, 0, 0) - 0.2).abs() < 1e-6);
        assert!(out.get(15, 0, 0) > out.get(0, 0, 0));
    }

    #[test]
    fn low_light_identity_parameters() {
        let img = ramp(9, 10, 3);
        let out = apply_degradation(&img, &DegradationSpec::new(Degradation::low_light(1.0, 1.0), 3)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn low_light_linear_gamma_scales_exactly() {
        let img = ramp(9, 10, 3);
        let out = apply_degradation(&img, &DegradationSpec::new(Degradation::low_light(0.3, 1.0), 3)).unwrap();
        for (o, i) in out.data().iter().zip(img.data()) {
            assert_eq!(*o, (*i as f64 * 0.3) as f32);
        }
    }

    #[test]
    fn noise_std_matches_sigma() {
        let img = Image::filled(128, 128, 1, 0.5).unwrap();
        let out = apply_degradation(&img, &DegradationSpec::new(Degradation::noise(25.0), 42)).unwrap();
        let diffs: Vec<f64> = out
            .data()
            .iter()
            .zip(img.data())
            .map(|(o, i)| (*o - *i) as f64)
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
        let target = 25.0 / 255.0;
        assert!((var.sqrt() - target).abs() / target < 0.10, "std {}", var.sqrt());
    }

    #[test]
    fn every_generator_is_deterministic_and_clamped() {
        let img = ramp(24, 20, 3);
        let cases = [
            Degradation::rain(),
            Degradation::noise(50.0),
            Degradation::gaussian_blur(1.5),
            Degradation::Blur(BlurParams::Motion {
                length: 7.0,
                angle_deg: 30.0,
            }),
            Degradation::haze(0.5, 0.9),
            Degradation::low_light(0.2, 1.8),
        ];
        for d in cases {
            let spec = DegradationSpec::new(d, 7);
            let a = apply_degradation(&img, &spec).unwrap();
            let b = apply_degradation(&img, &spec).unwrap();
            assert_eq!(a.data(), b.data(), "{spec:?}");
            assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn noise_seed_changes_output() {
        let img = ramp(16, 16, 1);
        let a = apply_degradation(&img, &DegradationSpec::new(Degradation::noise(10.0), 1)).unwrap();
        let b = apply_degradation(&img, &DegradationSpec::new(Degradation::noise(10.0), 2)).unwrap();
        assert_ne!(a.data(), b.data());
    }

    #[test]
    fn blur_preserves_constant_image() {
        let img = Image::filled(12, 12, 1, 0.25).unwrap();
        let out = apply_degradation(&img, &DegradationSpec::new(Degradation::gaussian_blur(2.0), 0)).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn kernels_are_normalized() {
        for k in [
            gaussian_kernel(0.7),
            gaussian_kernel(3.0),
            motion_kernel(9.0, 45.0),
            motion_kernel(3.0, 90.0),
        ] {
            assert!((k.taps().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rain_only_brightens() {
        let img = ramp(32, 32, 3);
        let out = apply_degradation(&img, &DegradationSpec::new(Degradation::rain(), 9)).unwrap();
        assert!(out.data().iter().zip(img.data()).all(|(o, i)| o >= i));
        assert!(out.data().iter().zip(img.data()).any(|(o, i)| o > i));
    }

    #[test]
    fn invalid_parameters_rejected() {
        let img = ramp(8, 8, 1);
        for d in [
            Degradation::noise(0.5),
            Degradation::noise(101.0),
            Degradation::haze(0.0, 0.5),
            Degradation::haze(0.5, 1.5),
            Degradation::low_light(0.0, 1.0),
            Degradation::low_light(1.2, 1.0),
            Degradation::gaussian_blur(-1.0),
        ] {
            assert!(matches!(
                apply_degradation(&img, &DegradationSpec::new(d, 0)),
                Err(Error::InvalidParameter(_))
            ));
        }
        let tiny = ramp(4, 8, 1);
        assert!(apply_degradation(&tiny, &DegradationSpec::new(Degradation::noise(5.0), 0)).is_err());
    }

    #[test]
    fn reflect_mirrors_without_edge_repeat() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }

    #[test]
    fn spec_json_shape() {
        let spec = DegradationSpec::new(Degradation::noise(25.0), 11);
        let v = serde_json::to_value(&spec).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"kind": "GaussianNoise", "params": {"sigma": 25.0}, "seed": 11})
        );
        let back = DegradationSpec::from_json(
            r#"{"kind": "Haze", "params": {"transmission": 0.4, "airlight": 0.8}, "seed": 3}"#,
        )
        .unwrap();
        assert_eq!(back, DegradationSpec::new(Degradation::haze(0.4, 0.8), 3));
        let blur = DegradationSpec::from_json(
            r#"{"kind": "Blur", "params": {"kernel": "motion", "length": 9, "angle_deg": 0}, "seed": 0}"#,
        )
        .unwrap();
        assert!(matches!(blur.degradation, Degradation::Blur(BlurParams::Motion { .. })));
        assert!(DegradationSpec::from_json(
            r#"{"kind": "GaussianNoise", "params": {"sigma": 25, "bogus": 1}, "seed": 0}"#
        )
        .is_err());
    }

    #[test]
    fn from_parts_fills_defaults() {
        let d = Degradation::from_parts(DegradationKind::Rain, serde_json::json!({"count": 5})).unwrap();
        match d {
            Degradation::Rain(p) => {
                assert_eq!(p.count, 5);
                assert_eq!(p.length_max, 24.0);
            }
            _ => unreachable!(),
        }
        let l = Degradation::from_parts(DegradationKind::LowLight, serde_json::json!({"scale": 0.3})).unwrap();
        assert_eq!(l, Degradation::low_light(0.3, 1.0));
    }
}
