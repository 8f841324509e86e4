use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conv::Padding;
use super::layers::{Layer, SvaoLayer, SveoLayer};
use super::spectral::AmplitudeActivation;
use super::{DiffTensor, Graph, Var};
use crate::lindecomp::{dft2, random_orthogonal};
use crate::{Error, Result};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Step of the five-point rule used for polynomial losses.
pub const FD_STEP_FIVE_POINT: f64 = 1e-3;

/// Finite-difference rule of the numeric oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FdRule {
    /// `(f(x+h) − f(x−h)) / 2h`
    Central(f64),
    /// `(−f(x+2h) + 8f(x+h) − 8f(x−h) + f(x−2h)) / 12h`, exact for
    /// polynomials up to degree four, so a large step keeps rounding small.
    FivePoint(f64),
}

/// Most coordinates probed per component.
pub const MAX_COORDS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Conv,
    Sveo,
    Svao,
    LossDec,
    LossOrth,
}

impl Component {
    pub const ALL: [Component; 5] = [
        Component::Conv,
        Component::Sveo,
        Component::Svao,
        Component::LossDec,
        Component::LossOrth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Conv => "conv",
            Component::Sveo => "sveo",
            Component::Svao => "svao",
            Component::LossDec => "loss_dec",
            Component::LossOrth => "loss_orth",
        }
    }

    /// Largest accepted relative error.
    pub fn bound(self) -> f64 {
        match self {
            Component::Conv => 1e-6,
            Component::Sveo | Component::Svao => 1e-5,
            Component::LossDec => 1e-4,
            Component::LossOrth => 1e-8,
        }
    }

    /// Resolves a component id; `"all"` expands to every component.
    pub fn parse_list(id: &str) -> Result<Vec<Component>> {
        if id == "all" {
            Ok(Component::ALL.to_vec())
        } else {
            Ok(vec![id.parse()?])
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownComponent(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub component: Component,
    pub max_rel_error: f64,
    pub bound: f64,
    pub coordinates: usize,
    pub passed: bool,
}

/// Relative error `|a − n| / max(|a|, |n|, floor)`.
///
/// `floor` is a small fraction of the largest analytic gradient, so that
/// coordinates whose true gradient is zero are compared on the scale of the
/// whole gradient rather than on rounding noise.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    if denom == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / denom
    }
}

/// Compares the backward pass of `f` against finite differences over at
/// most `max_coords` coordinates of `leaves`, sampled uniformly.
pub fn check_function<F>(
    leaves: &[DiffTensor<f64>],
    f: F,
    rule: FdRule,
    max_coords: usize,
    seed: u64,
) -> Result<(f64, usize)>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = leaves.iter().map(|t| g.param(t.clone())).collect();
    let root = f(&mut g, &vars)?;
    g.backward(root)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .map(|v| {
            g.grad(*v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; g.value(*v).len()])
        })
        .collect();
    let total: usize = leaves.iter().map(|t| t.len()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, total, max_coords.min(total)).into_vec();
    let eval = |perturbed: &[DiffTensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.input(t.clone())).collect();
        let root = f(&mut g, &vars)?;
        g.scalar(root)
    };
    let locate = |mut flat: usize| {
        for (i, t) in leaves.iter().enumerate() {
            if flat < t.len() {
                return (i, flat);
            }
            flat -= t.len();
        }
        unreachable!("index within total")
    };
    let mut pairs = Vec::with_capacity(picks.len());
    let mut work = leaves.to_vec();
    for flat in &picks {
        let (ti, k) = locate(*flat);
        let orig = work[ti].data()[k];
        let mut at = |d: f64| {
            work[ti].data_mut()[k] = orig + d;
            let v = eval(&work);
            work[ti].data_mut()[k] = orig;
            v
        };
        let numeric = match rule {
            FdRule::Central(h) => (at(h)? - at(-h)?) / (2.0 * h),
            FdRule::FivePoint(h) => (-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h),
        };
        pairs.push((analytic[ti][k], numeric));
    }
    let scale = analytic.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-3 * scale;
    let worst = pairs
        .iter()
        .map(|(a, n)| relative_error(*a, *n, floor))
        .fold(0.0, f64::max);
    Ok((worst, picks.len()))
}

/// Reduces a layer output to a scalar with a fixed random projection.
fn layer_check<L: Layer<f64>>(layer: &L, x: DiffTensor<f64>, seed: u64) -> Result<(f64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut leaves = vec![x];
    leaves.extend(layer.params().into_iter().cloned());
    let out_len = {
        let mut g = Graph::new();
        let vars: Vec<Var> = leaves.iter().map(|t| g.input(t.clone())).collect();
        let y = layer.forward(&mut g, &vars[1..], vars[0])?;
        g.value(y).len()
    };
    let proj: Vec<f64> = (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect();
    check_function(
        &leaves,
        |g, vars| {
            let y = layer.forward(g, &vars[1..], vars[0])?;
            g.project(y, &proj)
        },
        FdRule::Central(FD_STEP),
        MAX_COORDS,
        seed,
    )
}

/// Square matrix `U diag(σ) Vᵀ` with the given singular values.
pub fn matrix_with_spectrum<R: Rng + ?Sized>(sigma: &[f64], rng: &mut R) -> DMatrix<f64> {
    let n = sigma.len();
    let u = random_orthogonal(n, rng);
    let v = random_orthogonal(n, rng);
    u * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(sigma)) * v.transpose()
}

fn separated_batch<R: Rng + ?Sized>(b: usize, c: usize, n: usize, rng: &mut R) -> DiffTensor<f64> {
    let mut data = Vec::with_capacity(b * c * n * n);
    for _ in 0..b * c {
        let top = rng.random_range(2.0..4.0);
        let sigma: Vec<f64> = (0..n).map(|i| top * (1.0 - 0.1 * i as f64)).collect();
        let m = matrix_with_spectrum(&sigma, rng);
        for y in 0..n {
            for x in 0..n {
                data.push(m[(y, x)]);
            }
        }
    }
    DiffTensor::new(&[b, c, n, n], data).expect("consistent shape")
}

/// Smallest Fourier amplitude the SVAO input may have. The phase of a
/// coefficient jumps as it crosses zero (the real DC and Nyquist terms flip
/// sign), so differences taken near one measure the jump, not the slope.
const MIN_AMPLITUDE: f64 = 0.25;

/// Gaussian batch redrawn until every plane keeps its spectrum away from zero.
fn spectrally_separated<R: Rng + ?Sized>(shape: &[usize; 4], rng: &mut R) -> Result<DiffTensor<f64>> {
    let [_, _, h, w] = *shape;
    loop {
        let x = DiffTensor::randn(shape, 1.0, rng);
        let planes: Vec<DMatrix<f64>> = x
            .data()
            .chunks(h * w)
            .map(|p| DMatrix::from_row_slice(h, w, p))
            .collect();
        let spectrum = dft2(&planes)?;
        if spectrum
            .amplitude()
            .iter()
            .flat_map(|a| a.iter())
            .all(|a| *a >= MIN_AMPLITUDE)
        {
            return Ok(x);
        }
    }
}

/// Runs the finite-difference oracle for one component in 64-bit precision.
pub fn gradcheck(component: Component, seed: u64) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (err, coords) = match component {
        Component::Conv => {
            let layer = super::layers::Conv2dLayer::<f64> {
                weight: DiffTensor::randn(&[3, 2, 3, 3], 0.5, &mut rng),
                bias: Some(DiffTensor::randn(&[3], 0.5, &mut rng)),
                padding: Padding::uniform(1),
            };
            layer_check(&layer, DiffTensor::randn(&[2, 2, 6, 7], 1.0, &mut rng), seed)?
        }
        Component::Sveo => {
            let mut layer = SveoLayer::<f64>::orthogonal(4, 2, true, &mut rng);
            if let Some(b) = &mut layer.bias {
                *b = DiffTensor::randn(&[16], 0.1, &mut rng);
            }
            layer_check(&layer, DiffTensor::randn(&[2, 4, 8, 8], 1.0, &mut rng), seed)?
        }
        Component::Svao => {
            let w = DiffTensor::from_fn(&[4, 4], |i| {
                let diag = if i % 5 == 0 { 1.0 } else { 0.0 };
                diag + 0.2 * rng.random_range(-1.0..1.0)
            });
            let layer = SvaoLayer::new(w, AmplitudeActivation::Identity)?;
            layer_check(&layer, spectrally_separated(&[2, 4, 8, 8], &mut rng)?, seed)?
        }
        Component::LossDec => {
            let rec = separated_batch(2, 2, 8, &mut rng);
            let clean = separated_batch(2, 2, 8, &mut rng);
            // A unit weight keeps the polar-factor term visible next to the σ term.
            let beta = 1.0;
            check_function(
                std::slice::from_ref(&rec),
                |g, vars| {
                    let c = g.input(clean.clone());
                    g.loss_dec(vars[0], c, beta)
                },
                FdRule::Central(FD_STEP),
                MAX_COORDS,
                seed,
            )?
        }
        Component::LossOrth => {
            // Near-orthogonal, the regime SVEO weights live in.
            let q = random_orthogonal(16, &mut rng);
            let noise = DiffTensor::<f64>::randn(&[16, 16], 0.05, &mut rng);
            let w = DiffTensor::from_fn(&[16, 16], |i| q[(i / 16, i % 16)] + noise.data()[i]);
            // The loss is quartic in each entry, so the five-point rule has no
            // truncation error.
            check_function(
                std::slice::from_ref(&w),
                |g, vars| g.loss_orth(vars[0]),
                FdRule::FivePoint(FD_STEP_FIVE_POINT),
                MAX_COORDS,
                seed,
            )?
        }
    };
    let bound = component.bound();
    Ok(GradcheckReport {
        component,
        max_rel_error: err,
        bound,
        coordinates: coords,
        passed: err <= bound,
    })
}
