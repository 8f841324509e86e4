use rand::Rng;

use super::conv::Padding;
use super::spectral::AmplitudeActivation;
use super::{DiffTensor, Graph, Real, Var};
use crate::lindecomp::random_orthogonal;
use crate::{Error, Result};

/// Amplitude guard in the ratio `A′ / (A + eps)`.
pub const SVAO_EPS: f64 = 1e-8;

/// A block with trainable tensors. `forward` receives the graph handles of
/// its own parameters, in the order returned by `params`.
pub trait Layer<T: Real> {
    fn params(&self) -> Vec<&DiffTensor<T>>;

    fn params_mut(&mut self) -> Vec<&mut DiffTensor<T>>;

    fn forward(&self, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Var>;

    /// Registers every parameter as a trainable leaf.
    fn bind(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.params().into_iter().map(|p| g.param(p.clone())).collect()
    }

    /// Registers every parameter as a constant (inference only).
    fn bind_frozen(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.params().into_iter().map(|p| g.input(p.clone())).collect()
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2dLayer<T: Real> {
    pub weight: DiffTensor<T>,
    pub bias: Option<DiffTensor<T>>,
    pub padding: Padding,
}

impl<T: Real> Conv2dLayer<T> {
    /// Uniform `±1/√fan_in` initialization for weight and bias, "same" padding.
    pub fn new<R: Rng + ?Sized>(cin: usize, cout: usize, k: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((cin * k * k) as f64).sqrt();
        Conv2dLayer {
            weight: DiffTensor::uniform(&[cout, cin, k, k], bound, rng),
            bias: Some(DiffTensor::uniform(&[cout], bound, rng)),
            padding: Padding::same(k),
        }
    }
}

impl<T: Real> Layer<T> for Conv2dLayer<T> {
    fn params(&self) -> Vec<&DiffTensor<T>> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut DiffTensor<T>> {
        std::iter::once(&mut self.weight).chain(self.bias.as_mut()).collect()
    }

    fn forward(&self, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Var> {
        g.conv2d(x, vars[0], vars.get(1).copied(), self.padding)
    }
}

/// Unpixelshuffle by `r`, a `m × m` channel mix (`m = c·r²`), pixelshuffle back.
#[derive(Clone, Debug, PartialEq)]
pub struct SveoLayer<T: Real> {
    pub r: usize,
    pub weight: DiffTensor<T>,
    pub bias: Option<DiffTensor<T>>,
}

impl<T: Real> SveoLayer<T> {
    pub fn new(r: usize, weight: DiffTensor<T>, bias: Option<DiffTensor<T>>) -> Result<Self> {
        let m = match weight.shape() {
            [a, b] if a == b => *a,
            s => return Err(Error::ShapeMismatch(format!("SVEO weight must be square, got {s:?}"))),
        };
        if r == 0 || m % (r * r) != 0 {
            return Err(Error::InvalidParameter(format!("SVEO weight size {m} is not c·{r}²")));
        }
        if bias.as_ref().is_some_and(|b| b.len() != m) {
            return Err(Error::ShapeMismatch(format!("SVEO bias needs {m} entries")));
        }
        Ok(SveoLayer { r, weight, bias })
    }

    /// Weight drawn from the Haar measure on orthogonal matrices; zero bias.
    pub fn orthogonal<R: Rng + ?Sized>(c: usize, r: usize, bias: bool, rng: &mut R) -> Self {
        let m = c * r * r;
        let q = random_orthogonal(m, rng);
        let weight = DiffTensor::from_fn(&[m, m], |i| T::of(q[(i / m, i % m)]));
        SveoLayer {
            r,
            weight,
            bias: bias.then(|| DiffTensor::zeros(&[m])),
        }
    }

    pub fn identity(c: usize, r: usize) -> Self {
        SveoLayer {
            r,
            weight: DiffTensor::identity(c * r * r),
            bias: None,
        }
    }

    pub fn m(&self) -> usize {
        self.weight.shape()[0]
    }
}

impl<T: Real> Layer<T> for SveoLayer<T> {
    fn params(&self) -> Vec<&DiffTensor<T>> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut DiffTensor<T>> {
        std::iter::once(&mut self.weight).chain(self.bias.as_mut()).collect()
    }

    fn forward(&self, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Var> {
        let c = g.value(x).dims4()?.1;
        if c * self.r * self.r != self.m() {
            return Err(Error::ShapeMismatch(format!(
                "SVEO with m = {} cannot take {c} channels at r = {}",
                self.m(),
                self.r
            )));
        }
        let u = g.unpixelshuffle(x, self.r)?;
        let mixed = g.channel_mix(u, vars[0], vars.get(1).copied())?;
        g.pixelshuffle(mixed, self.r)
    }
}

/// Channel mix of the DFT amplitude maps with the phase kept.
#[derive(Clone, Debug, PartialEq)]
pub struct SvaoLayer<T: Real> {
    pub weight: DiffTensor<T>,
    pub eps: f64,
    pub activation: AmplitudeActivation,
}

impl<T: Real> SvaoLayer<T> {
    pub fn identity(c: usize, activation: AmplitudeActivation) -> Self {
        SvaoLayer {
            weight: DiffTensor::identity(c),
            eps: SVAO_EPS,
            activation,
        }
    }

    pub fn new(weight: DiffTensor<T>, activation: AmplitudeActivation) -> Result<Self> {
        match weight.shape() {
            [a, b] if a == b => Ok(SvaoLayer {
                weight,
                eps: SVAO_EPS,
                activation,
            }),
            s => Err(Error::ShapeMismatch(format!("SVAO weight must be square, got {s:?}"))),
        }
    }
}

impl<T: Real> Layer<T> for SvaoLayer<T> {
    fn params(&self) -> Vec<&DiffTensor<T>> {
        vec![&self.weight]
    }

    fn params_mut(&mut self) -> Vec<&mut DiffTensor<T>> {
        vec![&mut self.weight]
    }

    fn forward(&self, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Var> {
        g.svao(x, vars[0], self.eps, self.activation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sveo_identity_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = SveoLayer::<f64>::identity(3, 2);
        let mut g = Graph::new();
        let x = g.input(DiffTensor::randn(&[2, 3, 6, 4], 1.0, &mut rng));
        let vars = layer.bind(&mut g);
        let y = layer.forward(&mut g, &vars, x).unwrap();
        assert_eq!(g.value(y).data(), g.value(x).data());
    }

    #[test]
    fn svao_constant_input_doubles() {
        let layer = SvaoLayer::<f64>::new(
            DiffTensor::from_fn(&[2, 2], |i| if i % 3 == 0 { 2.0 } else { 0.0 }),
            AmplitudeActivation::Identity,
        )
        .unwrap();
        let mut g = Graph::new();
        let x = g.input(DiffTensor::from_fn(&[1, 2, 4, 6], |i| if i < 24 { 0.3 } else { 0.7 }));
        let vars = layer.bind_frozen(&mut g);
        let y = layer.forward(&mut g, &vars, x).unwrap();
        for (a, b) in g.value(y).data().iter().zip(g.value(x).data()) {
            assert!((a - 2.0 * b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn sveo_shape_errors() {
        let layer = SveoLayer::<f32>::identity(2, 2);
        let mut g = Graph::new();
        let vars = layer.bind(&mut g);
        let odd = g.input(DiffTensor::zeros(&[1, 2, 5, 4]));
        assert!(layer.forward(&mut g, &vars, odd).is_err());
        let wrong_c = g.input(DiffTensor::zeros(&[1, 3, 4, 4]));
        assert!(layer.forward(&mut g, &vars, wrong_c).is_err());
        assert!(SveoLayer::<f32>::new(2, DiffTensor::zeros(&[6, 6]), None).is_err());
    }

    #[test]
    fn conv_param_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = Conv2dLayer::<f32>::new(16, 16, 4, &mut rng);
        assert_eq!(c.param_count(), 16 * 16 * 16 + 16);
    }
}
