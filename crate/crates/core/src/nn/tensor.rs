use rand::Rng;
use rand_distr::StandardNormal;

use super::Real;
use crate::imagestack::Image;
use crate::{Error, Result};

/// A dense tensor of up to four dimensions, row-major, with an optional
/// gradient buffer of the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffTensor<T: Real> {
    shape: Vec<usize>,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Real> DiffTensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(Error::ShapeMismatch(format!("tensors have 1 to 4 dims, got {shape:?}")));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {} values, got {}",
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        Ok(DiffTensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(shape, vec![T::zero(); shape.iter().product()]).expect("valid shape")
    }

    pub fn scalar(v: T) -> Self {
        Self::new(&[1], vec![v]).expect("valid shape")
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let n = shape.iter().product();
        Self::new(shape, (0..n).map(&mut f).collect()).expect("valid shape")
    }

    pub fn randn<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| T::of(std * rng.sample::<f64, _>(StandardNormal)))
    }

    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| T::of(rng.random_range(-bound..=bound)))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i / n == i % n { T::one() } else { T::zero() })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Starts tracking a zeroed gradient buffer if none exists.
    pub fn track(&mut self) {
        if self.grad.is_none() {
            self.grad = Some(vec![T::zero(); self.data.len()]);
        }
    }

    pub fn is_tracked(&self) -> bool {
        self.grad.is_some()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Adds `delta` into the gradient buffer, creating it if needed.
    pub fn accumulate_grad(&mut self, delta: &[T]) {
        assert_eq!(delta.len(), self.data.len(), "gradient length mismatch");
        self.track();
        for (g, d) in self.grad.as_mut().expect("tracked").iter_mut().zip(delta) {
            *g += *d;
        }
    }

    pub fn take_grad(&mut self) -> Option<Vec<T>> {
        self.grad.take()
    }

    /// `(batch, channels, height, width)` of a 4D tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match *self.shape.as_slice() {
            [b, c, h, w] => Ok((b, c, h, w)),
            _ => Err(Error::ShapeMismatch(format!(
                "expected (b,c,h,w), got {:?}",
                self.shape
            ))),
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        if let Some(g) = &self.grad {
            debug_assert_eq!(g.len(), self.data.len());
        }
        Ok(self)
    }

    pub fn cast<U: Real>(&self) -> DiffTensor<U> {
        DiffTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
            grad: None,
        }
    }

    /// Stacks images into a `(n, c, h, w)` batch.
    pub fn from_images(images: &[&Image]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty image batch".into()))?;
        let (h, w, c) = first.shape();
        if images.iter().any(|im| im.shape() != (h, w, c)) {
            return Err(Error::ShapeMismatch("images in a batch differ in shape".into()));
        }
        let mut data = Vec::with_capacity(images.len() * c * h * w);
        for im in images {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(T::of(im.get(y, x, ch) as f64));
                    }
                }
            }
        }
        Self::new(&[images.len(), c, h, w], data)
    }

    /// Item `i` of a `(n, c, h, w)` batch as an image, clamped to `[0, 1]`.
    pub fn to_image(&self, i: usize) -> Result<Image> {
        let (n, c, h, w) = self.dims4()?;
        if i >= n {
            return Err(Error::InvalidParameter(format!("batch index {i} out of {n}")));
        }
        let plane = h * w;
        let base = i * c * plane;
        let mut data = vec![0.0f32; c * plane];
        for ch in 0..c {
            for p in 0..plane {
                let v = self.data[base + ch * plane + p].f64();
                data[p * c + ch] = if v.is_finite() { v.clamp(0.0, 1.0) as f32 } else { 0.0 };
            }
        }
        Image::new(h, w, c, data)
    }
}
