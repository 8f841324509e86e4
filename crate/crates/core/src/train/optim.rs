use std::f64::consts::PI;

use crate::nn::{DiffTensor, Real};
use crate::{Error, Result};

/// Cosine decay from `base` at step 0 to zero at `total`.
pub fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    let t = step.min(total) as f64 / total as f64;
    base * 0.5 * (1.0 + (PI * t).cos())
}

/// Adam with bias correction. Moments are kept per parameter in binding
/// order; arithmetic is done in 64-bit and stored back in `T`.
#[derive(Clone, Debug)]
pub struct Adam<T: Real> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [&mut DiffTensor<T>], grads: &[&[T]], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::ShapeMismatch("parameter list changed between steps".into()));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if g.len() != p.len() || m.len() != p.len() {
                return Err(Error::ShapeMismatch("gradient length differs from parameter".into()));
            }
            for (((x, gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                let gv = gi.f64();
                let mn = self.beta1 * mi.f64() + (1.0 - self.beta1) * gv;
                let vn = self.beta2 * vi.f64() + (1.0 - self.beta2) * gv * gv;
                *mi = T::of(mn);
                *vi = T::of(vn);
                let update = lr * (mn / c1) / ((vn / c2).sqrt() + self.eps);
                *x = T::of(x.f64() - update);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints_and_monotone() {
        assert_eq!(cosine_lr(2e-4, 0, 100), 2e-4);
        assert!(cosine_lr(2e-4, 100, 100).abs() <= 1e-12);
        let lrs: Vec<f64> = (0..=100).map(|s| cosine_lr(2e-4, s, 100)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        assert!((cosine_lr(1.0, 50, 100) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut p = DiffTensor::<f64>::new(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let mut opt = Adam::new(0.9, 0.999, 1e-8);
        opt.step(&mut [&mut p], &[&[0.3, -4.0, 1e-3]], 0.1).unwrap();
        let expect = [0.9, -1.9, 0.4];
        for (a, b) in p.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn minimizes_quadratic() {
        let mut p = DiffTensor::<f64>::new(&[2], vec![3.0, -1.0]).unwrap();
        let mut opt = Adam::new(0.9, 0.999, 1e-8);
        for s in 0..2000 {
            let g: Vec<f64> = p.data().iter().map(|x| 2.0 * x).collect();
            opt.step(&mut [&mut p], &[&g], cosine_lr(0.05, s, 2000)).unwrap();
        }
        assert!(p.data().iter().all(|x| x.abs() < 1e-3));
    }
}
