use super::conv::{conv2d_backward, conv2d_forward, ConvGeom, Padding};
use super::loss::{charbonnier, dec_batch, orth};
use super::real::matmul;
use super::spectral::{svao_backward, svao_forward, AmplitudeActivation, SvaoCache, SvaoGeom};
use super::{DiffTensor, Real};
use crate::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T: Real> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
        cols: Vec<T>,
    },
    ChannelMix {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Relu(Var),
    Add(Var, Var),
    Scale(Var, T),
    Unshuffle(Var, usize),
    Shuffle(Var, usize),
    Svao {
        x: Var,
        w: Var,
        geom: SvaoGeom,
        cache: SvaoCache<T>,
    },
    /// Scalar loss whose gradient with respect to `a` was computed in the
    /// forward pass; `b`, when present, receives the negated gradient.
    Pairwise {
        a: Var,
        b: Option<Var>,
        grad: Vec<T>,
    },
    Orth {
        w: Var,
        grad: Vec<T>,
    },
    WeightedSum(Vec<(Var, T)>),
}

struct Node<T: Real> {
    value: DiffTensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
/// sweep visits every node after all of its consumers.
pub struct Graph<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Space-to-depth index map: `out[c·r²+i·r+j, y, x] = in[c, y·r+i, x·r+j]`.
/// `dims` is the full-resolution shape; `inverse` maps depth back to space.
fn unshuffle_data<T: Real>(x: &[T], dims: (usize, usize, usize, usize), r: usize, inverse: bool) -> Vec<T> {
    let (b, c, h, w) = dims;
    let (oh, ow) = (h / r, w / r);
    let idx = |ch: usize, i: usize, j: usize, y: usize, x: usize| {
        let src = (ch * h + y * r + i) * w + x * r + j;
        let dst = ((ch * r * r + i * r + j) * oh + y) * ow + x;
        (src, dst)
    };
    let per = c * h * w;
    let mut out = vec![T::zero(); x.len()];
    for bi in 0..b {
        let (src_b, dst_b) = (&x[bi * per..(bi + 1) * per], &mut out[bi * per..(bi + 1) * per]);
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    for y in 0..h / r {
                        for xx in 0..w / r {
                            let (s, d) = idx(ch, i, j, y, xx);
                            if inverse {
                                dst_b[s] = src_b[d];
                            } else {
                                dst_b[d] = src_b[s];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: DiffTensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A constant input; no gradient is accumulated for it.
    pub fn input(&mut self, t: DiffTensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A trainable leaf; its gradient buffer starts at zero.
    pub fn param(&mut self, mut t: DiffTensor<T>) -> Var {
        t.track();
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &DiffTensor<T> {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    /// Moves a leaf's tensor (with its gradient) out of the graph.
    pub fn take(&mut self, v: Var) -> DiffTensor<T> {
        std::mem::replace(&mut self.nodes[v.0].value, DiffTensor::scalar(T::zero()))
    }

    pub fn scalar(&self, v: Var) -> Result<T> {
        let t = self.value(v);
        if t.len() != 1 {
            return Err(Error::ShapeMismatch(format!("expected a scalar, got {:?}", t.shape())));
        }
        Ok(t.data()[0])
    }

    /// 2D convolution, stride 1. `x: (b, cin, h, w)`, `w: (cout, cin, kh, kw)`,
    /// `bias: (cout)`.
    pub fn conv2d(&mut self, x: Var, w: Var, bias: Option<Var>, pad: Padding) -> Result<Var> {
        let (b, cin, h, wd) = self.value(x).dims4()?;
        let (cout, wcin, kh, kw) = self.value(w).dims4()?;
        if wcin != cin {
            return Err(Error::ShapeMismatch(format!(
                "conv weight expects {wcin} input channels, input has {cin}"
            )));
        }
        if let Some(bv) = bias {
            if self.value(bv).len() != cout {
                return Err(Error::ShapeMismatch(format!("conv bias needs {cout} entries")));
            }
        }
        let geom = ConvGeom::new(cin, h, wd, kh, kw, pad)
            .ok_or_else(|| Error::ShapeMismatch(format!("kernel {kh}x{kw} larger than padded {h}x{wd} input")))?;
        let (out, cols) = conv2d_forward(
            self.value(x).data(),
            b,
            &geom,
            self.value(w).data(),
            cout,
            bias.map(|bv| self.value(bv).data()),
        );
        let needs = self.needs(x) || self.needs(w) || bias.is_some_and(|bv| self.needs(bv));
        let value = DiffTensor::new(&[b, cout, geom.oh, geom.ow], out)?;
        let cols = if needs { cols } else { Vec::new() };
        Ok(self.push(
            value,
            Op::Conv2d {
                x,
                w,
                b: bias,
                geom,
                cols,
            },
            needs,
        ))
    }

    /// 1×1 convolution: `out[b, o] = Σ_i W[o, i]·x[b, i] + bias[o]`.
    pub fn channel_mix(&mut self, x: Var, w: Var, bias: Option<Var>) -> Result<Var> {
        let (b, c, h, wd) = self.value(x).dims4()?;
        let ws = self.value(w).shape().to_vec();
        let (mo, mi) = match ws.as_slice() {
            [o, i] => (*o, *i),
            _ => return Err(Error::ShapeMismatch(format!("mixing weight must be 2D, got {ws:?}"))),
        };
        if mi != c {
            return Err(Error::ShapeMismatch(format!(
                "mixing weight expects {mi} channels, input has {c}"
            )));
        }
        if let Some(bv) = bias {
            if self.value(bv).len() != mo {
                return Err(Error::ShapeMismatch(format!("mixing bias needs {mo} entries")));
            }
        }
        let p = h * wd;
        let mut out = vec![T::zero(); b * mo * p];
        for bi in 0..b {
            let ob = &mut out[bi * mo * p..(bi + 1) * mo * p];
            if let Some(bv) = bias {
                for (o, v) in self.value(bv).data().iter().enumerate() {
                    ob[o * p..(o + 1) * p].iter_mut().for_each(|e| *e = *v);
                }
            }
            let xb = &self.value(x).data()[bi * c * p..(bi + 1) * c * p];
            matmul(mo, c, p, self.value(w).data(), false, xb, false, ob, bias.is_some());
        }
        let needs = self.needs(x) || self.needs(w) || bias.is_some_and(|bv| self.needs(bv));
        let value = DiffTensor::new(&[b, mo, h, wd], out)?;
        Ok(self.push(value, Op::ChannelMix { x, w, b: bias }, needs))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value =
            DiffTensor::new(t.shape(), t.data().iter().map(|v| v.max(T::zero())).collect()).expect("same shape");
        let needs = self.needs(x);
        self.push(value, Op::Relu(x), needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::ShapeMismatch(format!("add {:?} + {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| *x + *y).collect();
        let value = DiffTensor::new(ta.shape(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), needs))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let t = self.value(x);
        let value = DiffTensor::new(t.shape(), t.data().iter().map(|v| *v * s).collect()).expect("same shape");
        let needs = self.needs(x);
        self.push(value, Op::Scale(x, s), needs)
    }

    /// `(b, c, h, w) → (b, c·r², h/r, w/r)`.
    pub fn unpixelshuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let (b, c, h, w) = self.value(x).dims4()?;
        if r == 0 || h % r != 0 || w % r != 0 {
            return Err(Error::ShapeMismatch(format!("factor {r} does not divide {h}x{w}")));
        }
        let data = unshuffle_data(self.value(x).data(), (b, c, h, w), r, false);
        let value = DiffTensor::new(&[b, c * r * r, h / r, w / r], data)?;
        let needs = self.needs(x);
        Ok(self.push(value, Op::Unshuffle(x, r), needs))
    }

    /// `(b, c·r², h, w) → (b, c, h·r, w·r)`, the inverse of [`Self::unpixelshuffle`].
    pub fn pixelshuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let (b, cr, h, w) = self.value(x).dims4()?;
        if r == 0 || cr % (r * r) != 0 {
            return Err(Error::ShapeMismatch(format!("{cr} channels not divisible by {r}²")));
        }
        let c = cr / (r * r);
        let data = unshuffle_data(self.value(x).data(), (b, c, h * r, w * r), r, true);
        let value = DiffTensor::new(&[b, c, h * r, w * r], data)?;
        let needs = self.needs(x);
        Ok(self.push(value, Op::Shuffle(x, r), needs))
    }

    /// Amplitude operator: mixes the DFT amplitude maps of the channels with
    /// `w: (c, c)` and keeps every phase.
    pub fn svao(&mut self, x: Var, w: Var, eps: f64, act: AmplitudeActivation) -> Result<Var> {
        let (b, c, h, wd) = self.value(x).dims4()?;
        if self.value(w).shape() != [c, c] {
            return Err(Error::ShapeMismatch(format!(
                "amplitude weight must be {c}x{c}, got {:?}",
                self.value(w).shape()
            )));
        }
        if self.value(x).data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("amplitude operator input"));
        }
        let geom = SvaoGeom {
            batch: b,
            c,
            h,
            w: wd,
            eps,
            act,
        };
        let (y, cache) = svao_forward(self.value(x).data(), self.value(w).data(), &geom);
        let value = DiffTensor::new(&[b, c, h, wd], y)?;
        let needs = self.needs(x) || self.needs(w);
        Ok(self.push(value, Op::Svao { x, w, geom, cache }, needs))
    }

    /// Mean Charbonnier penalty `mean √((a − b)² + ε²)`.
    pub fn charbonnier(&mut self, a: Var, b: Var, eps: f64) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::ShapeMismatch(format!(
                "charbonnier {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let (v, grad) = charbonnier(ta.data(), tb.data(), eps);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(DiffTensor::scalar(v), Op::Pairwise { a, b: Some(b), grad }, needs))
    }

    /// `Σ p ⊙ x` for a constant projection `p` of the same length as `x`.
    pub fn project(&mut self, x: Var, p: &[T]) -> Result<Var> {
        let t = self.value(x);
        if t.len() != p.len() {
            return Err(Error::ShapeMismatch(format!(
                "projection of {} values onto {}",
                t.len(),
                p.len()
            )));
        }
        let v = t.data().iter().zip(p).map(|(a, b)| *a * *b).sum();
        let needs = self.needs(x);
        Ok(self.push(
            DiffTensor::scalar(v),
            Op::Pairwise {
                a: x,
                b: None,
                grad: p.to_vec(),
            },
            needs,
        ))
    }

    /// Squared off-diagonal energy of `W Wᵀ`.
    pub fn loss_orth(&mut self, w: Var) -> Result<Var> {
        let t = self.value(w);
        let (rows, cols) = match t.shape() {
            [r, c] if r == c => (*r, *c),
            s => {
                return Err(Error::ShapeMismatch(format!(
                    "orthogonality loss needs a square matrix, got {s:?}"
                )))
            }
        };
        let (v, grad) = orth(t.data(), rows, cols);
        let needs = self.needs(w);
        Ok(self.push(DiffTensor::scalar(v), Op::Orth { w, grad }, needs))
    }

    /// Decomposition loss between `(b, c, n, n)` batches, summed over
    /// channels and averaged over the batch. Only `rec` receives a gradient.
    pub fn loss_dec(&mut self, rec: Var, clean: Var, beta: f64) -> Result<Var> {
        let dims = self.value(rec).dims4()?;
        if self.value(clean).shape() != self.value(rec).shape() {
            return Err(Error::ShapeMismatch(format!(
                "decomposition loss {:?} vs {:?}",
                self.value(rec).shape(),
                self.value(clean).shape()
            )));
        }
        if dims.2 != dims.3 {
            return Err(Error::ShapeMismatch(format!(
                "decomposition loss needs square patches, got {}x{}",
                dims.2, dims.3
            )));
        }
        let (v, mut grad) = dec_batch(self.value(rec).data(), self.value(clean).data(), dims, beta)?;
        let needs = self.needs(rec);
        if !needs {
            grad.clear();
        }
        Ok(self.push(
            DiffTensor::scalar(T::of(v)),
            Op::Pairwise { a: rec, b: None, grad },
            needs,
        ))
    }

    /// `Σ wᵢ·sᵢ` over scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, T)]) -> Result<Var> {
        let mut total = T::zero();
        for (v, w) in terms {
            total += self.scalar(*v)? * *w;
        }
        let needs = terms.iter().any(|(v, _)| self.needs(*v));
        Ok(self.push(DiffTensor::scalar(total), Op::WeightedSum(terms.to_vec()), needs))
    }

    fn acc(&mut self, v: Var, delta: &[T]) {
        let node = &mut self.nodes[v.0];
        if node.needs_grad {
            node.value.accumulate_grad(delta);
        }
    }

    /// Seeds `d root / d root = 1` and accumulates gradients into every
    /// tracked leaf. Intermediate gradients are released as the sweep passes
    /// them; leaf gradients add up across calls.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(Error::ShapeMismatch("backward needs a scalar root".into()));
        }
        if !self.needs(root) {
            return Ok(());
        }
        self.acc(root, &[T::one()]);
        for i in (0..=root.0).rev() {
            if !self.nodes[i].needs_grad || matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = self.nodes[i].value.take_grad() else {
                continue;
            };
            self.propagate(i, &g)?;
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, g: &[T]) -> Result<()> {
        let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom, cols } => {
                let batch = self.value(*x).shape()[0];
                let cout = self.value(*w).shape()[0];
                let grads = conv2d_backward(g, cols, batch, geom, self.value(*w).data(), cout, self.needs(*x));
                if let Some(dx) = grads.dx {
                    self.acc(*x, &dx);
                }
                self.acc(*w, &grads.dw);
                if let Some(b) = b {
                    self.acc(*b, &grads.db);
                }
            }
            Op::ChannelMix { x, w, b } => {
                let (bn, c, h, wd) = self.value(*x).dims4()?;
                let mo = self.value(*w).shape()[0];
                let p = h * wd;
                let mut dw = vec![T::zero(); mo * c];
                let mut db = vec![T::zero(); mo];
                let need_dx = self.needs(*x);
                let mut dx = vec![T::zero(); if need_dx { bn * c * p } else { 0 }];
                for bi in 0..bn {
                    let gb = &g[bi * mo * p..(bi + 1) * mo * p];
                    let xb = &self.value(*x).data()[bi * c * p..(bi + 1) * c * p];
                    matmul(mo, p, c, gb, false, xb, true, &mut dw, true);
                    for (o, d) in db.iter_mut().enumerate() {
                        *d += gb[o * p..(o + 1) * p].iter().copied().sum::<T>();
                    }
                    if need_dx {
                        let wv = self.value(*w).data();
                        matmul(
                            c,
                            mo,
                            p,
                            wv,
                            true,
                            gb,
                            false,
                            &mut dx[bi * c * p..(bi + 1) * c * p],
                            false,
                        );
                    }
                }
                if need_dx {
                    self.acc(*x, &dx);
                }
                self.acc(*w, &dw);
                if let Some(b) = b {
                    self.acc(*b, &db);
                }
            }
            Op::Relu(x) => {
                let d: Vec<T> = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(v, gv)| if *v > T::zero() { *gv } else { T::zero() })
                    .collect();
                self.acc(*x, &d);
            }
            Op::Add(a, b) => {
                self.acc(*a, g);
                self.acc(*b, g);
            }
            Op::Scale(x, s) => {
                let d: Vec<T> = g.iter().map(|v| *v * *s).collect();
                self.acc(*x, &d);
            }
            Op::Unshuffle(x, r) => {
                let dims = self.value(*x).dims4()?;
                let d = unshuffle_data(g, dims, *r, true);
                self.acc(*x, &d);
            }
            Op::Shuffle(x, r) => {
                let dims = self.nodes[i].value.dims4()?;
                let d = unshuffle_data(g, dims, *r, false);
                self.acc(*x, &d);
            }
            Op::Svao { x, w, geom, cache } => {
                let (dx, dw) = svao_backward(g, self.value(*w).data(), geom, cache, self.needs(*x));
                if let Some(dx) = dx {
                    self.acc(*x, &dx);
                }
                self.acc(*w, &dw);
            }
            Op::Pairwise { a, b, grad } => {
                let s = g[0];
                let da: Vec<T> = grad.iter().map(|v| *v * s).collect();
                if !da.is_empty() {
                    self.acc(*a, &da);
                    if let Some(b) = b {
                        let db: Vec<T> = da.iter().map(|v| -*v).collect();
                        self.acc(*b, &db);
                    }
                }
            }
            Op::Orth { w, grad } => {
                let d: Vec<T> = grad.iter().map(|v| *v * g[0]).collect();
                self.acc(*w, &d);
            }
            Op::WeightedSum(terms) => {
                for (v, wt) in terms {
                    self.acc(*v, &[g[0] * *wt]);
                }
            }
        }
        self.nodes[i].op = op;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unshuffle_shape_and_round_trip() {
        let mut g = Graph::<f64>::new();
        let x = g.input(DiffTensor::from_fn(&[1, 2, 4, 4], |i| i as f64));
        let u = g.unpixelshuffle(x, 2).unwrap();
        assert_eq!(g.value(u).shape(), &[1, 8, 2, 2]);
        // out[c·4 + i·2 + j, y, x] = in[c, 2y + i, 2x + j]
        assert_eq!(g.value(u).data()[3 * 4], 1.0 * 4.0 + 1.0);
        let back = g.pixelshuffle(u, 2).unwrap();
        assert_eq!(g.value(back).data(), g.value(x).data());
        assert!(g.unpixelshuffle(x, 3).is_err());
    }

    #[test]
    fn backward_accumulates_across_calls() {
        let mut g = Graph::<f64>::new();
        let w = g.param(DiffTensor::new(&[2, 2], vec![1.0, 1.0, 0.0, 1.0]).unwrap());
        let l = g.loss_orth(w).unwrap();
        g.backward(l).unwrap();
        let first = g.grad(w).unwrap().to_vec();
        g.backward(l).unwrap();
        let second = g.grad(w).unwrap();
        for (a, b) in first.iter().zip(second) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn inputs_receive_no_gradient() {
        let mut g = Graph::<f64>::new();
        let x = g.input(DiffTensor::from_fn(&[1, 1, 2, 2], |i| i as f64 - 1.5));
        let y = g.param(DiffTensor::zeros(&[1, 1, 2, 2]));
        let l = g.charbonnier(y, x, 1e-3).unwrap();
        g.backward(l).unwrap();
        assert!(g.grad(x).is_none());
        assert!(g.grad(y).is_some());
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut g = Graph::<f32>::new();
        let x = g.param(DiffTensor::zeros(&[2]));
        assert!(g.backward(x).is_err());
    }
}
