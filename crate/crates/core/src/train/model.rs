use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, Toggles, WorkingFlow};
use crate::nn::{Conv2dLayer, DiffTensor, Graph, Layer, Real, SvaoLayer, SveoLayer, Var};
use crate::{Error, Result};

/// Second operator of a residual block.
#[derive(Clone, Debug, PartialEq)]
pub enum Slot<T: Real> {
    Conv(Conv2dLayer<T>),
    Sveo(SveoLayer<T>),
}

impl<T: Real> Slot<T> {
    fn layer(&self) -> &dyn Layer<T> {
        match self {
            Slot::Conv(l) => l,
            Slot::Sveo(l) => l,
        }
    }

    fn layer_mut(&mut self) -> &mut dyn Layer<T> {
        match self {
            Slot::Conv(l) => l,
            Slot::Sveo(l) => l,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block<T: Real> {
    pub conv: Conv2dLayer<T>,
    pub slot: Slot<T>,
}

/// Indices of the blocks that carry an SVEO slot: `⌈depth/2⌉` of them,
/// spread uniformly.
pub fn sveo_blocks(depth: usize) -> Vec<usize> {
    let n = depth.div_ceil(2);
    (0..n)
        .map(|j| ((j as f64 + 0.5) * depth as f64 / n as f64) as usize)
        .collect()
}

/// The SVEO block closest to the middle of the stack.
pub fn bottleneck_block(depth: usize) -> Option<usize> {
    let mid = (depth as f64 - 1.0) / 2.0;
    sveo_blocks(depth)
        .into_iter()
        .min_by(|a, b| (*a as f64 - mid).abs().total_cmp(&(*b as f64 - mid).abs()))
}

/// Residual CNN: head conv, `depth` blocks `h ← h + slot(relu(conv(h)))`,
/// tail conv, and a global skip from input to output.
///
/// Half of the slots are SVEO layers (or, with `sveo` off, convs with an
/// `r² × r²` kernel, matching the SVEO parameter count). The bottleneck block
/// also runs the amplitude operator per the working flow.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyBackbone<T: Real> {
    pub config: ModelConfig,
    pub toggles: Toggles,
    pub head: Conv2dLayer<T>,
    pub blocks: Vec<Block<T>>,
    pub svao: Option<SvaoLayer<T>>,
    pub tail: Conv2dLayer<T>,
}

impl<T: Real> ToyBackbone<T> {
    pub fn new(config: &ModelConfig, toggles: Toggles, seed: u64) -> Result<Self> {
        if config.depth == 0 || config.width == 0 || config.r == 0 {
            return Err(Error::Config("model depth, width and r must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, w, r) = (config.channels, config.width, config.r);
        let head = Conv2dLayer::new(c, w, 3, &mut rng);
        let sveo_at = sveo_blocks(config.depth);
        let blocks = (0..config.depth)
            .map(|i| {
                let conv = Conv2dLayer::new(w, w, 3, &mut rng);
                let slot = if !sveo_at.contains(&i) {
                    Slot::Conv(Conv2dLayer::new(w, w, 3, &mut rng))
                } else if toggles.sveo {
                    Slot::Sveo(SveoLayer::orthogonal(w, r, config.sveo_bias, &mut rng))
                } else {
                    Slot::Conv(Conv2dLayer::new(w, w, r * r, &mut rng))
                };
                Block { conv, slot }
            })
            .collect();
        let svao = toggles.svao.then(|| SvaoLayer::identity(w, config.svao_activation));
        let tail = Conv2dLayer::new(w, c, 3, &mut rng);
        Ok(ToyBackbone {
            config: config.clone(),
            toggles,
            head,
            blocks,
            svao,
            tail,
        })
    }

    fn layers(&self) -> Vec<(String, &dyn Layer<T>)> {
        let mut out: Vec<(String, &dyn Layer<T>)> = vec![("head".into(), &self.head)];
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("blocks.{i}.conv"), &b.conv));
            let kind = if matches!(b.slot, Slot::Sveo(_)) {
                "sveo"
            } else {
                "slot"
            };
            out.push((format!("blocks.{i}.{kind}"), b.slot.layer()));
        }
        if let Some(s) = &self.svao {
            out.push(("svao".into(), s));
        }
        out.push(("tail".into(), &self.tail));
        out
    }

    /// `(name, tensor)` for every parameter, in binding order.
    pub fn named_params(&self) -> Vec<(String, &DiffTensor<T>)> {
        let mut out = Vec::new();
        for (prefix, layer) in self.layers() {
            for (k, p) in layer.params().into_iter().enumerate() {
                let suffix = if k == 0 { "weight" } else { "bias" };
                out.push((format!("{prefix}.{suffix}"), p));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut DiffTensor<T>> {
        let mut out = self.head.params_mut();
        for b in &mut self.blocks {
            out.extend(b.conv.params_mut());
            out.extend(b.slot.layer_mut().params_mut());
        }
        if let Some(s) = &mut self.svao {
            out.extend(s.params_mut());
        }
        out.extend(self.tail.params_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }

    /// Positions (in binding order) of the SVEO weights.
    pub fn sveo_weight_indices(&self) -> Vec<usize> {
        self.named_params()
            .iter()
            .enumerate()
            .filter(|(_, (n, _))| n.ends_with(".sveo.weight"))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn bind(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.named_params()
            .into_iter()
            .map(|(_, p)| g.param(p.clone()))
            .collect()
    }

    pub fn bind_frozen(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.named_params()
            .into_iter()
            .map(|(_, p)| g.input(p.clone()))
            .collect()
    }

    pub fn bottleneck(&self) -> Option<usize> {
        bottleneck_block(self.config.depth)
    }

    /// Forward pass on `(b, channels, h, w)`; `h` and `w` must be divisible
    /// by `r` when any SVEO slot is present.
    pub fn forward(&self, g: &mut Graph<T>, vars: &[Var], x: Var) -> Result<Var> {
        let (_, c, h, w) = g.value(x).dims4()?;
        if c != self.config.channels {
            return Err(Error::ShapeMismatch(format!(
                "model takes {} channels, input has {c}",
                self.config.channels
            )));
        }
        let r = self.config.r;
        if self.toggles.sveo && (h % r != 0 || w % r != 0) {
            return Err(Error::ShapeMismatch(format!(
                "input {h}x{w} is not divisible by r = {r}"
            )));
        }
        let mut at = 0;
        let mut take = |n: usize| {
            let s = &vars[at..at + n];
            at += n;
            s
        };
        let mut hcur = self.head.forward(g, take(self.head.params().len()), x)?;
        let bottleneck = self.bottleneck();
        let svao_vars_len = self.svao.as_ref().map_or(0, |s| s.params().len());
        let block_vars: Vec<(&[Var], &[Var])> = self
            .blocks
            .iter()
            .map(|b| (take(b.conv.params().len()), take(b.slot.layer().params().len())))
            .collect();
        let svao_vars = take(svao_vars_len);
        let tail_vars = take(self.tail.params().len());
        for (i, (b, (cv, sv))) in self.blocks.iter().zip(&block_vars).enumerate() {
            let pre = b.conv.forward(g, cv, hcur)?;
            let t = g.relu(pre);
            let e = b.slot.layer().forward(g, sv, t)?;
            let branch = match (&self.svao, Some(i) == bottleneck) {
                (Some(s), true) => match self.config.flow {
                    WorkingFlow::Cascaded => s.forward(g, svao_vars, e)?,
                    WorkingFlow::Parallel => {
                        let a = s.forward(g, svao_vars, t)?;
                        g.add(e, a)?
                    }
                    WorkingFlow::CascadedParallel => {
                        let se = s.forward(g, svao_vars, e)?;
                        let st = s.forward(g, svao_vars, t)?;
                        let sum = g.add(se, e)?;
                        g.add(sum, st)?
                    }
                },
                _ => e,
            };
            hcur = g.add(hcur, branch)?;
        }
        let out = self.tail.forward(g, tail_vars, hcur)?;
        g.add(x, out)
    }

    /// Inference on a batch without tracking gradients.
    pub fn infer(&self, x: DiffTensor<T>) -> Result<DiffTensor<T>> {
        let mut g = Graph::new();
        let vars = self.bind_frozen(&mut g);
        let xi = g.input(x);
        let y = self.forward(&mut g, &vars, xi)?;
        Ok(g.take(y))
    }
}
