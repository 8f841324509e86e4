use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::imagestack::Degradation;
use crate::nn::{AmplitudeActivation, LossWeights};
use crate::{Error, Result};

/// How the amplitude operator is combined with the bottleneck block's
/// vector operator `E`: cascaded `S(E(x))`, parallel `E(x) + S(x)`, or both
/// `S(E(x)) + E(x) + S(x)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingFlow {
    Cascaded,
    Parallel,
    #[default]
    CascadedParallel,
}

impl FromStr for WorkingFlow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cascaded" => Ok(WorkingFlow::Cascaded),
            "parallel" => Ok(WorkingFlow::Parallel),
            "cascaded_parallel" | "cascaded+parallel" => Ok(WorkingFlow::CascadedParallel),
            _ => Err(Error::Config(format!(
                "unknown working flow '{s}' (cascaded, parallel, cascaded_parallel)"
            ))),
        }
    }
}

/// Which of the four additions are active. All off gives the plain conv
/// baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub sveo: bool,
    pub svao: bool,
    pub l_orth: bool,
    pub l_dec: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles::all()
    }
}

impl Toggles {
    pub fn all() -> Self {
        Toggles {
            sveo: true,
            svao: true,
            l_orth: true,
            l_dec: true,
        }
    }

    pub fn none() -> Self {
        Toggles {
            sveo: false,
            svao: false,
            l_orth: false,
            l_dec: false,
        }
    }
}

impl fmt::Display for Toggles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on: Vec<&str> = [
            (self.sveo, "sveo"),
            (self.svao, "svao"),
            (self.l_orth, "l_orth"),
            (self.l_dec, "l_dec"),
        ]
        .iter()
        .filter(|(b, _)| *b)
        .map(|(_, n)| *n)
        .collect();
        if on.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&on.join("+"))
        }
    }
}

/// `"none"`, `"all"`, or a `+`-joined subset of `sveo`, `svao`, `l_orth`,
/// `l_dec`.
impl FromStr for Toggles {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => return Ok(Toggles::none()),
            "all" => return Ok(Toggles::all()),
            _ => {}
        }
        let mut t = Toggles::none();
        for part in s.split('+') {
            match part.trim() {
                "sveo" => t.sveo = true,
                "svao" => t.svao = true,
                "l_orth" => t.l_orth = true,
                "l_dec" => t.l_dec = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown toggle '{other}' (sveo, svao, l_orth, l_dec, all, none)"
                    )))
                }
            }
        }
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of residual blocks.
    pub depth: usize,
    /// Feature channels.
    pub width: usize,
    /// Unpixelshuffle factor of every SVEO layer.
    pub r: usize,
    pub flow: WorkingFlow,
    pub svao_activation: AmplitudeActivation,
    pub sveo_bias: bool,
    /// Image channels in and out.
    pub channels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            depth: 6,
            width: 16,
            r: 2,
            flow: WorkingFlow::default(),
            svao_activation: AmplitudeActivation::Identity,
            sveo_bias: true,
            channels: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Degradations sampled round-robin across each batch.
    pub tasks: Vec<Degradation>,
    pub patch: usize,
    pub batch: usize,
    pub steps: usize,
    /// Peak learning rate; decays to zero on a cosine over `steps`.
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weights: LossWeights,
    pub toggles: Toggles,
    pub model: ModelConfig,
    pub seed: u64,
    /// Evaluate every this many steps (and after the last); 0 evaluates only
    /// after the last step.
    pub eval_every: usize,
    /// Held-out patches per evaluation.
    pub eval_patches: usize,
    /// Clean training images synthesized up front.
    pub pool_size: usize,
    /// Side of each synthesized clean image.
    pub pool_side: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tasks: vec![Degradation::noise(25.0), Degradation::low_light(0.3, 1.0)],
            patch: 48,
            batch: 8,
            steps: 2000,
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weights: LossWeights::default(),
            toggles: Toggles::all(),
            model: ModelConfig::default(),
            seed: 0,
            eval_every: 500,
            eval_patches: 50,
            pool_size: 32,
            pool_side: 96,
        }
    }
}

impl TrainConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.tasks.is_empty() {
            return bad("tasks must not be empty".into());
        }
        for t in &self.tasks {
            t.validate()?;
        }
        let m = &self.model;
        if m.depth == 0 || m.width == 0 || m.r == 0 {
            return bad("model depth, width and r must be positive".into());
        }
        if m.channels != 1 && m.channels != 3 {
            return bad(format!("model channels must be 1 or 3, got {}", m.channels));
        }
        if self.patch < 8 || !self.patch.is_multiple_of(m.r) {
            return bad(format!(
                "patch {} must be >= 8 and divisible by r = {}",
                self.patch, m.r
            ));
        }
        if self.patch > self.pool_side {
            return bad(format!("patch {} exceeds pool_side {}", self.patch, self.pool_side));
        }
        if self.batch == 0 || self.pool_size == 0 {
            return bad("batch and pool_size must be positive".into());
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive".into());
        }
        self.weights.validate()
    }

    /// Weights with the loss toggles applied.
    pub fn effective_weights(&self) -> LossWeights {
        LossWeights {
            lambda_orth: if self.toggles.l_orth {
                self.weights.lambda_orth
            } else {
                0.0
            },
            lambda_dec: if self.toggles.l_dec {
                self.weights.lambda_dec
            } else {
                0.0
            },
            ..self.weights
        }
    }

    /// Log name of every task; repeated kinds get a numeric suffix.
    pub fn task_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.tasks.len());
        for (i, t) in self.tasks.iter().enumerate() {
            let base = t.kind().name().to_string();
            let repeats = self.tasks.iter().filter(|o| o.kind() == t.kind()).count();
            names.push(if repeats > 1 { format!("{base}#{i}") } else { base });
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_json() {
        let cfg = TrainConfig::from_json("{}").unwrap();
        assert_eq!(cfg, TrainConfig::default());
        assert_eq!(cfg.weights.beta, 0.01);
        assert_eq!(cfg.patch, 48);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            TrainConfig::from_json(r#"{"stepz": 3}"#),
            Err(Error::Config(_))
        ));
        assert!(TrainConfig::from_json(r#"{"model": {"depht": 3}}"#).is_err());
    }

    #[test]
    fn tasks_parse() {
        let cfg = TrainConfig::from_json(
            r#"{"tasks": [{"kind": "Haze", "params": {"transmission": 0.5, "airlight": 0.8}}], "steps": 3}"#,
        )
        .unwrap();
        assert_eq!(cfg.tasks, vec![Degradation::haze(0.5, 0.8)]);
        assert_eq!(cfg.task_names(), vec!["Haze"]);
    }

    #[test]
    fn patch_must_divide() {
        assert!(TrainConfig::from_json(r#"{"patch": 47}"#).is_err());
    }

    #[test]
    fn toggles_round_trip() {
        for s in ["none", "sveo", "sveo+svao+l_orth+l_dec", "l_orth+l_dec"] {
            let t: Toggles = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert_eq!("all".parse::<Toggles>().unwrap(), Toggles::all());
        assert!("sveo+bogus".parse::<Toggles>().is_err());
    }
}
