use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::checkpoint::Checkpoint;
use super::config::{ModelConfig, Toggles, TrainConfig};
use super::data::{eval_set, mix, DataSource, Sample};
use super::metrics::{psnr, ssim};
use super::model::ToyBackbone;
use super::optim::{cosine_lr, Adam};
use crate::imagestack::Image;
use crate::nn::{DiffTensor, Graph, CHARBONNIER_EPS};
use crate::{Error, Result};

/// Width of the moving windows compared by [`TrainOutcome::window_means`].
pub const LOSS_WINDOW: usize = 100;
const EVAL_CHUNK: usize = 8;

/// One row of the trajectory log. Batch-level terms repeat on every task
/// row of a step; `None` marks a term that is switched off or not computed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRow {
    pub step: usize,
    pub task: String,
    pub l_ori: f64,
    pub l_orth: Option<f64>,
    pub l_dec: Option<f64>,
    pub total: f64,
    /// Held-out PSNR of this task, on evaluation steps only.
    pub psnr: Option<f64>,
}

pub const LOG_HEADER: [&str; 7] = ["step", "task", "l_ori", "l_orth", "l_dec", "total", "psnr"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the log as CSV. The header is written even for an empty log.
pub fn write_log<W: Write>(rows: &[LogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_HEADER)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.task.clone(),
            r.l_ori.to_string(),
            opt(r.l_orth),
            opt(r.l_dec),
            r.total.to_string(),
            opt(r.psnr),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn save_log(rows: &[LogRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_log(rows, f)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskMetrics {
    pub task: String,
    pub count: usize,
    pub psnr_degraded: f64,
    pub psnr_restored: f64,
    pub ssim_degraded: f64,
    pub ssim_restored: f64,
}

/// Per-task means plus an `"all"` row over every pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub tasks: Vec<TaskMetrics>,
    pub overall: TaskMetrics,
}

impl EvalReport {
    /// Mean restored PSNR minus mean degraded PSNR over all pairs.
    pub fn psnr_gain(&self) -> f64 {
        self.overall.psnr_restored - self.overall.psnr_degraded
    }

    pub fn task(&self, name: &str) -> Option<&TaskMetrics> {
        self.tasks.iter().find(|t| t.task == name)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for t in self.tasks.iter().chain(std::iter::once(&self.overall)) {
            w.serialize(t)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// A degraded/clean pair labelled with its task.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPair {
    pub task: String,
    pub clean: Image,
    pub degraded: Image,
}

fn summarize(task: String, rows: &[[f64; 4]]) -> TaskMetrics {
    let n = rows.len().max(1) as f64;
    let mean = |k: usize| rows.iter().map(|r| r[k]).sum::<f64>() / n;
    TaskMetrics {
        task,
        count: rows.len(),
        psnr_degraded: mean(0),
        psnr_restored: mean(1),
        ssim_degraded: mean(2),
        ssim_restored: mean(3),
    }
}

/// Restores every pair (output clamped to `[0, 1]`) and scores it against
/// the clean image. Pairs of equal shape are batched together.
pub fn evaluate_model(model: &ToyBackbone<f32>, pairs: &[EvalPair]) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("no evaluation pairs".into()));
    }
    for p in pairs {
        if !p.clean.same_shape(&p.degraded) {
            return Err(Error::ShapeMismatch(format!(
                "{}: clean {:?} vs degraded {:?}",
                p.task,
                p.clean.shape(),
                p.degraded.shape()
            )));
        }
    }
    let mut restored: Vec<Option<Image>> = vec![None; pairs.len()];
    let mut start = 0;
    while start < pairs.len() {
        let shape = pairs[start].degraded.shape();
        let mut end = start + 1;
        while end < pairs.len() && end - start < EVAL_CHUNK && pairs[end].degraded.shape() == shape {
            end += 1;
        }
        let imgs: Vec<&Image> = pairs[start..end].iter().map(|p| &p.degraded).collect();
        let out = model.infer(DiffTensor::from_images(&imgs)?)?;
        for (k, slot) in restored[start..end].iter_mut().enumerate() {
            *slot = Some(out.to_image(k)?);
        }
        start = end;
    }
    let mut names: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<[f64; 4]>> = Vec::new();
    let mut all = Vec::with_capacity(pairs.len());
    for (p, r) in pairs.iter().zip(restored) {
        let r = r.expect("every pair restored");
        let row = [
            psnr(&p.degraded, &p.clean)?,
            psnr(&r, &p.clean)?,
            ssim(&p.degraded, &p.clean)?,
            ssim(&r, &p.clean)?,
        ];
        let k = match names.iter().position(|n| *n == p.task) {
            Some(k) => k,
            None => {
                names.push(p.task.clone());
                rows.push(Vec::new());
                names.len() - 1
            }
        };
        rows[k].push(row);
        all.push(row);
    }
    Ok(EvalReport {
        tasks: names.into_iter().zip(&rows).map(|(n, r)| summarize(n, r)).collect(),
        overall: summarize("all".into(), &all),
    })
}

/// Loads the model stored in `ckpt` and evaluates it on `pairs`.
pub fn evaluate(ckpt: &Checkpoint, pairs: &[EvalPair]) -> Result<EvalReport> {
    evaluate_model(&ckpt.to_model()?, pairs)
}

fn labelled(samples: Vec<Sample>, names: &[String]) -> Vec<EvalPair> {
    samples
        .into_iter()
        .map(|s| EvalPair {
            task: names[s.task].clone(),
            clean: s.clean,
            degraded: s.degraded,
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRow>,
    /// Total loss of every step.
    pub losses: Vec<f64>,
    /// `(step, report)` for every evaluation.
    pub evals: Vec<(usize, EvalReport)>,
}

impl TrainOutcome {
    /// Mean total loss over the first and the last `width` steps.
    pub fn window_means(&self, width: usize) -> Option<(f64, f64)> {
        if width == 0 || self.losses.len() < width {
            return None;
        }
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        Some((
            mean(&self.losses[..width]),
            mean(&self.losses[self.losses.len() - width..]),
        ))
    }

    pub fn final_eval(&self) -> Option<&EvalReport> {
        self.evals.last().map(|(_, r)| r)
    }
}

struct StepLosses {
    per_task: Vec<f64>,
    orth: Option<f64>,
    dec: Option<f64>,
    total: f64,
}

fn train_step(
    model: &mut ToyBackbone<f32>,
    adam: &mut Adam<f32>,
    cfg: &TrainConfig,
    batch: &[Sample],
    lr: f64,
) -> Result<StepLosses> {
    let weights = cfg.effective_weights();
    let mut g = Graph::<f32>::new();
    let vars = model.bind(&mut g);
    let degraded: Vec<&Image> = batch.iter().map(|s| &s.degraded).collect();
    let clean: Vec<&Image> = batch.iter().map(|s| &s.clean).collect();
    let x = g.input(DiffTensor::from_images(&degraded)?);
    let y = g.input(DiffTensor::from_images(&clean)?);
    let out = model.forward(&mut g, &vars, x)?;
    let ori = g.charbonnier(out, y, CHARBONNIER_EPS)?;
    let mut terms = vec![(ori, 1.0f32)];

    let mut orth = None;
    if cfg.toggles.l_orth {
        let idx = model.sveo_weight_indices();
        if !idx.is_empty() {
            let parts = idx
                .iter()
                .map(|&i| Ok((g.loss_orth(vars[i])?, 1.0f32)))
                .collect::<Result<Vec<_>>>()?;
            let sum = g.weighted_sum(&parts)?;
            orth = Some(g.scalar(sum)?.into());
            terms.push((sum, weights.lambda_orth as f32));
        }
    }
    let mut dec = None;
    if cfg.toggles.l_dec {
        let d = g.loss_dec(out, y, weights.beta)?;
        dec = Some(g.scalar(d)?.into());
        terms.push((d, weights.lambda_dec as f32));
    }
    let total = g.weighted_sum(&terms)?;
    let total_v: f64 = g.scalar(total)?.into();

    let per_task = {
        let (o, c) = (g.value(out).data(), g.value(y).data());
        let item = o.len() / batch.len();
        let eps2 = CHARBONNIER_EPS * CHARBONNIER_EPS;
        let mut acc = vec![(0.0f64, 0usize); cfg.tasks.len()];
        for (k, s) in batch.iter().enumerate() {
            let r = k * item..(k + 1) * item;
            let sum: f64 = o[r.clone()]
                .iter()
                .zip(&c[r])
                .map(|(a, b)| ((*a as f64 - *b as f64).powi(2) + eps2).sqrt())
                .sum();
            acc[s.task].0 += sum;
            acc[s.task].1 += item;
        }
        acc.into_iter()
            .map(|(s, n)| if n == 0 { f64::NAN } else { s / n as f64 })
            .collect()
    };

    if !total_v.is_finite() {
        return Ok(StepLosses {
            per_task,
            orth,
            dec,
            total: total_v,
        });
    }
    g.backward(total)?;
    let grads: Vec<Vec<f32>> = vars
        .iter()
        .map(|&v| {
            g.grad(v)
                .map(<[f32]>::to_vec)
                .unwrap_or_else(|| vec![0.0; g.value(v).len()])
        })
        .collect();
    let grad_refs: Vec<&[f32]> = grads.iter().map(Vec::as_slice).collect();
    adam.step(&mut model.params_mut(), &grad_refs, lr)?;
    Ok(StepLosses {
        per_task,
        orth,
        dec,
        total: total_v,
    })
}

/// Trains the toy backbone. Deterministic for a given config: batches depend
/// only on `(seed, step)` and the loop is single-threaded.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(cfg, |_, _| {})
}

/// [`train`] with a callback invoked after every step with the step index
/// and total loss.
pub fn train_with(cfg: &TrainConfig, mut on_step: impl FnMut(usize, f64)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut model = ToyBackbone::<f32>::new(&cfg.model, cfg.toggles, mix(cfg.seed, 0x006d_6f64_656c))?;
    let mut adam = Adam::new(cfg.beta1, cfg.beta2, cfg.adam_eps);
    let names = cfg.task_names();
    let data = DataSource::new(cfg)?;
    let held_out = if cfg.steps > 0 && cfg.eval_patches > 0 {
        labelled(eval_set(cfg)?, &names)
    } else {
        Vec::new()
    };
    let mut log = Vec::with_capacity(cfg.steps * names.len());
    let mut losses = Vec::with_capacity(cfg.steps);
    let mut evals = Vec::new();
    for step in 0..cfg.steps {
        let batch = data.batch(step)?;
        let lr = cosine_lr(cfg.lr, step, cfg.steps);
        let l = train_step(&mut model, &mut adam, cfg, &batch, lr)?;
        if !l.total.is_finite() {
            return Err(Error::Diverged {
                step,
                what: "total loss",
                value: l.total,
            });
        }
        losses.push(l.total);
        on_step(step, l.total);
        let last = step + 1 == cfg.steps;
        let due = last || (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0);
        let report = if due && !held_out.is_empty() {
            let r = evaluate_model(&model, &held_out)?;
            log::info!("step {}: held-out PSNR gain {:.3} dB", step + 1, r.psnr_gain());
            Some(r)
        } else {
            None
        };
        for (t, name) in names.iter().enumerate() {
            if l.per_task[t].is_nan() {
                continue;
            }
            log.push(LogRow {
                step,
                task: name.clone(),
                l_ori: l.per_task[t],
                l_orth: l.orth,
                l_dec: l.dec,
                total: l.total,
                psnr: report.as_ref().and_then(|r| r.task(name)).map(|m| m.psnr_restored),
            });
        }
        if let Some(r) = report {
            evals.push((step + 1, r));
        }
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint::from_model(&model, cfg.steps),
        log,
        losses,
        evals,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub params: usize,
    pub first_window_loss: Option<f64>,
    pub final_window_loss: Option<f64>,
    pub psnr_degraded: Option<f64>,
    pub psnr_restored: Option<f64>,
    pub ssim_restored: Option<f64>,
}

/// Trains one run per toggle set with the same seed and data.
pub fn ablate(cfg: &TrainConfig, variants: &[Toggles]) -> Result<Vec<AblationRow>> {
    variants
        .iter()
        .map(|&toggles| {
            let run_cfg = TrainConfig { toggles, ..cfg.clone() };
            let out = train(&run_cfg)?;
            let params = ToyBackbone::<f32>::new(&run_cfg.model, toggles, 0)?.param_count();
            let window = out.window_means(LOSS_WINDOW.min(out.losses.len().max(1)));
            let eval = out.final_eval();
            Ok(AblationRow {
                variant: toggles.to_string(),
                params,
                first_window_loss: window.map(|w| w.0),
                final_window_loss: window.map(|w| w.1),
                psnr_degraded: eval.map(|e| e.overall.psnr_degraded),
                psnr_restored: eval.map(|e| e.overall.psnr_restored),
                ssim_restored: eval.map(|e| e.overall.ssim_restored),
            })
        })
        .collect()
}

pub fn write_ablation<W: Write>(rows: &[AblationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Settings of the orthogonality drive: the backbone's SVEO weights start
/// from orthogonal plus Gaussian noise and only the orthogonality loss is
/// minimized.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrthDrive {
    pub model: ModelConfig,
    pub steps: usize,
    pub lr: f64,
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for OrthDrive {
    fn default() -> Self {
        OrthDrive {
            model: ModelConfig::default(),
            steps: 1000,
            lr: 1e-3,
            perturbation: 0.05,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrthDriveReport {
    /// Off-diagonal `W Wᵀ` energy of each SVEO weight before and after.
    pub initial: Vec<f64>,
    pub final_energy: Vec<f64>,
    /// Largest energy across weights after every step.
    pub trajectory: Vec<f64>,
}

impl OrthDriveReport {
    pub fn max_final(&self) -> f64 {
        self.final_energy.iter().copied().fold(0.0, f64::max)
    }
}

fn offdiag_energy(w: &DiffTensor<f32>) -> f64 {
    let m = w.shape()[0];
    let d = w.data();
    let mut e = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let dot: f64 = (0..m).map(|k| d[i * m + k] as f64 * d[j * m + k] as f64).sum();
                e += dot * dot;
            }
        }
    }
    e
}

pub fn orth_drive(cfg: &OrthDrive) -> Result<OrthDriveReport> {
    let toggles = Toggles {
        sveo: true,
        svao: false,
        l_orth: true,
        l_dec: false,
    };
    let mut model = ToyBackbone::<f32>::new(&cfg.model, toggles, cfg.seed)?;
    let idx = model.sveo_weight_indices();
    let noise = Normal::new(0.0, cfg.perturbation)
        .map_err(|_| Error::InvalidParameter(format!("perturbation {} must be >= 0", cfg.perturbation)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0x6f72_7468));
    {
        let mut params = model.params_mut();
        for &i in &idx {
            for v in params[i].data_mut() {
                *v += noise.sample(&mut rng) as f32;
            }
        }
    }
    let energies = |m: &ToyBackbone<f32>| {
        let ps = m.named_params();
        idx.iter().map(|&i| offdiag_energy(ps[i].1)).collect::<Vec<f64>>()
    };
    let initial = energies(&model);
    let mut adam = Adam::<f32>::new(0.9, 0.999, 1e-8);
    let mut trajectory = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut g = Graph::<f32>::new();
        let ws: Vec<_> = {
            let ps = model.named_params();
            idx.iter().map(|&i| g.param(ps[i].1.clone())).collect()
        };
        let parts = ws
            .iter()
            .map(|&w| Ok((g.loss_orth(w)?, 1.0f32)))
            .collect::<Result<Vec<_>>>()?;
        let total = g.weighted_sum(&parts)?;
        let v: f64 = g.scalar(total)?.into();
        if !v.is_finite() {
            return Err(Error::Diverged {
                step,
                what: "orthogonality loss",
                value: v,
            });
        }
        g.backward(total)?;
        let grads: Vec<Vec<f32>> = ws.iter().map(|&w| g.grad(w).expect("tracked").to_vec()).collect();
        let grad_refs: Vec<&[f32]> = grads.iter().map(Vec::as_slice).collect();
        let mut all = model.params_mut();
        let mut sel: Vec<&mut DiffTensor<f32>> = Vec::with_capacity(idx.len());
        for (i, p) in all.drain(..).enumerate() {
            if idx.contains(&i) {
                sel.push(p);
            }
        }
        adam.step(&mut sel, &grad_refs, cosine_lr(cfg.lr, step, cfg.steps))?;
        trajectory.push(energies(&model).into_iter().fold(0.0, f64::max));
    }
    Ok(OrthDriveReport {
        initial,
        final_energy: energies(&model),
        trajectory,
    })
}
