use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use crate::imagestack::{apply_degradation, synthesize_clean, Degradation, DegradationSpec, Image};
use crate::Result;

// Stream tags mixed into the run seed so pools, batches and the eval set
// never share a generator.
const TRAIN_POOL: u64 = 0x7472_6169_6e00_0000;
const EVAL_POOL: u64 = 0x6576_616c_0000_0000;
const BATCH: u64 = 0x6261_7463_6800_0000;
const EVAL_SET: u64 = 0x6576_7365_7400_0000;

/// SplitMix64 finalizer over `a ^ rot(b)`.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.rotate_left(29) ^ 0x9e37_79b9_7f4a_7c15;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Degraded/clean patch with the index of its task in the config.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub task: usize,
    pub clean: Image,
    pub degraded: Image,
}

#[derive(Clone, Debug)]
pub struct DataSource {
    tasks: Vec<Degradation>,
    patch: usize,
    batch: usize,
    seed: u64,
    pool: Vec<Image>,
}

fn pool(cfg: &TrainConfig, stream: u64) -> Result<Vec<Image>> {
    (0..cfg.pool_size as u64)
        .map(|i| {
            synthesize_clean(
                cfg.pool_side,
                cfg.pool_side,
                cfg.model.channels,
                mix(cfg.seed ^ stream, i),
            )
        })
        .collect()
}

fn draw(pool: &[Image], tasks: &[Degradation], task: usize, patch: usize, rng: &mut ChaCha8Rng) -> Result<Sample> {
    let img = &pool[rng.random_range(0..pool.len())];
    let y = rng.random_range(0..=img.height() - patch);
    let x = rng.random_range(0..=img.width() - patch);
    let clean = img.crop(y, x, patch, patch)?;
    let spec = DegradationSpec::new(tasks[task].clone(), rng.random());
    let degraded = apply_degradation(&clean, &spec)?;
    Ok(Sample { task, clean, degraded })
}

impl DataSource {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        Ok(DataSource {
            tasks: cfg.tasks.clone(),
            patch: cfg.patch,
            batch: cfg.batch,
            seed: cfg.seed,
            pool: pool(cfg, TRAIN_POOL)?,
        })
    }

    /// Batch for `step`. Item `k` uses task `k mod tasks`; content depends
    /// only on `(seed, step)`.
    pub fn batch(&self, step: usize) -> Result<Vec<Sample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed ^ BATCH, step as u64));
        (0..self.batch)
            .map(|k| draw(&self.pool, &self.tasks, k % self.tasks.len(), self.patch, &mut rng))
            .collect()
    }
}

/// Held-out patches cut from a separately seeded pool, tasks round-robin.
pub fn eval_set(cfg: &TrainConfig) -> Result<Vec<Sample>> {
    let pool = pool(cfg, EVAL_POOL)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, EVAL_SET));
    (0..cfg.eval_patches)
        .map(|i| draw(&pool, &cfg.tasks, i % cfg.tasks.len(), cfg.patch, &mut rng))
        .collect()
}
