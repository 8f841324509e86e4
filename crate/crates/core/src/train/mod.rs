//! Desk-scale training of a small residual restoration network with the
//! singular-vector and singular-value operators.

mod checkpoint;
mod config;
mod data;
mod metrics;
mod model;
mod optim;
mod run;

pub use checkpoint::{Checkpoint, Manifest, TensorEntry, MAGIC};
pub use config::{ModelConfig, Toggles, TrainConfig, WorkingFlow};
pub use data::{eval_set, DataSource, Sample};
pub use metrics::{format_metric, psnr, ssim, SSIM_SIGMA, SSIM_WINDOW};
pub use model::{bottleneck_block, sveo_blocks, Block, Slot, ToyBackbone};
pub use optim::{cosine_lr, Adam};
pub use run::{
    ablate, evaluate, evaluate_model, orth_drive, save_log, train, train_with, write_ablation, write_log, AblationRow,
    EvalPair, EvalReport, LogRow, OrthDrive, OrthDriveReport, TaskMetrics, TrainOutcome, LOG_HEADER, LOSS_WINDOW,
};
