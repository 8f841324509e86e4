//! Singular-value view of image degradations.
//!
//! The crate is organised bottom-up:
//!
//! * [`imagestack`]: PNG I/O, patch sampling, procedural clean images and
//!   seeded synthetic degradations (rain, noise, blur, haze, low light).
//! * [`lindecomp`]: one-sided Jacobi SVD, 2D DFT, recomposition,
//!   progressive reconstruction and the SVD-vs-FFT timing harness.
//! * [`degradelab`]: recomposition analysis that sorts a degradation into
//!   singular-vector-dominated or singular-value-dominated.
//! * [`nn`]: a small tape-based reverse-mode autodiff engine with the
//!   restoration operators (SVEO, SVAO) and losses.
//! * [`train`]: a toy residual backbone, Adam, checkpoints, PSNR/SSIM and
//!   the ablation harness.

// `!(x >= 0.0)` is the NaN-rejecting form used by the validators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod degradelab;
pub mod error;
pub mod imagestack;
pub mod lindecomp;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
pub use imagestack::{Degradation, DegradationSpec, Image};
pub use lindecomp::{BenchReport, Spectrum, SvdFactors};
