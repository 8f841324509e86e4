//! Decomposition engine: SVD, 2D DFT, recomposition, progressive
//! reconstruction and the SVD-vs-FFT timing harness.

mod bench;
pub mod fourier;
mod progressive;
mod recompose;
mod svd;

pub use bench::{bench_decomp, BenchReport, PhaseTimes};
pub use fourier::{dft2, dft2_complex, idft2, idft2_with_residual, Fft2, Spectrum};
pub use progressive::{curve_to_csv, progressive_reconstruction, ProgressiveOrder};
pub use recompose::{
    check_orthogonal_invariance, random_orthogonal, recompose, relative_error, ORTHOGONALITY_TOLERANCE,
};
pub use svd::{orthonormality_residual, reconstruction_residual, singular_values, svd, SvdFactors};
