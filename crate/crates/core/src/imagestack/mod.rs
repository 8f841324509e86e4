//! Images, PNG I/O, patch sampling and seeded synthetic degradations.

mod degrade;
mod image;
mod patches;
mod synth;

pub use degrade::{
    apply_degradation, gaussian_kernel, motion_kernel, BlurParams, Degradation, DegradationKind, DegradationSpec,
    HazeParams, Kernel, LowLightParams, NoiseParams, RainParams,
};
pub use image::{decode_png, encode_png, load_image, quantize, save_image, Image, MIN_GENERATOR_SIDE};
pub use patches::{patch_positions, sample_patches};
pub use synth::{synthesize_clean, synthesize_clean_with, SceneParams};
