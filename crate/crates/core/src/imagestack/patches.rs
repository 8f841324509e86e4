use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::Image;
use crate::{Error, Result};

/// Top-left corners of `count` square windows of side `size`, drawn
/// uniformly from the valid positions. Depends only on the image size and
/// the seed, so a clean/degraded pair sampled with one seed stays aligned.
pub fn patch_positions(
    height: usize,
    width: usize,
    size: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    if size == 0 || size > height.min(width) {
        return Err(Error::InvalidParameter(format!(
            "patch size {size} does not fit a {height}x{width} image"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| (rng.random_range(0..=height - size), rng.random_range(0..=width - size)))
        .collect())
}

pub fn sample_patches(img: &Image, size: usize, count: usize, seed: u64) -> Result<Vec<Image>> {
    patch_positions(img.height(), img.width(), size, count, seed)?
        .into_iter()
        .map(|(y, x)| img.crop(y, x, size, size))
        .collect()
}
