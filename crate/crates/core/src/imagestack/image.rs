use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest height/width accepted by the degradation generators.
pub const MIN_GENERATOR_SIDE: usize = 8;

/// An `height × width × channels` image with values in `[0, 1]`, stored
/// row-major as `(h, w, c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "buffer of {} values for a {height}x{width}x{channels} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image data"));
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image from per-channel `h × w` planes. Values are clamped
    /// to `[0, 1]` only when `clamp` is set.
    pub fn from_planes(planes: &[DMatrix<f64>], clamp: bool) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::InvalidParameter("no planes".into()))?;
        let (h, w) = first.shape();
        if planes.iter().any(|p| p.shape() != (h, w)) {
            return Err(Error::ShapeMismatch("planes differ in shape".into()));
        }
        let c = planes.len();
        let mut data = vec![0.0f32; h * w * c];
        for (ci, p) in planes.iter().enumerate() {
            for y in 0..h {
                for x in 0..w {
                    let v = p[(y, x)] as f32;
                    data[(y * w + x) * c + ci] = if clamp { v.clamp(0.0, 1.0) } else { v };
                }
            }
        }
        Self::new(h, w, c, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// One channel as an `h × w` matrix in 64-bit precision.
    pub fn plane(&self, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.height, self.width, |y, x| self.get(y, x, c) as f64)
    }

    pub fn planes(&self) -> Vec<DMatrix<f64>> {
        (0..self.channels).map(|c| self.plane(c)).collect()
    }

    /// Applies `f` to every value, then clamps to `[0, 1]`.
    pub fn map_clamped(&self, mut f: impl FnMut(f32) -> f32) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect(),
        }
    }

    /// Copies the `size × size` window whose top-left corner is `(y, x)`.
    pub fn crop(&self, y: usize, x: usize, size_h: usize, size_w: usize) -> Result<Image> {
        if y + size_h > self.height || x + size_w > self.width {
            return Err(Error::InvalidParameter(format!(
                "crop {size_h}x{size_w} at ({y},{x}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(size_h * size_w * c);
        for row in y..y + size_h {
            let start = (row * self.width + x) * c;
            data.extend_from_slice(&self.data[start..start + size_w * c]);
        }
        Ok(Image {
            height: size_h,
            width: size_w,
            channels: c,
            data,
        })
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn ensure_generator_size(&self) -> Result<()> {
        if self.height < MIN_GENERATOR_SIDE || self.width < MIN_GENERATOR_SIDE {
            return Err(Error::InvalidParameter(format!(
                "image is {}x{}, generators need at least {MIN_GENERATOR_SIDE}x{MIN_GENERATOR_SIDE}",
                self.height, self.width
            )));
        }
        Ok(())
    }

    pub(crate) fn from_raw_unchecked(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Image {
        debug_assert_eq!(data.len(), height * width * channels);
        Image {
            height,
            width,
            channels,
            data,
        }
    }
}

/// Reads an 8-bit grayscale or RGB PNG. Values are `byte / 255`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_png(&bytes)
}

pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| Error::Decode(e.to_string()))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Decode(format!(
            "unsupported bit depth {:?} (only 8-bit is supported)",
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::Decode(format!(
                "unsupported color type {other:?} (only grayscale and RGB are supported)"
            )))
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Decode("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| Error::Decode(e.to_string()))?;
    let row_bytes = width * channels;
    let mut data = Vec::with_capacity(height * row_bytes);
    for row in 0..height {
        let start = row * frame.line_size;
        data.extend(buf[start..start + row_bytes].iter().map(|&b| b as f32 / 255.0));
    }
    Image::new(height, width, channels, data)
}

/// Writes an 8-bit PNG, quantizing with `round(v · 255)` after clamping.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    encode_png_to(img, BufWriter::new(file))
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    encode_png_to(img, &mut out)?;
    Ok(out)
}

fn encode_png_to<W: std::io::Write>(img: &Image, w: W) -> Result<()> {
    let mut encoder = png::Encoder::new(w, img.width as u32, img.height as u32);
    encoder.set_color(if img.channels == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| Error::Encode(e.to_string()))?;
    let bytes: Vec<u8> = img.data.iter().map(|&v| quantize(v)).collect();
    writer
        .write_image_data(&bytes)
        .map_err(|e| Error::Encode(e.to_string()))?;
    writer.finish().map_err(|e| Error::Encode(e.to_string()))
}

#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
