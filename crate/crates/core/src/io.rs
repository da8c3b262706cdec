//! PNG input/output, noise simulation and PSNR.

use std::path::Path;

use image::{DynamicImage, ExtendedColorType, ImageError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::Image;

fn map_image_error(path: &Path, e: ImageError) -> Error {
    match e {
        ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

fn planar_from<T: Copy + Into<f64>>(
    w: usize,
    h: usize,
    src: &[T],
    stride: usize,
    channels: usize,
    max: f64,
) -> Image {
    Image::from_fn(w, h, channels, |x, y, c| {
        src[(y * w + x) * stride + c].into() / max
    })
}

/// Loads an 8- or 16-bit grayscale or RGB PNG, scaled to `[0, 1]`.
/// An alpha channel, if present, is dropped.
pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    let img = reader.decode().map_err(|e| map_image_error(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    const MAX8: f64 = 255.0;
    const MAX16: f64 = 65535.0;
    Ok(match &img {
        DynamicImage::ImageLuma8(b) => planar_from(w, h, b.as_raw(), 1, 1, MAX8),
        DynamicImage::ImageLumaA8(b) => planar_from(w, h, b.as_raw(), 2, 1, MAX8),
        DynamicImage::ImageRgb8(b) => planar_from(w, h, b.as_raw(), 3, 3, MAX8),
        DynamicImage::ImageRgba8(b) => planar_from(w, h, b.as_raw(), 4, 3, MAX8),
        DynamicImage::ImageLuma16(b) => planar_from(w, h, b.as_raw(), 1, 1, MAX16),
        DynamicImage::ImageLumaA16(b) => planar_from(w, h, b.as_raw(), 2, 1, MAX16),
        DynamicImage::ImageRgb16(b) => planar_from(w, h, b.as_raw(), 3, 3, MAX16),
        DynamicImage::ImageRgba16(b) => planar_from(w, h, b.as_raw(), 4, 3, MAX16),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                format: format!("{:?}", other.color()),
            })
        }
    })
}

/// Clamps to `[0, 1]` and rounds half-up to 8 bits.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Writes an 8-bit grayscale (1 channel) or RGB (3 channels) PNG.
pub fn save_png(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match img.channels() {
        1 => ExtendedColorType::L8,
        3 => ExtendedColorType::Rgb8,
        n => {
            return Err(Error::ChannelCount {
                expected: 3,
                actual: n,
            })
        }
    };
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let mut buf = Vec::with_capacity(w * h * c);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                buf.push(quantize(img.get(x, y, ch)));
            }
        }
    }
    image::save_buffer_with_format(
        path,
        &buf,
        w as u32,
        h as u32,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|e| map_image_error(path, e))
}

/// Adds i.i.d. Gaussian noise of standard deviation `sigma_8bit / 255` to
/// every sample. No clamping. The same seed always yields the same noise.
pub fn add_gaussian_noise(img: &Image, sigma_8bit: f64, seed: u64) -> Result<Image> {
    if !(sigma_8bit >= 0.0 && sigma_8bit.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma {sigma_8bit} must be >= 0"
        )));
    }
    let mut out = img.clone();
    if sigma_8bit == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma_8bit / 255.0).expect("finite positive sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.data_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}

/// Peak signal-to-noise ratio in dB for `[0, 1]` images; infinite when identical.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b)?;
    let n = a.data().len() as f64;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}
