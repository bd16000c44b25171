//! 8-bit PNG input and output.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{ImagePlane, RgbImage};

/// Rounds half away from zero and clamps to the 8-bit range.
#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let decoded = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })?;
    Ok(from_rgb8(&decoded.to_rgb8()))
}

pub fn from_rgb8(buf: &image::RgbImage) -> RgbImage {
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let channel = |c: usize| {
        let samples = buf.pixels().map(|p| f64::from(p.0[c])).collect();
        ImagePlane::new(w, h, samples).expect("decoded image has valid dimensions")
    };
    RgbImage::new(channel(0), channel(1), channel(2)).expect("planes share dimensions")
}

pub fn to_rgb8(img: &RgbImage) -> image::RgbImage {
    let (w, h) = img.dims();
    let [r, g, b] = img.planes();
    let mut raw = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        raw.push(quantize(r.samples()[i]));
        raw.push(quantize(g.samples()[i]));
        raw.push(quantize(b.samples()[i]));
    }
    image::RgbImage::from_raw(w as u32, h as u32, raw).expect("buffer sized to image")
}

fn write_err(path: &Path, source: image::ImageError) -> Error {
    match source {
        image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    }
}

pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    to_rgb8(img)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| write_err(path, e))
}

/// Writes a plane as grayscale PNG after multiplying each sample by `gain`.
/// Weight maps in [0, 1] use `gain = 255`.
pub fn save_gray(plane: &ImagePlane, gain: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw = plane.samples().iter().map(|&v| quantize(v * gain)).collect();
    let buf = image::GrayImage::from_raw(plane.width() as u32, plane.height() as u32, raw)
        .expect("buffer sized to plane");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| write_err(path, e))
}
