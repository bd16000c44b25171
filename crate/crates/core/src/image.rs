//! Real-valued image containers and BT.601 color conversion.
//!
//! Samples are `f64` on the nominal 0–255 scale and are never quantized
//! inside the pipeline; rounding to 8 bits happens only when writing PNGs.

use crate::error::{Error, Result};

/// A single-channel, row-major grid of finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "plane dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} plane needs {} samples, got {}",
                width * height,
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "non-finite sample {} at index {i}",
                samples[i]
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    /// Plane with every sample set to `value`.
    ///
    /// Panics if a dimension is zero or `value` is not finite.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("valid constant plane")
    }

    /// Builds a plane by evaluating `f(x, y)` at every pixel.
    ///
    /// Panics if a dimension is zero or `f` produces a non-finite value.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self::new(width, height, samples).expect("valid generated plane")
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), width * height);
        debug_assert!(samples.iter().all(|v| v.is_finite()));
        Self {
            width,
            height,
            samples,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.samples[y * self.width..(y + 1) * self.width]
    }

    /// Applies `f` to every sample. Panics if `f` yields a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let samples: Vec<f64> = self.samples.iter().map(|&v| f(v)).collect();
        Self::new(self.width, self.height, samples).expect("finite mapped plane")
    }

    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Self> {
        check_region(self.dims(), x, y, width, height)?;
        let mut samples = Vec::with_capacity(width * height);
        for row in y..y + height {
            let start = row * self.width + x;
            samples.extend_from_slice(&self.samples[start..start + width]);
        }
        Ok(Self::from_raw(width, height, samples))
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut samples = Vec::with_capacity(self.samples.len());
        for y in 0..self.height {
            samples.extend(self.row(y).iter().rev());
        }
        Self::from_raw(self.width, self.height, samples)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

pub(crate) fn check_region(
    dims: (usize, usize),
    x: usize,
    y: usize,
    width: usize,
    height: usize,
) -> Result<()> {
    let fits = width >= 1
        && height >= 1
        && x.checked_add(width).is_some_and(|r| r <= dims.0)
        && y.checked_add(height).is_some_and(|b| b <= dims.1);
    if fits {
        Ok(())
    } else {
        Err(Error::OutOfBounds {
            x,
            y,
            width,
            height,
            image_width: dims.0,
            image_height: dims.1,
        })
    }
}

fn check_same_dims(planes: [&ImagePlane; 3], what: &str) -> Result<()> {
    let first = planes[0].dims();
    for p in &planes[1..] {
        if p.dims() != first {
            return Err(Error::mismatch(format!("{what} planes"), first, p.dims()));
        }
    }
    Ok(())
}

/// Three-plane RGB image, channels on the 0–255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    r: ImagePlane,
    g: ImagePlane,
    b: ImagePlane,
}

impl RgbImage {
    pub fn new(r: ImagePlane, g: ImagePlane, b: ImagePlane) -> Result<Self> {
        check_same_dims([&r, &g, &b], "RGB")?;
        Ok(Self { r, g, b })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Self {
            r: ImagePlane::filled(width, height, rgb[0]),
            g: ImagePlane::filled(width, height, rgb[1]),
            b: ImagePlane::filled(width, height, rgb[2]),
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        Self {
            r: ImagePlane::from_fn(width, height, |x, y| f(x, y)[0]),
            g: ImagePlane::from_fn(width, height, |x, y| f(x, y)[1]),
            b: ImagePlane::from_fn(width, height, |x, y| f(x, y)[2]),
        }
    }

    /// Gray image with the same plane in all three channels.
    pub fn gray(plane: ImagePlane) -> Self {
        Self {
            r: plane.clone(),
            g: plane.clone(),
            b: plane,
        }
    }

    pub fn width(&self) -> usize {
        self.r.width
    }

    pub fn height(&self) -> usize {
        self.r.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }

    pub fn r(&self) -> &ImagePlane {
        &self.r
    }

    pub fn g(&self) -> &ImagePlane {
        &self.g
    }

    pub fn b(&self) -> &ImagePlane {
        &self.b
    }

    pub fn planes(&self) -> [&ImagePlane; 3] {
        [&self.r, &self.g, &self.b]
    }

    pub fn into_planes(self) -> [ImagePlane; 3] {
        [self.r, self.g, self.b]
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        [self.r.get(x, y), self.g.get(x, y), self.b.get(x, y)]
    }

    /// Applies a plane-to-plane transform to each channel.
    pub fn map_planes(&self, mut f: impl FnMut(&ImagePlane) -> ImagePlane) -> Self {
        Self {
            r: f(&self.r),
            g: f(&self.g),
            b: f(&self.b),
        }
    }

    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Self> {
        Ok(Self {
            r: self.r.crop(x, y, width, height)?,
            g: self.g.crop(x, y, width, height)?,
            b: self.b.crop(x, y, width, height)?,
        })
    }

    /// Crops the centered `width`×`height` window. Odd leftovers go to the
    /// right/bottom edge.
    pub fn center_crop(&self, width: usize, height: usize) -> Result<Self> {
        let (w, h) = self.dims();
        if width > w || height > h {
            return Err(Error::mismatch("center crop larger than image", (w, h), (width, height)));
        }
        self.crop((w - width) / 2, (h - height) / 2, width, height)
    }

    pub fn flip_horizontal(&self) -> Self {
        self.map_planes(ImagePlane::flip_horizontal)
    }
}

/// Y/Cb/Cr planes in BT.601 studio swing (Y in 16–235, chroma centered on 128).
#[derive(Debug, Clone, PartialEq)]
pub struct YcbcrImage {
    y: ImagePlane,
    cb: ImagePlane,
    cr: ImagePlane,
}

impl YcbcrImage {
    pub fn new(y: ImagePlane, cb: ImagePlane, cr: ImagePlane) -> Result<Self> {
        check_same_dims([&y, &cb, &cr], "YCbCr")?;
        Ok(Self { y, cb, cr })
    }

    pub fn y(&self) -> &ImagePlane {
        &self.y
    }

    pub fn cb(&self) -> &ImagePlane {
        &self.cb
    }

    pub fn cr(&self) -> &ImagePlane {
        &self.cr
    }

    pub fn into_luma(self) -> ImagePlane {
        self.y
    }
}

// BT.601 studio-swing forward matrix, coefficients scaled by 1/255.
const Y_COEF: [f64; 3] = [65.481, 128.553, 24.966];
const CB_COEF: [f64; 3] = [-37.797, -74.203, 112.0];
const CR_COEF: [f64; 3] = [112.0, -93.786, -18.214];

#[inline]
fn luma_of(r: f64, g: f64, b: f64) -> f64 {
    16.0 + (Y_COEF[0] * r + Y_COEF[1] * g + Y_COEF[2] * b) / 255.0
}

pub fn rgb_to_ycbcr(img: &RgbImage) -> YcbcrImage {
    let (w, h) = img.dims();
    let (r, g, b) = (img.r.samples(), img.g.samples(), img.b.samples());
    let n = w * h;
    let mut y = Vec::with_capacity(n);
    let mut cb = Vec::with_capacity(n);
    let mut cr = Vec::with_capacity(n);
    for i in 0..n {
        let (rv, gv, bv) = (r[i], g[i], b[i]);
        y.push(luma_of(rv, gv, bv));
        cb.push(128.0 + (CB_COEF[0] * rv + CB_COEF[1] * gv + CB_COEF[2] * bv) / 255.0);
        cr.push(128.0 + (CR_COEF[0] * rv + CR_COEF[1] * gv + CR_COEF[2] * bv) / 255.0);
    }
    YcbcrImage {
        y: ImagePlane::from_raw(w, h, y),
        cb: ImagePlane::from_raw(w, h, cb),
        cr: ImagePlane::from_raw(w, h, cr),
    }
}

/// Y plane only; identical to `rgb_to_ycbcr(img).y()`.
pub fn luma(img: &RgbImage) -> ImagePlane {
    let (w, h) = img.dims();
    let samples = img
        .r
        .samples()
        .iter()
        .zip(img.g.samples())
        .zip(img.b.samples())
        .map(|((&r, &g), &b)| luma_of(r, g, b))
        .collect();
    ImagePlane::from_raw(w, h, samples)
}

/// Inverse of [`rgb_to_ycbcr`]. Output is not clamped.
pub fn ycbcr_to_rgb(img: &YcbcrImage) -> RgbImage {
    const KR: f64 = 0.299;
    const KB: f64 = 0.114;
    const KG: f64 = 1.0 - KR - KB;
    let ys = 255.0 / 219.0;
    let cs = 255.0 / 224.0;
    let (w, h) = img.y.dims();
    let n = w * h;
    let (mut r, mut g, mut b) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let yv = ys * (img.y.samples[i] - 16.0);
        let pb = cs * (img.cb.samples[i] - 128.0);
        let pr = cs * (img.cr.samples[i] - 128.0);
        r.push(yv + 2.0 * (1.0 - KR) * pr);
        g.push(yv - 2.0 * (1.0 - KB) * KB / KG * pb - 2.0 * (1.0 - KR) * KR / KG * pr);
        b.push(yv + 2.0 * (1.0 - KB) * pb);
    }
    RgbImage {
        r: ImagePlane::from_raw(w, h, r),
        g: ImagePlane::from_raw(w, h, g),
        b: ImagePlane::from_raw(w, h, b),
    }
}
