//! Separable bicubic resampling (Keys kernel, a = -0.5).
//!
//! Grids are aligned on pixel centers: output sample `o` sits at input
//! coordinate `(o + 0.5) * in / out - 0.5`. When shrinking, the kernel is
//! stretched by the scale factor so the filter also acts as the
//! antialiasing prefilter. Out-of-range taps replicate the edge sample and
//! each output's weights are normalized to sum to one.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{ImagePlane, RgbImage};

pub const CUBIC_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
#[inline]
pub fn cubic_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Per-output taps along one axis, stored flat with a fixed tap count.
#[derive(Debug, Clone)]
struct AxisTaps {
    taps: usize,
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl AxisTaps {
    fn new(in_len: usize, out_len: usize) -> Self {
        let ratio = out_len as f64 / in_len as f64;
        let stretch = ratio.min(1.0);
        let radius = 2.0 / stretch;
        let taps = radius.ceil() as usize * 2 + 2;
        let last = in_len as isize - 1;

        let mut indices = Vec::with_capacity(out_len * taps);
        let mut weights = Vec::with_capacity(out_len * taps);
        for o in 0..out_len {
            let center = (o as f64 + 0.5) / ratio - 0.5;
            let first = (center - radius).floor() as isize;
            let start = weights.len();
            for k in 0..taps as isize {
                let j = first + k;
                weights.push(stretch * cubic_kernel(stretch * (center - j as f64)));
                indices.push(j.clamp(0, last) as usize);
            }
            let row = &mut weights[start..];
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|w| *w /= sum);
        }
        Self {
            taps,
            indices,
            weights,
        }
    }

    #[inline]
    fn apply(&self, o: usize, sample: impl Fn(usize) -> f64) -> f64 {
        let span = o * self.taps..(o + 1) * self.taps;
        self.indices[span.clone()]
            .iter()
            .zip(&self.weights[span])
            .map(|(&j, &w)| w * sample(j))
            .sum()
    }
}

fn check_target(out_width: usize, out_height: usize) -> Result<()> {
    if out_width == 0 || out_height == 0 {
        return Err(Error::InvalidConfig(format!(
            "resample target must be at least 1x1, got {out_width}x{out_height}"
        )));
    }
    Ok(())
}

/// Bicubic resample without the final clamp to [0, 255].
pub fn resample_unclamped(
    plane: &ImagePlane,
    out_width: usize,
    out_height: usize,
) -> Result<ImagePlane> {
    check_target(out_width, out_height)?;
    let (in_w, in_h) = plane.dims();
    let horizontal = AxisTaps::new(in_w, out_width);
    let vertical = AxisTaps::new(in_h, out_height);

    let mut tmp = vec![0.0; out_width * in_h];
    tmp.par_chunks_mut(out_width)
        .enumerate()
        .for_each(|(y, out_row)| {
            let row = plane.row(y);
            for (x, v) in out_row.iter_mut().enumerate() {
                *v = horizontal.apply(x, |j| row[j]);
            }
        });

    let mut out = vec![0.0; out_width * out_height];
    out.par_chunks_mut(out_width)
        .enumerate()
        .for_each(|(y, out_row)| {
            for (x, v) in out_row.iter_mut().enumerate() {
                *v = vertical.apply(y, |j| tmp[j * out_width + x]);
            }
        });
    Ok(ImagePlane::from_raw(out_width, out_height, out))
}

/// Bicubic resample to `out_width`×`out_height`, clamped to [0, 255].
///
/// Serves both as the downsampling operator (target smaller than source)
/// and the upsampling operator.
pub fn bicubic_resample(
    plane: &ImagePlane,
    out_width: usize,
    out_height: usize,
) -> Result<ImagePlane> {
    let out = resample_unclamped(plane, out_width, out_height)?;
    let (w, h) = out.dims();
    let samples = out
        .into_samples()
        .into_iter()
        .map(|v| v.clamp(0.0, 255.0))
        .collect();
    Ok(ImagePlane::from_raw(w, h, samples))
}

pub fn resample_rgb(img: &RgbImage, out_width: usize, out_height: usize) -> Result<RgbImage> {
    check_target(out_width, out_height)?;
    let [r, g, b] = img.planes();
    RgbImage::new(
        bicubic_resample(r, out_width, out_height)?,
        bicubic_resample(g, out_width, out_height)?,
        bicubic_resample(b, out_width, out_height)?,
    )
}

/// Output size when shrinking by an integer factor: `ceil(len / factor)`.
pub fn downscaled_dims(dims: (usize, usize), factor: usize) -> (usize, usize) {
    (dims.0.div_ceil(factor), dims.1.div_ceil(factor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_values() {
        assert_eq!(cubic_kernel(0.0), 1.0);
        assert_eq!(cubic_kernel(1.0), 0.0);
        assert_eq!(cubic_kernel(-2.0), 0.0);
        assert_eq!(cubic_kernel(3.5), 0.0);
        // a = -0.5: k(0.5) = 0.5625, k(1.5) = -0.0625
        assert!((cubic_kernel(0.5) - 0.5625).abs() < 1e-15);
        assert!((cubic_kernel(-1.5) + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn zero_target_rejected() {
        let p = ImagePlane::filled(4, 4, 1.0);
        assert!(bicubic_resample(&p, 0, 3).is_err());
        assert!(bicubic_resample(&p, 3, 0).is_err());
    }

    #[test]
    fn identity_is_exact() {
        let p = ImagePlane::from_fn(7, 5, |x, y| (x * 31 + y * 17) as f64 % 255.0);
        let out = bicubic_resample(&p, 7, 5).unwrap();
        for (a, b) in out.samples().iter().zip(p.samples()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_plane_any_size() {
        let p = ImagePlane::filled(9, 6, 100.0);
        for (w, h) in [(1, 1), (3, 2), (9, 6), (20, 13), (36, 24)] {
            let out = bicubic_resample(&p, w, h).unwrap();
            assert_eq!(out.dims(), (w, h));
            assert!(out.samples().iter().all(|v| (v - 100.0).abs() < 1e-9));
        }
    }

    #[test]
    fn upsampled_overshoot_is_clamped() {
        let p = ImagePlane::from_fn(4, 1, |x, _| if x < 2 { 0.0 } else { 255.0 });
        let raw = resample_unclamped(&p, 16, 1).unwrap();
        let (lo, hi) = raw.min_max();
        assert!(lo < 0.0 && hi > 255.0);
        let clamped = bicubic_resample(&p, 16, 1).unwrap();
        let (lo, hi) = clamped.min_max();
        assert!(lo >= 0.0 && hi <= 255.0);
    }

    #[test]
    fn downscaled_dims_rounds_up() {
        assert_eq!(downscaled_dims((128, 128), 4), (32, 32));
        assert_eq!(downscaled_dims((130, 5), 4), (33, 2));
    }

    proptest! {
        #[test]
        fn constant_partition_of_unity(
            value in 0.0f64..255.0,
            in_w in 1usize..20, in_h in 1usize..20,
            out_w in 1usize..40, out_h in 1usize..40,
        ) {
            let p = ImagePlane::filled(in_w, in_h, value);
            let out = resample_unclamped(&p, out_w, out_h).unwrap();
            for v in out.samples() {
                prop_assert!((v - value).abs() < 1e-9);
            }
        }

        #[test]
        fn output_finite_and_in_range(
            samples in proptest::collection::vec(0.0f64..=255.0, 36),
            out_w in 1usize..25, out_h in 1usize..25,
        ) {
            let p = ImagePlane::new(6, 6, samples).unwrap();
            let out = bicubic_resample(&p, out_w, out_h).unwrap();
            for &v in out.samples() {
                prop_assert!(v.is_finite() && (0.0..=255.0).contains(&v));
            }
        }
    }
}
