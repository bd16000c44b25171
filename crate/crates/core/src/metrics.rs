//! PSNR and SSIM on the BT.601 luma plane.

use crate::error::{Error, Result};
use crate::image::{luma, ImagePlane, RgbImage};

pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricResult {
    /// Decibels; `f64::INFINITY` when the luma planes are identical.
    pub psnr_y: f64,
    pub ssim: f64,
}

fn check_dims(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::mismatch("metric inputs", a.dims(), b.dims()));
    }
    Ok(())
}

pub fn mse(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::mismatch("mse inputs", a.dims(), b.dims()));
    }
    let sum: f64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// PSNR of two planes against a 255 peak; infinite for identical planes.
pub fn psnr_plane(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

pub fn psnr_y(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a, b)?;
    psnr_plane(&luma(a), &luma(b))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

/// Separable Gaussian filter keeping only fully covered positions.
fn filter_valid(src: &[f64], width: usize, height: usize, win: &[f64]) -> Vec<f64> {
    let n = win.len();
    let out_w = width - n + 1;
    let out_h = height - n + 1;
    let mut tmp = vec![0.0; out_w * height];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..out_w {
            tmp[y * out_w + x] = win.iter().zip(&row[x..x + n]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; out_w * out_h];
    for y in 0..out_h {
        for x in 0..out_w {
            out[y * out_w + x] = win
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[(y + k) * out_w + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM of two planes: 11×11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, L = 255, valid positions only.
pub fn ssim_plane(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::mismatch("ssim inputs", a.dims(), b.dims()));
    }
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::mismatch(
            "ssim needs at least the window size",
            (SSIM_WINDOW, SSIM_WINDOW),
            (w, h),
        ));
    }
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let win = gaussian_window();
    let (xs, ys) = (a.samples(), b.samples());
    let sq = |s: &[f64]| s.iter().map(|v| v * v).collect::<Vec<_>>();
    let cross: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x * y).collect();

    let mu_x = filter_valid(xs, w, h, &win);
    let mu_y = filter_valid(ys, w, h, &win);
    let ex2 = filter_valid(&sq(xs), w, h, &win);
    let ey2 = filter_valid(&sq(ys), w, h, &win);
    let exy = filter_valid(&cross, w, h, &win);

    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let var_x = ex2[i] - mx * mx;
        let var_y = ey2[i] - my * my;
        let cov = exy[i] - mx * my;
        let num = (2.0 * (mx * my) + c1) * (2.0 * cov + c2);
        let den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
        total += num / den;
    }
    Ok(total / mu_x.len() as f64)
}

pub fn ssim_y(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a, b)?;
    ssim_plane(&luma(a), &luma(b))
}

pub fn evaluate(a: &RgbImage, b: &RgbImage) -> Result<MetricResult> {
    check_dims(a, b)?;
    let (ya, yb) = (luma(a), luma(b));
    Ok(MetricResult {
        psnr_y: psnr_plane(&ya, &yb)?,
        ssim: ssim_plane(&ya, &yb)?,
    })
}
