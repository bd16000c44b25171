//! Posterior fusion of several single-reference SR outputs.
//!
//! Two weighting steps are combined:
//!
//! * an adaptive per-pixel mask `W_i = U(exp(-beta * (D(I_i) - I_lr)^2))`,
//!   scoring how well each candidate agrees with the low-resolution input
//!   after bicubic downsampling `D` (and upsampled back with `U`);
//! * a global per-candidate weight `w_i = exp(beta_g * A_i)`, where `A_i`
//!   is the number of pixels at which candidate `i` holds the largest mask
//!   value.
//!
//! The fused pixel is `sum_i V_i(p) I_i(p) / sum_i V_i(p)` with
//! `V_i(p) = w_i * W_i(p)`. With `beta = 0` and `beta_g = 0` this is the
//! plain per-pixel mean.
//!
//! Masks are computed on the BT.601 luma plane and shared by all three
//! color channels. Luma differences are divided by
//! [`FusionConfig::intensity_normalizer`] (255 by default) before the
//! penalty is applied, so `beta` acts on intensities in [0, 1].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{luma, ImagePlane, RgbImage};
use crate::resample::bicubic_resample;

/// How candidates whose sizes disagree are reconciled before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CropPolicy {
    /// Center-crop every candidate to the smallest common size, then to
    /// `lr × scale` if that is smaller still.
    #[default]
    CenterCrop,
    /// Any mismatch is an error.
    Strict,
}

impl std::str::FromStr for CropPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center-crop" | "center" => Ok(CropPolicy::CenterCrop),
            "strict" => Ok(CropPolicy::Strict),
            other => Err(Error::InvalidConfig(format!(
                "unknown crop policy {other:?} (expected center-crop or strict)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    /// Penalty on the squared LR discrepancy of the adaptive mask.
    pub beta: f64,
    /// Exponent scale of the global mask-area weight.
    pub beta_g: f64,
    /// Integer ratio between candidate and LR dimensions.
    pub scale: usize,
    /// Lower clamp for mask weights; keeps the normalizer positive.
    pub weight_epsilon: f64,
    /// Luma differences are divided by this before squaring.
    pub intensity_normalizer: f64,
    pub crop_policy: CropPolicy,
    /// Keep the per-candidate masks in the [`FusionReport`].
    pub export_masks: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            beta: 300.0,
            beta_g: 2.0,
            scale: 4,
            weight_epsilon: 1e-12,
            intensity_normalizer: 255.0,
            crop_policy: CropPolicy::CenterCrop,
            export_masks: false,
        }
    }
}

impl FusionConfig {
    pub fn with_betas(beta: f64, beta_g: f64) -> Self {
        Self {
            beta,
            beta_g,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad(format!("beta must be a finite value >= 0, got {}", self.beta));
        }
        if !(self.beta_g.is_finite() && self.beta_g >= 0.0) {
            return bad(format!("beta_g must be a finite value >= 0, got {}", self.beta_g));
        }
        if self.scale == 0 {
            return bad("scale must be >= 1".into());
        }
        if !(self.weight_epsilon > 0.0 && self.weight_epsilon <= 1.0) {
            return bad(format!(
                "weight_epsilon must lie in (0, 1], got {}",
                self.weight_epsilon
            ));
        }
        if !(self.intensity_normalizer.is_finite() && self.intensity_normalizer > 0.0) {
            return bad(format!(
                "intensity_normalizer must be positive, got {}",
                self.intensity_normalizer
            ));
        }
        Ok(())
    }
}

/// The LR input together with its SR candidates, best reference first.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    lr_input: RgbImage,
    candidates: Vec<RgbImage>,
    scale: usize,
}

impl CandidateSet {
    /// Requires every candidate to be exactly `lr × scale`.
    pub fn new(lr_input: RgbImage, candidates: Vec<RgbImage>, scale: usize) -> Result<Self> {
        Self::with_policy(lr_input, candidates, scale, CropPolicy::Strict)
    }

    pub fn with_policy(
        lr_input: RgbImage,
        candidates: Vec<RgbImage>,
        scale: usize,
        policy: CropPolicy,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Empty("candidate set needs at least one candidate"));
        }
        if scale == 0 {
            return Err(Error::InvalidConfig("scale must be >= 1".into()));
        }
        let target = (lr_input.width() * scale, lr_input.height() * scale);
        let candidates = match policy {
            CropPolicy::Strict => {
                for (i, c) in candidates.iter().enumerate() {
                    if c.dims() != target {
                        return Err(Error::mismatch(
                            format!("candidate {} vs LR input x{scale}", i + 1),
                            target,
                            c.dims(),
                        ));
                    }
                }
                candidates
            }
            CropPolicy::CenterCrop => {
                let common = candidates.iter().fold((usize::MAX, usize::MAX), |acc, c| {
                    (acc.0.min(c.width()), acc.1.min(c.height()))
                });
                if common.0 < target.0 || common.1 < target.1 {
                    return Err(Error::mismatch(
                        format!("smallest candidate vs LR input x{scale}"),
                        target,
                        common,
                    ));
                }
                candidates
                    .into_iter()
                    .map(|c| {
                        if c.dims() == target {
                            Ok(c)
                        } else {
                            c.center_crop(target.0, target.1)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(Self {
            lr_input,
            candidates,
            scale,
        })
    }

    pub fn lr_input(&self) -> &RgbImage {
        &self.lr_input
    }

    pub fn candidates(&self) -> &[RgbImage] {
        &self.candidates
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn hr_dims(&self) -> (usize, usize) {
        self.candidates[0].dims()
    }

    /// The set restricted to its first `k` candidates.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot fuse {k} of {} candidates",
                self.len()
            )));
        }
        Ok(Self {
            lr_input: self.lr_input.clone(),
            candidates: self.candidates[..k].to_vec(),
            scale: self.scale,
        })
    }

    /// Same set with candidates reordered so that position `i` holds the
    /// old candidate `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        for &i in order {
            if i >= self.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidConfig(format!("{order:?} is not a permutation")));
            }
        }
        if order.len() != self.len() {
            return Err(Error::InvalidConfig(format!("{order:?} is not a permutation")));
        }
        Ok(Self {
            lr_input: self.lr_input.clone(),
            candidates: order.iter().map(|&i| self.candidates[i].clone()).collect(),
            scale: self.scale,
        })
    }
}

/// Adaptive per-pixel weights for one candidate, values in [epsilon, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMask {
    pub weights: ImagePlane,
    pub source_index: usize,
}

/// One-hot argmax indicator; samples are exactly 0.0 or 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub mask: ImagePlane,
    pub source_index: usize,
}

impl BinaryMask {
    /// Number of pixels where this candidate won.
    pub fn area(&self) -> f64 {
        self.mask.samples().iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct FusionReport {
    pub fused: RgbImage,
    /// Max-normalized global weights; the largest is exactly 1.
    pub global_weights: Vec<f64>,
    /// Pixel count of each binary mask.
    pub mask_areas: Vec<f64>,
    pub weight_masks: Option<Vec<WeightMask>>,
    pub binary_masks: Option<Vec<BinaryMask>>,
}

/// Per-pixel, per-channel mean of all candidates.
pub fn naive_fuse(set: &CandidateSet) -> RgbImage {
    let n = set.len() as f64;
    let (w, h) = set.hr_dims();
    let channel = |c: usize| {
        let mut acc = vec![0.0; w * h];
        for cand in set.candidates() {
            for (a, v) in acc.iter_mut().zip(cand.planes()[c].samples()) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n);
        ImagePlane::from_raw(w, h, acc)
    };
    RgbImage::new(channel(0), channel(1), channel(2)).expect("planes share dimensions")
}

/// Low-resolution weight field `exp(-beta * ((D(Y_i) - Y_lr) / norm)^2)`
/// from luma planes, before upsampling.
fn field_from_luma(
    candidate_y: &ImagePlane,
    lr_y: &ImagePlane,
    config: &FusionConfig,
) -> Result<ImagePlane> {
    let (lr_w, lr_h) = lr_y.dims();
    let down = bicubic_resample(candidate_y, lr_w, lr_h)?;
    let field = down
        .samples()
        .iter()
        .zip(lr_y.samples())
        .map(|(&d, &l)| {
            let e = (d - l) / config.intensity_normalizer;
            (-config.beta * e * e).exp()
        })
        .collect();
    Ok(ImagePlane::from_raw(lr_w, lr_h, field))
}

/// Mask from precomputed luma planes of the candidate and the LR input.
fn mask_from_luma(
    candidate_y: &ImagePlane,
    lr_y: &ImagePlane,
    source_index: usize,
    config: &FusionConfig,
) -> Result<WeightMask> {
    let (hr_w, hr_h) = candidate_y.dims();
    if config.beta == 0.0 {
        return Ok(WeightMask {
            weights: ImagePlane::filled(hr_w, hr_h, 1.0),
            source_index,
        });
    }
    let field = field_from_luma(candidate_y, lr_y, config)?;
    let up = bicubic_resample(&field, hr_w, hr_h)?;
    let eps = config.weight_epsilon;
    let weights = up.into_samples().into_iter().map(|v| v.clamp(eps, 1.0)).collect();
    Ok(WeightMask {
        weights: ImagePlane::from_raw(hr_w, hr_h, weights),
        source_index,
    })
}

fn check_candidate_dims(candidate: &RgbImage, lr_input: &RgbImage, scale: usize) -> Result<()> {
    let target = (lr_input.width() * scale, lr_input.height() * scale);
    if candidate.dims() != target {
        return Err(Error::mismatch(
            format!("candidate vs LR input x{scale}"),
            target,
            candidate.dims(),
        ));
    }
    Ok(())
}

/// The agreement field of a candidate at LR resolution, i.e. the adaptive
/// mask before it is upsampled and clamped. Pointwise non-increasing in
/// `beta`.
pub fn lr_weight_field(
    candidate: &RgbImage,
    lr_input: &RgbImage,
    config: &FusionConfig,
) -> Result<ImagePlane> {
    config.validate()?;
    check_candidate_dims(candidate, lr_input, config.scale)?;
    field_from_luma(&luma(candidate), &luma(lr_input), config)
}

/// Adaptive weight mask of a single candidate against the LR input.
///
/// Uses `config.beta`, `config.scale`, `config.weight_epsilon` and
/// `config.intensity_normalizer`.
pub fn adaptive_weight_mask(
    candidate: &RgbImage,
    lr_input: &RgbImage,
    config: &FusionConfig,
) -> Result<WeightMask> {
    config.validate()?;
    check_candidate_dims(candidate, lr_input, config.scale)?;
    mask_from_luma(&luma(candidate), &luma(lr_input), 0, config)
}

/// Adaptive masks for every candidate of the set, in candidate order.
pub fn weight_masks(set: &CandidateSet, config: &FusionConfig) -> Result<Vec<WeightMask>> {
    config.validate()?;
    let lr_y = luma(set.lr_input());
    set.candidates()
        .par_iter()
        .enumerate()
        .map(|(i, c)| mask_from_luma(&luma(c), &lr_y, i, config))
        .collect()
}

fn check_planes<'a>(
    planes: impl IntoIterator<Item = &'a ImagePlane>,
    dims: (usize, usize),
    what: &str,
) -> Result<()> {
    for (i, p) in planes.into_iter().enumerate() {
        if p.dims() != dims {
            return Err(Error::mismatch(format!("{what} {}", i + 1), dims, p.dims()));
        }
    }
    Ok(())
}

/// Fuses with per-pixel weights `scale_i * masks[i](p)`, normalized per
/// pixel. `scales` of `None` means all ones.
fn weighted_average(
    candidates: &[RgbImage],
    masks: &[&ImagePlane],
    scales: Option<&[f64]>,
) -> Result<RgbImage> {
    if candidates.is_empty() {
        return Err(Error::Empty("no candidates to fuse"));
    }
    if masks.len() != candidates.len() {
        return Err(Error::InvalidConfig(format!(
            "{} candidates but {} masks",
            candidates.len(),
            masks.len()
        )));
    }
    let dims = candidates[0].dims();
    check_planes(candidates.iter().map(|c| c.r()), dims, "candidate")?;
    check_planes(masks.iter().copied(), dims, "mask")?;

    let (w, h) = dims;
    let n = candidates.len();
    let mut out = [vec![0.0; w * h], vec![0.0; w * h], vec![0.0; w * h]];
    let [r, g, b] = &mut out;
    r.par_chunks_mut(w)
        .zip(g.par_chunks_mut(w))
        .zip(b.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, ((r_row, g_row), b_row))| {
            let mut v = vec![0.0; n];
            for x in 0..w {
                let i = y * w + x;
                let mut total = 0.0;
                for (k, vk) in v.iter_mut().enumerate() {
                    let s = scales.map_or(1.0, |s| s[k]);
                    *vk = s * masks[k].samples()[i];
                    total += *vk;
                }
                let (mut acc_r, mut acc_g, mut acc_b) = (0.0, 0.0, 0.0);
                for (k, cand) in candidates.iter().enumerate() {
                    let nw = v[k] / total;
                    acc_r += nw * cand.r().samples()[i];
                    acc_g += nw * cand.g().samples()[i];
                    acc_b += nw * cand.b().samples()[i];
                }
                r_row[x] = acc_r;
                g_row[x] = acc_g;
                b_row[x] = acc_b;
            }
        });
    let [r, g, b] = out;
    RgbImage::new(
        ImagePlane::new(w, h, r)?,
        ImagePlane::new(w, h, g)?,
        ImagePlane::new(w, h, b)?,
    )
}

/// Per-pixel mask-weighted mean of the candidates.
pub fn masked_fuse(candidates: &[RgbImage], masks: &[WeightMask]) -> Result<RgbImage> {
    let planes: Vec<&ImagePlane> = masks.iter().map(|m| &m.weights).collect();
    weighted_average(candidates, &planes, None)
}

/// Per-pixel argmax of the adaptive masks. Ties go to the lowest index.
#[allow(clippy::needless_range_loop)]
pub fn binary_masks(masks: &[WeightMask]) -> Result<Vec<BinaryMask>> {
    let first = masks.first().ok_or(Error::Empty("no weight masks"))?;
    let dims = first.weights.dims();
    check_planes(masks.iter().map(|m| &m.weights), dims, "weight mask")?;

    let mut out = vec![vec![0.0; dims.0 * dims.1]; masks.len()];
    for p in 0..dims.0 * dims.1 {
        let mut best = 0;
        for k in 1..masks.len() {
            if masks[k].weights.samples()[p] > masks[best].weights.samples()[p] {
                best = k;
            }
        }
        out[best][p] = 1.0;
    }
    Ok(out
        .into_iter()
        .zip(masks)
        .map(|(samples, m)| BinaryMask {
            mask: ImagePlane::from_raw(dims.0, dims.1, samples),
            source_index: m.source_index,
        })
        .collect())
}

/// Global weights `exp(beta_g * (A_i - max_j A_j))` from binary-mask areas.
///
/// The shift by the largest area cancels in the fused result and keeps the
/// exponent non-positive.
pub fn global_weights(binary: &[BinaryMask], beta_g: f64) -> Result<Vec<f64>> {
    if binary.is_empty() {
        return Err(Error::Empty("no binary masks"));
    }
    let areas: Vec<f64> = binary.iter().map(BinaryMask::area).collect();
    weights_from_areas(&areas, beta_g)
}

pub fn weights_from_areas(areas: &[f64], beta_g: f64) -> Result<Vec<f64>> {
    if !(beta_g.is_finite() && beta_g >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "beta_g must be a finite value >= 0, got {beta_g}"
        )));
    }
    let max = areas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(areas.iter().map(|a| (beta_g * (a - max)).exp()).collect())
}

/// Combined per-pixel weights `w_i W_i(p)`, normalized to sum to one.
#[allow(clippy::needless_range_loop)]
pub fn normalized_weights(masks: &[WeightMask], global: &[f64]) -> Result<Vec<ImagePlane>> {
    let first = masks.first().ok_or(Error::Empty("no weight masks"))?;
    if global.len() != masks.len() {
        return Err(Error::InvalidConfig(format!(
            "{} masks but {} global weights",
            masks.len(),
            global.len()
        )));
    }
    let (w, h) = first.weights.dims();
    check_planes(masks.iter().map(|m| &m.weights), (w, h), "weight mask")?;
    let mut out = vec![vec![0.0; w * h]; masks.len()];
    for p in 0..w * h {
        let total: f64 = masks
            .iter()
            .zip(global)
            .map(|(m, g)| g * m.weights.samples()[p])
            .sum();
        for (k, m) in masks.iter().enumerate() {
            out[k][p] = global[k] * m.weights.samples()[p] / total;
        }
    }
    Ok(out
        .into_iter()
        .map(|s| ImagePlane::from_raw(w, h, s))
        .collect())
}

/// Adaptive and binary masks of a set for one `beta`; reusable across
/// many `beta_g` values.
#[derive(Debug, Clone)]
pub struct PreparedMasks {
    pub weight_masks: Vec<WeightMask>,
    pub binary_masks: Vec<BinaryMask>,
    pub areas: Vec<f64>,
}

impl PreparedMasks {
    pub fn compute(set: &CandidateSet, config: &FusionConfig) -> Result<Self> {
        let weight_masks = weight_masks(set, config)?;
        let binary_masks = binary_masks(&weight_masks)?;
        let areas = binary_masks.iter().map(BinaryMask::area).collect();
        Ok(Self {
            weight_masks,
            binary_masks,
            areas,
        })
    }

    /// Fused image and global weights for the given `beta_g`.
    pub fn fuse(&self, set: &CandidateSet, beta_g: f64) -> Result<(RgbImage, Vec<f64>)> {
        let global = weights_from_areas(&self.areas, beta_g)?;
        let planes: Vec<&ImagePlane> = self.weight_masks.iter().map(|m| &m.weights).collect();
        let fused = weighted_average(set.candidates(), &planes, Some(&global))?;
        Ok((fused, global))
    }
}

/// Full two-step fusion.
pub fn fuse(set: &CandidateSet, config: &FusionConfig) -> Result<FusionReport> {
    config.validate()?;
    if config.scale != set.scale() {
        return Err(Error::InvalidConfig(format!(
            "config scale {} differs from candidate set scale {}",
            config.scale,
            set.scale()
        )));
    }
    let prepared = PreparedMasks::compute(set, config)?;
    let (fused, global_weights) = prepared.fuse(set, config.beta_g)?;
    let PreparedMasks {
        weight_masks,
        binary_masks,
        areas,
    } = prepared;
    Ok(FusionReport {
        fused,
        global_weights,
        mask_areas: areas,
        weight_masks: config.export_masks.then_some(weight_masks),
        binary_masks: config.export_masks.then_some(binary_masks),
    })
}
