//! Parameter sweeps over `beta`, `beta_g` and the number of fused
//! candidates, with CSV output for plotting.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;

use crate::dataset::EvalItem;
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, PreparedMasks};
use crate::metrics::{evaluate, MetricResult};

pub const DEFAULT_BETA_GRID: [f64; 8] = [0.0, 30.0, 90.0, 180.0, 300.0, 450.0, 630.0, 810.0];
pub const DEFAULT_BETA_G_GRID: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0];
pub const MEAN_ID: &str = "__mean__";
pub const CSV_HEADER: [&str; 6] = ["image_id", "beta", "beta_g", "n_fused", "psnr_y", "ssim"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// `beta` over its grid with `beta_g = 0`.
    Beta,
    /// `beta_g` over its grid with `beta = 0`.
    BetaG,
    /// Full `beta` × `beta_g` grid.
    Heatmap,
    /// First-k fusion for every k in `fuse_counts`.
    FuseCount,
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(Self::Beta),
            "beta-g" => Ok(Self::BetaG),
            "heatmap" => Ok(Self::Heatmap),
            "count" => Ok(Self::FuseCount),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep mode {other:?} (expected beta, beta-g, heatmap or count)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub beta_grid: Vec<f64>,
    pub beta_g_grid: Vec<f64>,
    /// Empty means `1..=N` per image.
    pub fuse_counts: Vec<usize>,
    /// `beta` and `beta_g` used by the fuse-count sweep.
    pub count_beta: f64,
    pub count_beta_g: f64,
    /// Remaining fusion settings (epsilon, normalizer, scale).
    pub base: FusionConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let base = FusionConfig::default();
        Self {
            beta_grid: DEFAULT_BETA_GRID.to_vec(),
            beta_g_grid: DEFAULT_BETA_G_GRID.to_vec(),
            fuse_counts: Vec::new(),
            count_beta: base.beta,
            count_beta_g: base.beta_g,
            base,
        }
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "{name} grid must be finite and nonnegative: {grid:?}"
        )));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!(
            "{name} grid must be strictly ascending: {grid:?}"
        )));
    }
    Ok(())
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        check_grid("beta", &self.beta_grid)?;
        check_grid("beta_g", &self.beta_g_grid)?;
        if self.fuse_counts.contains(&0) || self.fuse_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "fuse counts must be ascending and >= 1: {:?}",
                self.fuse_counts
            )));
        }
        FusionConfig::with_betas(self.count_beta, self.count_beta_g).validate()?;
        self.base.validate()
    }

    fn config(&self, beta: f64) -> FusionConfig {
        FusionConfig {
            beta,
            export_masks: false,
            ..self.base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub image_id: String,
    pub beta: f64,
    pub beta_g: f64,
    pub n_fused: usize,
    pub psnr_y: f64,
    pub ssim: f64,
}

impl SweepRecord {
    fn new(id: &str, beta: f64, beta_g: f64, n_fused: usize, m: MetricResult) -> Self {
        Self {
            image_id: id.to_string(),
            beta,
            beta_g,
            n_fused,
            psnr_y: m.psnr_y,
            ssim: m.ssim,
        }
    }

    fn grid_key(&self) -> (f64, f64, usize) {
        (self.beta, self.beta_g, self.n_fused)
    }
}

fn check_scale(items: &[EvalItem], spec: &SweepSpec) -> Result<()> {
    spec.validate()?;
    for item in items {
        if item.set.scale() != spec.base.scale {
            return Err(Error::InvalidConfig(format!(
                "item {:?} has scale {} but the sweep uses {}",
                item.id,
                item.set.scale(),
                spec.base.scale
            )));
        }
    }
    Ok(())
}

/// Evaluates `betas × beta_gs` for one item, computing masks once per beta.
fn grid_records(
    item: &EvalItem,
    spec: &SweepSpec,
    betas: &[f64],
    beta_gs: &[f64],
) -> Result<Vec<SweepRecord>> {
    let mut out = Vec::with_capacity(betas.len() * beta_gs.len());
    for &beta in betas {
        let masks = PreparedMasks::compute(&item.set, &spec.config(beta))?;
        for &beta_g in beta_gs {
            let (fused, _) = masks.fuse(&item.set, beta_g)?;
            let m = evaluate(&fused, &item.gt)?;
            out.push(SweepRecord::new(&item.id, beta, beta_g, item.set.len(), m));
        }
    }
    Ok(out)
}

fn per_item(
    items: &[EvalItem],
    f: impl Fn(&EvalItem) -> Result<Vec<SweepRecord>> + Sync + Send,
) -> Result<Vec<SweepRecord>> {
    let nested = items.par_iter().map(f).collect::<Result<Vec<_>>>()?;
    let mut records: Vec<SweepRecord> = nested.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

/// Metrics for every `beta` in the grid with `beta_g = 0`.
pub fn sweep_beta(items: &[EvalItem], spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    check_scale(items, spec)?;
    per_item(items, |item| grid_records(item, spec, &spec.beta_grid, &[0.0]))
}

/// Metrics for every `beta_g` in the grid with `beta = 0`.
pub fn sweep_beta_g(items: &[EvalItem], spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    check_scale(items, spec)?;
    per_item(items, |item| grid_records(item, spec, &[0.0], &spec.beta_g_grid))
}

/// Metrics over the Cartesian product of both grids.
pub fn sweep_heatmap(items: &[EvalItem], spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    check_scale(items, spec)?;
    per_item(items, |item| {
        grid_records(item, spec, &spec.beta_grid, &spec.beta_g_grid)
    })
}

/// Metrics of fusing the first `k` candidates, for each requested `k`.
pub fn sweep_fuse_count(items: &[EvalItem], spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    check_scale(items, spec)?;
    per_item(items, |item| {
        let counts: Vec<usize> = if spec.fuse_counts.is_empty() {
            (1..=item.set.len()).collect()
        } else {
            spec.fuse_counts.clone()
        };
        let cfg = spec.config(spec.count_beta);
        let mut out = Vec::with_capacity(counts.len());
        for k in counts {
            if k > item.set.len() {
                return Err(Error::InvalidConfig(format!(
                    "item {:?} has {} candidates, cannot fuse {k}",
                    item.id,
                    item.set.len()
                )));
            }
            let subset = item.set.truncated(k)?;
            let masks = PreparedMasks::compute(&subset, &cfg)?;
            let (fused, _) = masks.fuse(&subset, spec.count_beta_g)?;
            let m = evaluate(&fused, &item.gt)?;
            out.push(SweepRecord::new(&item.id, spec.count_beta, spec.count_beta_g, k, m));
        }
        Ok(out)
    })
}

pub fn run_sweep(mode: SweepMode, items: &[EvalItem], spec: &SweepSpec) -> Result<Vec<SweepRecord>> {
    match mode {
        SweepMode::Beta => sweep_beta(items, spec),
        SweepMode::BetaG => sweep_beta_g(items, spec),
        SweepMode::Heatmap => sweep_heatmap(items, spec),
        SweepMode::FuseCount => sweep_fuse_count(items, spec),
    }
}

fn cmp_key(a: &SweepRecord, b: &SweepRecord) -> Ordering {
    a.beta
        .total_cmp(&b.beta)
        .then(a.beta_g.total_cmp(&b.beta_g))
        .then(a.n_fused.cmp(&b.n_fused))
}

/// Orders by image id, then beta, beta_g and candidate count.
pub fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| a.image_id.cmp(&b.image_id).then_with(|| cmp_key(a, b)));
}

/// Mean over images at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRecord {
    pub record: SweepRecord,
    /// Images left out because their PSNR was infinite.
    pub excluded: usize,
}

/// Unweighted per-grid-point means. Images with infinite PSNR are left out
/// of both means and counted in [`MeanRecord::excluded`]; if every image
/// is left out the mean row reports infinite PSNR and SSIM 1.
pub fn mean_records(records: &[SweepRecord]) -> Vec<MeanRecord> {
    let mut keys: Vec<(f64, f64, usize)> = records.iter().map(SweepRecord::grid_key).collect();
    keys.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    keys.dedup();
    keys.into_iter()
        .map(|key| {
            let at: Vec<&SweepRecord> = records.iter().filter(|r| r.grid_key() == key).collect();
            let finite: Vec<&&SweepRecord> = at.iter().filter(|r| r.psnr_y.is_finite()).collect();
            let excluded = at.len() - finite.len();
            let (psnr_y, ssim) = if finite.is_empty() {
                (f64::INFINITY, 1.0)
            } else {
                let n = finite.len() as f64;
                (
                    finite.iter().map(|r| r.psnr_y).sum::<f64>() / n,
                    finite.iter().map(|r| r.ssim).sum::<f64>() / n,
                )
            };
            MeanRecord {
                record: SweepRecord {
                    image_id: MEAN_ID.to_string(),
                    beta: key.0,
                    beta_g: key.1,
                    n_fused: key.2,
                    psnr_y,
                    ssim,
                },
                excluded,
            }
        })
        .collect()
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

/// Writes the header, the per-image rows in sorted order and one
/// `__mean__` row per grid point. LF line endings.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<Vec<MeanRecord>> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let means = mean_records(&sorted);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in sorted.iter().chain(means.iter().map(|m| &m.record)) {
        w.write_record([
            r.image_id.clone(),
            fmt_f64(r.beta),
            fmt_f64(r.beta_g),
            r.n_fused.to_string(),
            fmt_f64(r.psnr_y),
            fmt_f64(r.ssim),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(means)
}
