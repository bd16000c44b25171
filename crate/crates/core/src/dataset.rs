//! Evaluation inputs: bicubic LR images, cropped telephoto references,
//! seeded synthetic candidate sets, and the on-disk manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fusion::{CandidateSet, CropPolicy};
use crate::image::{check_region, ImagePlane, RgbImage};
use crate::io;
use crate::resample::resample_rgb;

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Region {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self {
            x,
            y,
            width,
            height,
        }
    }

    pub fn full(dims: (usize, usize)) -> Self {
        Self::new(0, 0, dims.0, dims.1)
    }

    pub fn centered(dims: (usize, usize), width: usize, height: usize) -> Result<Self> {
        let r = Self::new(
            dims.0.saturating_sub(width) / 2,
            dims.1.saturating_sub(height) / 2,
            width,
            height,
        );
        r.check(dims)?;
        Ok(r)
    }

    /// Top-left, top-right, bottom-left, bottom-right.
    pub fn corners(dims: (usize, usize), width: usize, height: usize) -> Result<[Self; 4]> {
        let r = Self::new(0, 0, width, height);
        r.check(dims)?;
        let (right, bottom) = (dims.0 - width, dims.1 - height);
        Ok([
            r,
            Self::new(right, 0, width, height),
            Self::new(0, bottom, width, height),
            Self::new(right, bottom, width, height),
        ])
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }

    pub fn check(&self, dims: (usize, usize)) -> Result<()> {
        check_region(dims, self.x, self.y, self.width, self.height)
    }
}

/// Parameters for telephoto simulation by cropping.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepSpec {
    pub scale: usize,
    pub crop_region: Region,
    /// Crops are enlarged by this factor (bicubic) when above 1.
    pub zoom_factor: f64,
}

/// Largest centered crop whose sides are multiples of `scale`.
pub fn crop_to_multiple(hr: &RgbImage, scale: usize) -> Result<RgbImage> {
    if scale == 0 {
        return Err(Error::InvalidConfig("scale must be >= 1".into()));
    }
    let (w, h) = hr.dims();
    let (cw, ch) = (w / scale * scale, h / scale * scale);
    if cw == 0 || ch == 0 {
        return Err(Error::InvalidImage(format!(
            "{w}x{h} image is smaller than the x{scale} downsampling factor"
        )));
    }
    if (cw, ch) == (w, h) {
        Ok(hr.clone())
    } else {
        hr.center_crop(cw, ch)
    }
}

/// Bicubic `scale`× downsample. Sizes that are not multiples of `scale`
/// are center-cropped first.
pub fn make_lr(hr: &RgbImage, scale: usize) -> Result<RgbImage> {
    let hr = crop_to_multiple(hr, scale)?;
    resample_rgb(&hr, hr.width() / scale, hr.height() / scale)
}

/// Crop of `hr` at `spec.crop_region`, enlarged by `spec.zoom_factor`.
pub fn make_telephoto(hr: &RgbImage, spec: &PrepSpec) -> Result<RgbImage> {
    let zoom = spec.zoom_factor;
    if !(zoom.is_finite() && zoom >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "zoom factor must be >= 1, got {zoom}"
        )));
    }
    let r = spec.crop_region;
    r.check(hr.dims())?;
    let crop = hr.crop(r.x, r.y, r.width, r.height)?;
    if zoom == 1.0 {
        return Ok(crop);
    }
    let w = (r.width as f64 * zoom).round() as usize;
    let h = (r.height as f64 * zoom).round() as usize;
    resample_rgb(&crop, w, h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distortion {
    /// Separable Gaussian blur; `sigma` in HR pixels.
    Blur { sigma: f64 },
    /// Seeded uniform noise in `[-amplitude, amplitude]`, added per channel.
    Noise { amplitude: f64 },
}

impl Distortion {
    fn is_identity(&self) -> bool {
        match *self {
            Distortion::Blur { sigma } => sigma == 0.0,
            Distortion::Noise { amplitude } => amplitude == 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            Distortion::Blur { sigma } => sigma,
            Distortion::Noise { amplitude } => amplitude,
        };
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid distortion {self:?}")))
        }
    }
}

impl std::str::FromStr for Distortion {
    type Err = Error;

    /// `blur:<sigma>` or `noise:<amplitude>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse distortion {s:?}"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        let d = match kind.trim() {
            "blur" => Distortion::Blur { sigma: value },
            "noise" => Distortion::Noise { amplitude: value },
            _ => return Err(bad()),
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub scale: usize,
    pub seed: u64,
    /// One entry per candidate, or a single entry applied to all.
    pub distortions: Vec<Distortion>,
}

#[derive(Debug, Clone)]
pub struct SyntheticSet {
    /// Ground truth after cropping to a multiple of the scale.
    pub gt: RgbImage,
    pub set: CandidateSet,
    /// Distorted region of each candidate; pairwise disjoint.
    pub regions: Vec<Region>,
}

/// Splits `dims` into `n` disjoint vertical stripes with boundaries on
/// multiples of `scale`.
pub fn stripe_regions(dims: (usize, usize), n: usize, scale: usize) -> Result<Vec<Region>> {
    let lr_w = dims.0 / scale.max(1);
    if n == 0 || lr_w < n {
        return Err(Error::InvalidConfig(format!(
            "cannot place {n} disjoint regions in a {}-pixel-wide image at x{scale}",
            dims.0
        )));
    }
    Ok((0..n)
        .map(|k| {
            let x0 = k * lr_w / n * scale;
            let x1 = (k + 1) * lr_w / n * scale;
            Region::new(x0, 0, x1 - x0, dims.1)
        })
        .collect())
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_blur(plane: &ImagePlane, sigma: f64) -> ImagePlane {
    if sigma == 0.0 {
        return plane.clone();
    }
    let taps = gaussian_taps(sigma);
    let radius = (taps.len() / 2) as isize;
    let (w, h) = plane.dims();
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * plane.get(clamp(x as isize + k as isize - radius, w), y))
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[clamp(y as isize + k as isize - radius, h) * w + x])
                .sum();
        }
    }
    ImagePlane::new(w, h, out).expect("blur keeps samples finite")
}

fn distort(gt: &RgbImage, region: Region, d: Distortion, rng: &mut ChaCha8Rng) -> RgbImage {
    if d.is_identity() {
        return gt.clone();
    }
    let (w, h) = gt.dims();
    let planes = gt.planes().map(|p| {
        let mut samples = p.samples().to_vec();
        match d {
            Distortion::Blur { sigma } => {
                let blurred = gaussian_blur(p, sigma);
                for y in region.y..region.y + region.height {
                    for x in region.x..region.x + region.width {
                        samples[y * w + x] = blurred.get(x, y);
                    }
                }
            }
            Distortion::Noise { amplitude } => {
                for y in region.y..region.y + region.height {
                    for x in region.x..region.x + region.width {
                        let n: f64 = rng.gen_range(-amplitude..=amplitude);
                        samples[y * w + x] = (samples[y * w + x] + n).clamp(0.0, 255.0);
                    }
                }
            }
        }
        ImagePlane::new(w, h, samples).expect("distorted plane is finite")
    });
    let [r, g, b] = planes;
    RgbImage::new(r, g, b).expect("planes share dimensions")
}

/// `n` candidates equal to `gt` except inside their own disjoint stripe,
/// where the matching distortion is applied. Deterministic in `spec.seed`.
pub fn make_synthetic_candidates(
    gt: &RgbImage,
    n: usize,
    spec: &SyntheticSpec,
) -> Result<SyntheticSet> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "synthetic sets need at least 2 candidates, got {n}"
        )));
    }
    let distortions: Vec<Distortion> = match spec.distortions.len() {
        1 => vec![spec.distortions[0]; n],
        len if len == n => spec.distortions.clone(),
        len => {
            return Err(Error::InvalidConfig(format!(
                "{len} distortions given for {n} candidates"
            )))
        }
    };
    for d in &distortions {
        d.validate()?;
    }
    let gt = crop_to_multiple(gt, spec.scale)?;
    let regions = stripe_regions(gt.dims(), n, spec.scale)?;
    let lr = make_lr(&gt, spec.scale)?;
    let candidates = regions
        .iter()
        .zip(&distortions)
        .enumerate()
        .map(|(k, (&region, &d))| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(k as u64);
            distort(&gt, region, d, &mut rng)
        })
        .collect();
    let set = CandidateSet::new(lr, candidates, spec.scale)?;
    Ok(SyntheticSet { gt, set, regions })
}

/// Seeded textured test scene: a sum of random oriented sinusoids per
/// channel plus a few soft blobs, kept inside [0, 255].
pub fn synthetic_scene(width: usize, height: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut waves = Vec::new();
    for _ in 0..6 {
        let freq: f64 = rng.gen_range(0.04..0.45);
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let amp: [f64; 3] = [
            rng.gen_range(5.0..25.0),
            rng.gen_range(5.0..25.0),
            rng.gen_range(5.0..25.0),
        ];
        waves.push((freq * angle.cos(), freq * angle.sin(), phase, amp));
    }
    let mut blobs = Vec::new();
    for _ in 0..4 {
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        let r = rng.gen_range(3.0..(width.min(height) as f64 / 4.0).max(4.0));
        let amp: f64 = rng.gen_range(-40.0..40.0);
        blobs.push((cx, cy, r, amp));
    }
    let base: [f64; 3] = [
        rng.gen_range(90.0..160.0),
        rng.gen_range(90.0..160.0),
        rng.gen_range(90.0..160.0),
    ];
    RgbImage::from_fn(width, height, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let mut px = base;
        for &(fx, fy, phase, amp) in &waves {
            let s = (fx * xf + fy * yf + phase).sin();
            for c in 0..3 {
                px[c] += amp[c] * s;
            }
        }
        for &(cx, cy, r, amp) in &blobs {
            let d2 = ((xf - cx).powi(2) + (yf - cy).powi(2)) / (r * r);
            let v = amp * (-d2).exp();
            for p in px.iter_mut() {
                *p += v;
            }
        }
        px.map(|v| v.clamp(0.0, 255.0))
    })
}

/// One evaluation item as listed in a manifest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ManifestEntry {
    pub id: String,
    pub gt: Option<PathBuf>,
    pub lr: Option<PathBuf>,
    pub refs: Vec<PathBuf>,
    pub candidates: Vec<PathBuf>,
}

/// Line-oriented `key=value` listing of candidate sets.
///
/// ```text
/// # comment
/// scale=4
/// id=0001
/// gt=0001_gt.png
/// lr=0001_lr.png
/// sr=0001_sr1.png
/// sr=0001_sr2.png
/// ```
///
/// `scale` must precede the first `id`. Relative paths are resolved
/// against the manifest's directory when loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub scale: usize,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path, source: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Manifest {
            path: source.to_path_buf(),
            line,
            message,
        };
        let mut scale = 4;
        let mut entries: Vec<ManifestEntry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(lineno, format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(err(lineno, format!("empty value for {key}")));
            }
            if key == "scale" {
                if !entries.is_empty() {
                    return Err(err(lineno, "scale must come before the first id".into()));
                }
                scale = value
                    .parse()
                    .ok()
                    .filter(|&s: &usize| s >= 1)
                    .ok_or_else(|| err(lineno, format!("invalid scale {value:?}")))?;
                continue;
            }
            if key == "id" {
                if entries.iter().any(|e| e.id == value) {
                    return Err(err(lineno, format!("duplicate id {value:?}")));
                }
                entries.push(ManifestEntry {
                    id: value.to_string(),
                    ..ManifestEntry::default()
                });
                continue;
            }
            let entry = entries
                .last_mut()
                .ok_or_else(|| err(lineno, format!("{key} before any id")))?;
            let path = base_dir.join(value);
            match key {
                "gt" => entry.gt = Some(path),
                "lr" => entry.lr = Some(path),
                "ref" => entry.refs.push(path),
                "sr" => entry.candidates.push(path),
                other => return Err(err(lineno, format!("unknown key {other:?}"))),
            }
        }
        for e in &entries {
            if e.lr.is_none() {
                return Err(err(0, format!("entry {:?} has no lr", e.id)));
            }
            if e.candidates.is_empty() {
                return Err(err(0, format!("entry {:?} has no sr candidates", e.id)));
            }
        }
        Ok(Self { scale, entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base, path)
    }

    /// Serializes with paths relative to `base_dir` where possible.
    pub fn to_text(&self, base_dir: &Path) -> String {
        let rel = |p: &Path| {
            p.strip_prefix(base_dir)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let mut out = String::new();
        writeln!(out, "scale={}", self.scale).unwrap();
        for e in &self.entries {
            writeln!(out, "id={}", e.id).unwrap();
            if let Some(gt) = &e.gt {
                writeln!(out, "gt={}", rel(gt)).unwrap();
            }
            if let Some(lr) = &e.lr {
                writeln!(out, "lr={}", rel(lr)).unwrap();
            }
            for r in &e.refs {
                writeln!(out, "ref={}", rel(r)).unwrap();
            }
            for c in &e.candidates {
                writeln!(out, "sr={}", rel(c)).unwrap();
            }
        }
        out
    }
}

/// Builds a manifest from a directory laid out as `<id>_gt.png`,
/// `<id>_lr.png`, `<id>_ref<k>.png` and `<id>_sr<k>.png`. Files are
/// grouped by id; references and candidates are ordered by `k`.
pub fn scan_directory(dir: &Path, scale: usize) -> Result<Manifest> {
    use std::collections::BTreeMap;

    let mut by_id: BTreeMap<String, ManifestEntry> = BTreeMap::new();
    type Numbered = Vec<(u32, PathBuf)>;
    let mut numbered: BTreeMap<String, (Numbered, Numbered)> = BTreeMap::new();
    for path in list_pngs(dir)? {
        let Some(stem) = path.file_stem().map(|s| s.to_string_lossy().into_owned()) else {
            continue;
        };
        let Some((id, tag)) = stem.rsplit_once('_') else {
            continue;
        };
        let entry = by_id.entry(id.to_string()).or_insert_with(|| ManifestEntry {
            id: id.to_string(),
            ..ManifestEntry::default()
        });
        let lists = numbered.entry(id.to_string()).or_default();
        if tag == "gt" {
            entry.gt = Some(path);
        } else if tag == "lr" {
            entry.lr = Some(path);
        } else if let Some(k) = tag.strip_prefix("sr").and_then(|k| k.parse().ok()) {
            lists.1.push((k, path));
        } else if let Some(k) = tag.strip_prefix("ref").and_then(|k| k.parse().ok()) {
            lists.0.push((k, path));
        }
    }
    let mut entries = Vec::new();
    for (id, mut entry) in by_id {
        let (mut refs, mut cands) = numbered.remove(&id).unwrap_or_default();
        refs.sort();
        cands.sort();
        entry.refs = refs.into_iter().map(|(_, p)| p).collect();
        entry.candidates = cands.into_iter().map(|(_, p)| p).collect();
        if entry.candidates.is_empty() {
            continue;
        }
        if entry.lr.is_none() {
            return Err(Error::Manifest {
                path: dir.to_path_buf(),
                line: 0,
                message: format!("{id}: SR candidates present but no {id}_lr.png"),
            });
        }
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(Error::Empty("no <id>_sr<k>.png candidates in the dataset directory"));
    }
    Ok(Manifest { scale, entries })
}

/// A loaded candidate set with its ground truth.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub id: String,
    pub set: CandidateSet,
    pub gt: RgbImage,
}

impl EvalItem {
    /// Loads images for one entry. The ground truth is center-cropped to
    /// the candidate size when it is larger.
    pub fn load(entry: &ManifestEntry, scale: usize, policy: CropPolicy) -> Result<Self> {
        let gt_path = entry.gt.as_ref().ok_or_else(|| {
            Error::InvalidConfig(format!("entry {:?} has no ground truth", entry.id))
        })?;
        let lr_path = entry.lr.as_ref().expect("validated by Manifest::parse");
        let lr = io::load_rgb(lr_path)?;
        let candidates = entry
            .candidates
            .iter()
            .map(io::load_rgb)
            .collect::<Result<Vec<_>>>()?;
        let set = CandidateSet::with_policy(lr, candidates, scale, policy)?;
        let mut gt = io::load_rgb(gt_path)?;
        let dims = set.hr_dims();
        if gt.dims() != dims {
            if policy == CropPolicy::Strict || gt.width() < dims.0 || gt.height() < dims.1 {
                return Err(Error::mismatch(
                    format!("ground truth of {:?}", entry.id),
                    dims,
                    gt.dims(),
                ));
            }
            gt = gt.center_crop(dims.0, dims.1)?;
        }
        Ok(Self {
            id: entry.id.clone(),
            set,
            gt,
        })
    }
}

pub fn load_eval_items(manifest: &Manifest, policy: CropPolicy) -> Result<Vec<EvalItem>> {
    manifest
        .entries
        .iter()
        .map(|e| EvalItem::load(e, manifest.scale, policy))
        .collect()
}

/// Options for turning a directory of HR images into an evaluation tree.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepOptions {
    pub scale: usize,
    pub seed: u64,
    /// Number of synthetic SR candidates per image; 0 disables them.
    pub synthetic_candidates: usize,
    pub distortions: Vec<Distortion>,
    /// Telephoto crop size in HR pixels; `None` skips telephoto output.
    pub telephoto_size: Option<(usize, usize)>,
    pub zoom_factor: f64,
}

impl Default for PrepOptions {
    fn default() -> Self {
        Self {
            scale: 4,
            seed: 0,
            synthetic_candidates: 0,
            distortions: vec![Distortion::Noise { amplitude: 24.0 }],
            telephoto_size: None,
            zoom_factor: 1.0,
        }
    }
}

/// What `prepare_directory` did to one input image.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepLog {
    pub id: String,
    pub original_dims: (usize, usize),
    pub cropped_dims: (usize, usize),
}

/// PNG files directly inside `dir`, sorted by name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let io_err = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Writes `<id>_gt.png`, `<id>_lr.png`, optional `<id>_ref<k>.png`
/// telephotos (center, then the four corners) and `<id>_sr<k>.png`
/// synthetic candidates for every PNG in `hr_dir`, plus `manifest.txt`.
pub fn prepare_directory(
    hr_dir: &Path,
    out_dir: &Path,
    opts: &PrepOptions,
) -> Result<(Manifest, Vec<PrepLog>)> {
    if opts.scale < 2 {
        return Err(Error::InvalidConfig(format!(
            "dataset scale must be >= 2, got {}",
            opts.scale
        )));
    }
    let inputs = list_pngs(hr_dir)?;
    if inputs.is_empty() {
        return Err(Error::Empty("no PNG images in the input directory"));
    }
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let mut entries = Vec::new();
    let mut logs = Vec::new();
    for (index, path) in inputs.iter().enumerate() {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("{index:04}"));
        let hr = io::load_rgb(path)?;
        let gt = crop_to_multiple(&hr, opts.scale)?;
        logs.push(PrepLog {
            id: id.clone(),
            original_dims: hr.dims(),
            cropped_dims: gt.dims(),
        });
        let lr = make_lr(&gt, opts.scale)?;

        let gt_path = out_dir.join(format!("{id}_gt.png"));
        let lr_path = out_dir.join(format!("{id}_lr.png"));
        io::save_rgb(&gt, &gt_path)?;
        io::save_rgb(&lr, &lr_path)?;
        let mut entry = ManifestEntry {
            id: id.clone(),
            gt: Some(gt_path),
            lr: Some(lr_path),
            ..ManifestEntry::default()
        };

        if let Some((tw, th)) = opts.telephoto_size {
            let mut regions = vec![Region::centered(gt.dims(), tw, th)?];
            regions.extend(Region::corners(gt.dims(), tw, th)?);
            for (k, region) in regions.into_iter().enumerate() {
                let spec = PrepSpec {
                    scale: opts.scale,
                    crop_region: region,
                    zoom_factor: opts.zoom_factor,
                };
                let tele = make_telephoto(&gt, &spec)?;
                let p = out_dir.join(format!("{id}_ref{}.png", k + 1));
                io::save_rgb(&tele, &p)?;
                entry.refs.push(p);
            }
        }

        if opts.synthetic_candidates > 0 {
            let spec = SyntheticSpec {
                scale: opts.scale,
                seed: opts.seed.wrapping_add(index as u64),
                distortions: opts.distortions.clone(),
            };
            let synth = make_synthetic_candidates(&gt, opts.synthetic_candidates, &spec)?;
            for (k, c) in synth.set.candidates().iter().enumerate() {
                let p = out_dir.join(format!("{id}_sr{}.png", k + 1));
                io::save_rgb(c, &p)?;
                entry.candidates.push(p);
            }
        }
        entries.push(entry);
    }

    let manifest = Manifest {
        scale: opts.scale,
        entries,
    };
    // Entries without candidates are still listed so users can add their
    // own SR outputs; such manifests are not loadable until they do.
    let text = manifest.to_text(out_dir);
    let manifest_path = out_dir.join("manifest.txt");
    fs::write(&manifest_path, text).map_err(|source| Error::Io {
        path: manifest_path,
        source,
    })?;
    Ok((manifest, logs))
}
