use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mrefsr::dataset::{self, Distortion, Manifest, PrepOptions};
use mrefsr::fusion::CropPolicy;
use mrefsr::sweep::{self, SweepMode, SweepSpec};
use mrefsr::{io, CandidateSet, Error, FusionConfig};

#[derive(Debug, Parser)]
#[command(
    name = "mrefsr",
    version,
    about = "Fuse super-resolution results from several reference images and evaluate them"
)]
struct Cli {
    /// Maximum number of worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuse SR candidates of one LR image into a single output.
    Fuse(FuseArgs),
    /// Build a gt/lr/ref/sr dataset tree from a directory of HR images.
    Prep(PrepArgs),
    /// Run a parameter sweep over a dataset and write a CSV table.
    Sweep(SweepArgs),
    /// Print PSNR and SSIM on the luma channel between two images.
    Metric(MetricArgs),
}

#[derive(Debug, Args)]
struct FusionFlags {
    /// Local penalty strength of the adaptive weight masks.
    #[arg(long, default_value_t = 300.0)]
    beta: f64,
    /// Strength of the per-candidate global weights.
    #[arg(long = "beta-g", default_value_t = 2.0)]
    beta_g: f64,
    /// Upscaling factor between LR and SR images.
    #[arg(long, default_value_t = 4)]
    scale: usize,
    /// Handling of candidates larger than scale x LR: center-crop or strict.
    #[arg(long = "crop-policy", default_value = "center-crop")]
    crop_policy: CropPolicy,
}

impl FusionFlags {
    fn config(&self) -> FusionConfig {
        FusionConfig {
            beta: self.beta,
            beta_g: self.beta_g,
            scale: self.scale,
            crop_policy: self.crop_policy,
            ..FusionConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// Low-resolution input image.
    lr: PathBuf,
    /// SR candidate images, in order.
    #[arg(required = true)]
    candidates: Vec<PathBuf>,
    /// Output PNG for the fused image.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    fusion: FusionFlags,
    /// Plain per-pixel average of the candidates instead of weighted fusion.
    #[arg(long, conflicts_with = "export_masks")]
    naive: bool,
    /// Directory to write weight and binary mask PNGs into.
    #[arg(long = "export-masks", value_name = "DIR")]
    export_masks: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PrepArgs {
    /// Directory of high-resolution PNG images.
    hr_dir: PathBuf,
    /// Output directory for the dataset tree and manifest.txt.
    out_dir: PathBuf,
    /// Downscaling factor used to make LR inputs.
    #[arg(long, default_value_t = 4)]
    scale: usize,
    /// Seed for synthetic candidate distortions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Synthetic SR candidates to write per image (0 disables them).
    #[arg(long, default_value_t = 0)]
    candidates: usize,
    /// Distortion per candidate, e.g. noise:24 or blur:2.5. Repeat or
    /// separate with commas; a single value applies to all candidates.
    #[arg(long, value_delimiter = ',', default_value = "noise:24")]
    distortion: Vec<Distortion>,
    /// Telephoto reference crop size in HR pixels, WxH.
    #[arg(long = "tele-size", value_parser = parse_size)]
    tele_size: Option<(usize, usize)>,
    /// Zoom applied to telephoto crops (>= 1).
    #[arg(long, default_value_t = 1.0)]
    zoom: f64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Manifest file listing the candidate sets.
    #[arg(long, required_unless_present = "dataset_dir", conflicts_with = "dataset_dir")]
    manifest: Option<PathBuf>,
    /// Directory of <id>_lr.png, <id>_gt.png and <id>_sr<k>.png files,
    /// used instead of a manifest (e.g. precomputed outputs of RefSR models).
    #[arg(long = "dataset-dir", value_name = "DIR")]
    dataset_dir: Option<PathBuf>,
    /// Output CSV path.
    #[arg(short, long)]
    output: PathBuf,
    /// beta, beta-g, heatmap or count.
    #[arg(long, default_value = "heatmap")]
    mode: SweepMode,
    /// Comma-separated beta values.
    #[arg(long = "beta-grid", value_delimiter = ',', default_value = "0,30,90,180,300,450,630,810")]
    beta_grid: Vec<f64>,
    /// Comma-separated beta_g values.
    #[arg(long = "beta-g-grid", value_delimiter = ',', default_value = "0,0.5,1,2,4,8")]
    beta_g_grid: Vec<f64>,
    /// Comma-separated fuse counts for count mode (default: 1..=N).
    #[arg(long = "fuse-counts", value_delimiter = ',')]
    fuse_counts: Vec<usize>,
    /// beta used in count mode.
    #[arg(long, default_value_t = 300.0)]
    beta: f64,
    /// beta_g used in count mode.
    #[arg(long = "beta-g", default_value_t = 2.0)]
    beta_g: f64,
    /// Upscaling factor; overrides the manifest's scale when given.
    #[arg(long)]
    scale: Option<usize>,
    /// Handling of candidates larger than scale x LR: center-crop or strict.
    #[arg(long = "crop-policy", default_value = "center-crop")]
    crop_policy: CropPolicy,
}

#[derive(Debug, Args)]
struct MetricArgs {
    /// First image.
    a: PathBuf,
    /// Second image (usually the ground truth).
    b: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w = w.trim().parse().map_err(|e| format!("width {w:?}: {e}"))?;
    let h = h.trim().parse().map_err(|e| format!("height {h:?}: {e}"))?;
    Ok((w, h))
}

fn require_file(path: &Path) -> Result<(), Error> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        })
    }
}

fn require_dir(path: &Path) -> Result<(), Error> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory"),
        })
    }
}

fn create_file(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn run_fuse(args: &FuseArgs, out: &mut impl Write) -> Result<(), Error> {
    require_file(&args.lr)?;
    for c in &args.candidates {
        require_file(c)?;
    }
    let mut config = args.fusion.config();
    config.export_masks = args.export_masks.is_some();
    config.validate()?;

    let lr = io::load_rgb(&args.lr)?;
    let candidates = args
        .candidates
        .iter()
        .map(io::load_rgb)
        .collect::<Result<Vec<_>, _>>()?;
    let set = CandidateSet::with_policy(lr, candidates, config.scale, config.crop_policy)?;
    let (w, h) = set.hr_dims();

    if args.naive {
        io::save_rgb(&mrefsr::naive_fuse(&set), &args.output)?;
        writeln!(out, "mode=naive").ok();
        writeln!(out, "candidates={}", set.len()).ok();
        writeln!(out, "size={w}x{h}").ok();
        writeln!(out, "output={}", args.output.display()).ok();
        return Ok(());
    }

    let report = mrefsr::fuse(&set, &config)?;
    io::save_rgb(&report.fused, &args.output)?;
    if let Some(dir) = &args.export_masks {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        for (k, m) in report.weight_masks.iter().flatten().enumerate() {
            io::save_gray(&m.weights, 255.0, dir.join(format!("weight_mask_{}.png", k + 1)))?;
        }
        for (k, m) in report.binary_masks.iter().flatten().enumerate() {
            io::save_gray(&m.mask, 255.0, dir.join(format!("binary_mask_{}.png", k + 1)))?;
        }
    }
    writeln!(out, "mode=weighted").ok();
    writeln!(out, "beta={:?}", config.beta).ok();
    writeln!(out, "beta_g={:?}", config.beta_g).ok();
    writeln!(out, "candidates={}", set.len()).ok();
    writeln!(out, "size={w}x{h}").ok();
    for (k, (g, a)) in report
        .global_weights
        .iter()
        .zip(&report.mask_areas)
        .enumerate()
    {
        writeln!(out, "global_weight_{}={g:?}", k + 1).ok();
        writeln!(out, "mask_area_{}={a:?}", k + 1).ok();
    }
    writeln!(out, "output={}", args.output.display()).ok();
    Ok(())
}

fn run_prep(args: &PrepArgs, out: &mut impl Write) -> Result<(), Error> {
    require_dir(&args.hr_dir)?;
    let opts = PrepOptions {
        scale: args.scale,
        seed: args.seed,
        synthetic_candidates: args.candidates,
        distortions: args.distortion.clone(),
        telephoto_size: args.tele_size,
        zoom_factor: args.zoom,
    };
    let (manifest, logs) = dataset::prepare_directory(&args.hr_dir, &args.out_dir, &opts)?;
    for log in &logs {
        if log.original_dims != log.cropped_dims {
            eprintln!(
                "{}: center-cropped {}x{} to {}x{} (multiple of {})",
                log.id,
                log.original_dims.0,
                log.original_dims.1,
                log.cropped_dims.0,
                log.cropped_dims.1,
                args.scale
            );
        }
    }
    writeln!(out, "images={}", manifest.entries.len()).ok();
    writeln!(out, "scale={}", manifest.scale).ok();
    writeln!(
        out,
        "manifest={}",
        args.out_dir.join("manifest.txt").display()
    )
    .ok();
    Ok(())
}

fn run_sweep(args: &SweepArgs, out: &mut impl Write) -> Result<(), Error> {
    let mut manifest = match (&args.manifest, &args.dataset_dir) {
        (Some(path), _) => {
            require_file(path)?;
            Manifest::load(path)?
        }
        (None, Some(dir)) => {
            require_dir(dir)?;
            dataset::scan_directory(dir, args.scale.unwrap_or(4))?
        }
        (None, None) => {
            return Err(Error::InvalidConfig(
                "either --manifest or --dataset-dir is required".into(),
            ))
        }
    };
    if let Some(scale) = args.scale {
        manifest.scale = scale;
    }
    for entry in &manifest.entries {
        for path in entry.lr.iter().chain(&entry.gt).chain(&entry.candidates) {
            require_file(path)?;
        }
    }

    let spec = SweepSpec {
        beta_grid: args.beta_grid.clone(),
        beta_g_grid: args.beta_g_grid.clone(),
        fuse_counts: args.fuse_counts.clone(),
        count_beta: args.beta,
        count_beta_g: args.beta_g,
        base: FusionConfig {
            scale: manifest.scale,
            crop_policy: args.crop_policy,
            ..FusionConfig::default()
        },
    };
    spec.validate()?;

    let items = dataset::load_eval_items(&manifest, args.crop_policy)?;
    let records = sweep::run_sweep(args.mode, &items, &spec)?;
    let mut file = create_file(&args.output)?;
    let means = sweep::write_csv(&records, &mut file)?;
    file.flush().map_err(|source| Error::Io {
        path: args.output.clone(),
        source,
    })?;

    writeln!(out, "images={}", items.len()).ok();
    writeln!(out, "records={}", records.len()).ok();
    for m in &means {
        let r = &m.record;
        writeln!(
            out,
            "mean beta={:?} beta_g={:?} n_fused={} psnr_y={:?} ssim={:?} excluded_inf={}",
            r.beta, r.beta_g, r.n_fused, r.psnr_y, r.ssim, m.excluded
        )
        .ok();
    }
    writeln!(out, "output={}", args.output.display()).ok();
    Ok(())
}

fn run_metric(args: &MetricArgs, out: &mut impl Write) -> Result<(), Error> {
    require_file(&args.a)?;
    require_file(&args.b)?;
    let a = io::load_rgb(&args.a)?;
    let b = io::load_rgb(&args.b)?;
    let m = mrefsr::evaluate(&a, &b)?;
    writeln!(out, "psnr_y={:?} ssim={:?}", m.psnr_y, m.ssim).ok();
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::DimensionMismatch { .. } => 3,
        Error::Io { .. } | Error::Image { .. } | Error::Manifest { .. } | Error::Csv(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Fuse(a) => run_fuse(a, &mut out),
        Command::Prep(a) => run_prep(a, &mut out),
        Command::Sweep(a) => run_sweep(a, &mut out),
        Command::Metric(a) => run_metric(a, &mut out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
