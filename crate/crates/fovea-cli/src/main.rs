//! `fovea` — macula localization for color fundus images.
//!
//! Subcommands: `detect` one image, `batch` a directory, `eval` results
//! against ground truth, `bench` seeded synthetic phantoms.
//!
//! Exit codes: 0 success, 1 runtime or per-file failure (including a missed
//! benchmark budget), 2 usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use fovea_core::eval::MetricsReport;
use fovea_core::imaging;
use fovea_core::phantom::{phantom_benchmark, PhantomBenchReport};
use fovea_core::pipeline::{self, DetectionResult, PipelineConfig, StageImages};

#[derive(Parser)]
#[command(
    name = "fovea",
    version,
    about = "Locates the macula fovea in color fundus images via disk-morphology preprocessing, Otsu thresholding, and circularity-based blob selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON file with pipeline settings (PipelineConfig field names).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Inline override `key=value`; repeatable, wins over --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect the fovea in one image and write an annotated PNG.
    Detect {
        image: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory, created if absent.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Print the result as single-line JSON.
        #[arg(long)]
        json: bool,
        /// Write the six intermediate stage rasters as PNGs.
        #[arg(long)]
        debug_stages: bool,
    },
    /// Process every PNG/JPEG in a directory; write results.json and
    /// annotated copies.
    Batch {
        dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory, created if absent.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Worker count; defaults to FOVEA_THREADS, then the CPU count.
        #[arg(long)]
        parallelism: Option<usize>,
        /// Write the six intermediate stage rasters per image (forces
        /// sequential processing).
        #[arg(long)]
        debug_stages: bool,
    },
    /// Score a results.json against a ground-truth CSV.
    Eval {
        /// results.json produced by `batch`.
        #[arg(long)]
        results: PathBuf,
        /// CSV with header source,has_macula,fovea_x,fovea_y.
        #[arg(long)]
        truth: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run detection over seeded synthetic phantoms and report detection
    /// rate, centroid error, and per-stage timings.
    Bench {
        /// Number of phantoms to generate.
        #[arg(long, default_value_t = 100)]
        phantoms: u32,
        /// Base seed; statistics reproduce exactly for a fixed seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fail (exit 1) when the median detect time exceeds this budget.
        #[arg(long, default_value_t = 750.0)]
        budget_ms: f64,
        #[command(flatten)]
        config: ConfigArgs,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

const USAGE_EXIT: u8 = 2;
const FAILURE_EXIT: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Detect {
            image,
            config,
            out_dir,
            json,
            debug_stages,
        } => build_config(&config).map(|cfg| run_detect(&image, &cfg, &out_dir, json, debug_stages)),
        Command::Batch {
            dir,
            config,
            out_dir,
            parallelism,
            debug_stages,
        } => build_config(&config).and_then(|cfg| {
            let workers = resolve_parallelism(parallelism)?;
            Ok(run_batch(&dir, &cfg, &out_dir, workers, debug_stages))
        }),
        Command::Eval {
            results,
            truth,
            json,
        } => Ok(run_eval(&results, &truth, json)),
        Command::Bench {
            phantoms,
            seed,
            budget_ms,
            config,
            json,
        } => build_config(&config).map(|cfg| run_bench(phantoms, seed, budget_ms, &cfg, json)),
    };
    match outcome {
        Err(usage) => {
            eprintln!("error: {usage}");
            ExitCode::from(USAGE_EXIT)
        }
        Ok(Err(failure)) => {
            eprintln!("error: {failure:#}");
            ExitCode::from(FAILURE_EXIT)
        }
        Ok(Ok(code)) => ExitCode::from(code),
    }
}

/// Builds the pipeline configuration from an optional JSON file plus inline
/// overrides. Any problem here is a usage error.
fn build_config(args: &ConfigArgs) -> Result<PipelineConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| format!("invalid config {}: {e}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    for pair in &args.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| format!("--set expects key=value, got {pair:?}"))?;
        cfg.set(key.trim(), value.trim())?;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn resolve_parallelism(flag: Option<usize>) -> Result<usize, String> {
    let workers = match flag {
        Some(n) => n,
        None => match std::env::var("FOVEA_THREADS") {
            Ok(raw) => raw
                .parse::<usize>()
                .map_err(|_| format!("FOVEA_THREADS must be a positive integer, got {raw:?}"))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if workers == 0 {
        return Err("parallelism must be >= 1".into());
    }
    Ok(workers)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn result_line(result: &DetectionResult) -> String {
    match (&result.error, result.fovea, &result.candidate) {
        (Some(message), _, _) => format!("{}: error: {message}", result.source),
        (None, Some((x, y)), Some(stats)) => format!(
            "{}: fovea ({x}, {y}) area {} circularity {:.3} otsu {} t_eff {:.3} total {:.1} ms",
            result.source,
            stats.area,
            stats.circularity,
            stats.otsu_level,
            stats.effective_threshold,
            result.timings.total_ms
        ),
        _ => format!(
            "{}: no macula detected (total {:.1} ms)",
            result.source, result.timings.total_ms
        ),
    }
}

fn dump_stages(stages: &StageImages, stem: &str, out_dir: &Path) -> fovea_core::Result<()> {
    imaging::save_gray_png(&stages.grayscale, out_dir.join(format!("{stem}_stage1_grayscale.png")))?;
    imaging::save_gray_png(&stages.enhanced, out_dir.join(format!("{stem}_stage2_enhanced.png")))?;
    imaging::save_gray_png(&stages.equalized, out_dir.join(format!("{stem}_stage3_equalized.png")))?;
    imaging::save_gray_png(&stages.denoised, out_dir.join(format!("{stem}_stage4_denoised.png")))?;
    let binary = fovea_core::GrayImage::from_raw(
        stages.binary.width(),
        stages.binary.height(),
        stages.binary.flags().iter().map(|&b| if b { 255 } else { 0 }).collect(),
    );
    imaging::save_gray_png(&binary, out_dir.join(format!("{stem}_stage5_binary.png")))?;
    let colormap = imaging::colormap_components(
        &stages.components,
        stages.binary.width(),
        stages.binary.height(),
    );
    imaging::save_png(&colormap, out_dir.join(format!("{stem}_stage6_components.png")))?;
    Ok(())
}

/// Loads, detects, annotates, and optionally dumps stages for one file.
fn process_file(
    path: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
    debug_stages: bool,
) -> DetectionResult {
    let source = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned());
    let stem = file_stem(path);
    let run = || -> fovea_core::Result<DetectionResult> {
        let img = imaging::load_image(path)?;
        let (mut result, stages) = pipeline::detect_with_stages(&img, cfg)?;
        result.source = source.clone();
        imaging::render_annotation(&img, &result, out_dir.join(format!("{stem}_annotated.png")))?;
        if debug_stages {
            dump_stages(&stages, &stem, out_dir)?;
        }
        Ok(result)
    };
    run().unwrap_or_else(|e| DetectionResult::error_marked(source, e.to_string()))
}

fn run_detect(
    image: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
    json: bool,
    debug_stages: bool,
) -> anyhow::Result<u8> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let result = process_file(image, cfg, out_dir, debug_stages);
    if json {
        println!("{}", serde_json::to_string(&result)?);
    } else {
        println!("{}", result_line(&result));
    }
    if let Some(message) = &result.error {
        return Err(anyhow!("{}: {message}", result.source));
    }
    Ok(0)
}

fn discover_images(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .map(|e| {
                        let ext = e.to_string_lossy().to_lowercase();
                        ext == "png" || ext == "jpg" || ext == "jpeg"
                    })
                    .unwrap_or(false)
        })
        .collect();
    paths.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));
    Ok(paths)
}

fn run_batch(
    dir: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
    parallelism: usize,
    debug_stages: bool,
) -> anyhow::Result<u8> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let paths = discover_images(dir)?;

    let results: Vec<DetectionResult> = if debug_stages {
        paths
            .iter()
            .map(|p| process_file(p, cfg, out_dir, true))
            .collect()
    } else {
        let results = pipeline::detect_batch(&paths, cfg, parallelism);
        // Annotation pass; decode errors are already marked in the results.
        for (path, result) in paths.iter().zip(&results) {
            if result.error.is_none() {
                if let Ok(img) = imaging::load_image(path) {
                    let stem = file_stem(path);
                    let out = out_dir.join(format!("{stem}_annotated.png"));
                    if let Err(e) = imaging::render_annotation(&img, result, &out) {
                        eprintln!("warning: {e}");
                    }
                }
            }
        }
        results
    };

    for result in &results {
        println!("{}", result_line(result));
    }
    let json = serde_json::to_string_pretty(&results)?;
    fs::write(out_dir.join("results.json"), json + "\n")?;

    let failed = results.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} files failed", results.len());
        return Ok(FAILURE_EXIT);
    }
    Ok(0)
}

fn print_metrics(report: &MetricsReport) {
    let total = report.true_positives
        + report.false_positives
        + report.true_negatives
        + report.false_negatives;
    println!(
        "records: {total} (tp {} fp {} tn {} fn {})",
        report.true_positives, report.false_positives, report.true_negatives, report.false_negatives
    );
    let rate = |r: Option<f64>| r.map_or("n/a".into(), |v| format!("{v:.3}"));
    println!(
        "sensitivity: {}  specificity: {}  false positive rate: {}",
        rate(report.sensitivity),
        rate(report.specificity),
        rate(report.false_positive_rate)
    );
    if report.centroid_errors_px.is_empty() {
        println!("centroid error px: none recorded");
    } else {
        let errors = &report.centroid_errors_px;
        let median = errors[errors.len() / 2];
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        println!(
            "centroid error px: n {} median {:.1} mean {:.1} max {:.1}",
            errors.len(),
            median,
            mean,
            errors.last().unwrap()
        );
    }
    match &report.timing {
        Some(t) => println!(
            "timing ms: mean {:.1} median {:.1} p95 {:.1}",
            t.mean_ms, t.median_ms, t.p95_ms
        ),
        None => println!("timing ms: none recorded"),
    }
}

fn run_eval(results_path: &Path, truth_path: &Path, json: bool) -> anyhow::Result<u8> {
    let text = fs::read_to_string(results_path)
        .with_context(|| format!("cannot read {}", results_path.display()))?;
    let results: Vec<DetectionResult> = serde_json::from_str(&text)
        .with_context(|| format!("invalid results file {}", results_path.display()))?;
    let truth = fovea_core::eval::load_truth(truth_path)?;
    let report = fovea_core::eval::score(&results, &truth)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_metrics(&report);
    }
    Ok(0)
}

fn print_bench(report: &PhantomBenchReport, budget_ms: f64) {
    println!(
        "phantoms {} seed {} size {}x{}",
        report.phantoms, report.seed, report.width, report.height
    );
    println!(
        "detected {}/{} (rate {:.3})",
        report.detected, report.phantoms, report.detection_rate
    );
    match &report.centroid_error_px {
        Some(e) => println!(
            "centroid error px: median {:.2} mean {:.2} max {:.2}",
            e.median_px, e.mean_px, e.max_px
        ),
        None => println!("centroid error px: no detections"),
    }
    let t = &report.timing_ms;
    println!(
        "timing ms: p50 {:.1} p90 {:.1} p95 {:.1} max {:.1}",
        t.p50_ms, t.p90_ms, t.p95_ms, t.max_ms
    );
    let stages: Vec<String> = report
        .stage_median_ms
        .stages()
        .iter()
        .map(|(name, ms)| format!("{name} {ms:.1}"))
        .collect();
    println!(
        "stage medians ms: {} | total {:.1}",
        stages.join(" | "),
        report.stage_median_ms.total_ms
    );
    println!("budget: p50 {:.1} ms vs {budget_ms:.1} ms", t.p50_ms);
}

fn run_bench(
    phantoms: u32,
    seed: u64,
    budget_ms: f64,
    cfg: &PipelineConfig,
    json: bool,
) -> anyhow::Result<u8> {
    if phantoms == 0 {
        return Err(anyhow!("--phantoms must be >= 1"));
    }
    let report = phantom_benchmark(phantoms, seed, 700, 1050, cfg);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_bench(&report, budget_ms);
    }
    if report.timing_ms.p50_ms > budget_ms {
        eprintln!(
            "median detect time {:.1} ms exceeds the {budget_ms:.1} ms budget",
            report.timing_ms.p50_ms
        );
        return Ok(FAILURE_EXIT);
    }
    Ok(0)
}
