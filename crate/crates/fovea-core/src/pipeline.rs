//! End-to-end detection pipeline: grayscale conversion, field-of-view
//! masking, disk-morphology contrast enhancement, histogram equalization,
//! denoising, offset Otsu binarization, and circularity-based candidate
//! selection, each stage timed on a monotonic clock.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::blobs::{self, ComponentSet, Connectivity};
use crate::enhance::{self};
use crate::error::Result;
use crate::imaging::{self, FovMask, GrayImage, RgbImage};
use crate::morphology::{self, StructuringElement};
use crate::segment::{self, BinaryImage};

/// Equalization variant used by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EqualizationMode {
    Global,
    Tiled,
}

/// Every pipeline tunable. Defaults follow the reference parameters:
/// radius-15 enhancement disk, 0.2 threshold offset, 400..5000 area window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub enhance_radius: u32,
    pub denoise_radius: u32,
    pub equalization: EqualizationMode,
    pub eq_tiles: u32,
    pub eq_clip: f64,
    pub otsu_offset: f64,
    pub area_min: usize,
    pub area_max: usize,
    pub circ_min: f64,
    pub connectivity: Connectivity,
    pub fov_tol: u8,
    pub repeat_enhance_after_eq: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            enhance_radius: 15,
            denoise_radius: enhance::DEFAULT_DENOISE_RADIUS,
            equalization: EqualizationMode::Tiled,
            eq_tiles: 8,
            eq_clip: 2.0,
            otsu_offset: segment::DEFAULT_OTSU_OFFSET,
            area_min: blobs::DEFAULT_AREA_MIN,
            area_max: blobs::DEFAULT_AREA_MAX,
            circ_min: blobs::DEFAULT_CIRCULARITY_MIN,
            connectivity: Connectivity::Eight,
            fov_tol: imaging::DEFAULT_FOV_TOLERANCE,
            repeat_enhance_after_eq: false,
        }
    }
}

impl PipelineConfig {
    /// Checks every numeric field against its stated domain.
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error::InvalidConfig;
        if self.area_min >= self.area_max {
            return Err(InvalidConfig(format!(
                "area_min ({}) must be below area_max ({})",
                self.area_min, self.area_max
            )));
        }
        if !(0.0..=1.0).contains(&self.otsu_offset) {
            return Err(InvalidConfig(format!(
                "otsu_offset must lie in [0, 1], got {}",
                self.otsu_offset
            )));
        }
        if !(0.0..=1.0).contains(&self.circ_min) {
            return Err(InvalidConfig(format!(
                "circ_min must lie in [0, 1], got {}",
                self.circ_min
            )));
        }
        if self.eq_tiles < 1 {
            return Err(InvalidConfig("eq_tiles must be >= 1".into()));
        }
        if !(self.eq_clip >= 1.0) {
            return Err(InvalidConfig(format!(
                "eq_clip must be >= 1.0, got {}",
                self.eq_clip
            )));
        }
        Ok(())
    }

    /// Applies one `key=value` override by field name, as used by the CLI.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| format!("invalid value for {key}: {e}"))
        }
        match key {
            "enhance_radius" => self.enhance_radius = parse(key, value)?,
            "denoise_radius" => self.denoise_radius = parse(key, value)?,
            "equalization" => {
                self.equalization = match value {
                    "global" => EqualizationMode::Global,
                    "tiled" => EqualizationMode::Tiled,
                    other => {
                        return Err(format!(
                            "invalid value for equalization: {other} (expected global or tiled)"
                        ))
                    }
                }
            }
            "eq_tiles" => self.eq_tiles = parse(key, value)?,
            "eq_clip" => self.eq_clip = parse(key, value)?,
            "otsu_offset" => self.otsu_offset = parse(key, value)?,
            "area_min" => self.area_min = parse(key, value)?,
            "area_max" => self.area_max = parse(key, value)?,
            "circ_min" => self.circ_min = parse(key, value)?,
            "connectivity" => {
                let raw: u8 = parse(key, value)?;
                self.connectivity = Connectivity::try_from(raw)?;
            }
            "fov_tol" => self.fov_tol = parse(key, value)?,
            "repeat_enhance_after_eq" => self.repeat_enhance_after_eq = parse(key, value)?,
            other => return Err(format!("unknown config key: {other}")),
        }
        Ok(())
    }
}

/// Wall-clock stage durations in milliseconds at 0.1 ms resolution. Stages
/// are measured independently; `total_ms` wraps the whole run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub grayscale_ms: f64,
    pub fov_mask_ms: f64,
    pub enhance_ms: f64,
    pub equalize_ms: f64,
    pub denoise_ms: f64,
    pub repeat_enhance_ms: f64,
    pub histogram_ms: f64,
    pub otsu_ms: f64,
    pub binarize_ms: f64,
    pub label_ms: f64,
    pub select_ms: f64,
    pub total_ms: f64,
}

impl StageTimings {
    /// Stage names and durations in execution order (total excluded).
    pub fn stages(&self) -> [(&'static str, f64); 11] {
        [
            ("grayscale", self.grayscale_ms),
            ("fov_mask", self.fov_mask_ms),
            ("enhance", self.enhance_ms),
            ("equalize", self.equalize_ms),
            ("denoise", self.denoise_ms),
            ("repeat_enhance", self.repeat_enhance_ms),
            ("histogram", self.histogram_ms),
            ("otsu", self.otsu_ms),
            ("binarize", self.binarize_ms),
            ("label", self.label_ms),
            ("select", self.select_ms),
        ]
    }
}

/// Statistics of the selected candidate, present exactly when a macula was
/// detected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateStats {
    pub area: usize,
    pub circularity: f64,
    pub otsu_level: u8,
    pub effective_threshold: f64,
}

/// Per-image outcome. `detected`, `fovea`, and `candidate` are present or
/// absent together; `error` marks per-file failures in batch runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub source: String,
    pub detected: bool,
    pub fovea: Option<(u32, u32)>,
    pub candidate: Option<CandidateStats>,
    pub timings: StageTimings,
    pub error: Option<String>,
}

impl DetectionResult {
    /// Error-marked placeholder for files that failed to decode or process.
    pub fn error_marked(source: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            detected: false,
            fovea: None,
            candidate: None,
            timings: StageTimings::default(),
            error: Some(message.into()),
        }
    }

    /// The fields that must be reproducible across runs and parallelism
    /// levels (everything except timings).
    pub fn detection_fields(&self) -> (&str, bool, Option<(u32, u32)>, Option<&CandidateStats>, Option<&str>) {
        (
            &self.source,
            self.detected,
            self.fovea,
            self.candidate.as_ref(),
            self.error.as_deref(),
        )
    }
}

/// Intermediate rasters retained for stage-debug dumps.
#[derive(Debug, Clone)]
pub struct StageImages {
    pub grayscale: GrayImage,
    pub enhanced: GrayImage,
    pub equalized: GrayImage,
    pub denoised: GrayImage,
    pub binary: BinaryImage,
    pub components: ComponentSet,
    pub fov_mask: FovMask,
}

fn round_tenth_ms(start: Instant) -> f64 {
    (start.elapsed().as_secs_f64() * 1000.0 * 10.0).round() / 10.0
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Runs the full pipeline on a decoded image. Deterministic: identical
/// inputs and config yield identical detection fields.
///
/// The only error is a degenerate field-of-view mask; every other stage is
/// total for valid configurations.
pub fn detect(img: &RgbImage, cfg: &PipelineConfig) -> Result<DetectionResult> {
    detect_with_stages(img, cfg).map(|(result, _)| result)
}

/// As [`detect`], additionally returning every intermediate raster.
pub fn detect_with_stages(
    img: &RgbImage,
    cfg: &PipelineConfig,
) -> Result<(DetectionResult, StageImages)> {
    let total_start = Instant::now();
    let mut timings = StageTimings::default();

    let start = Instant::now();
    let grayscale = imaging::to_grayscale(img);
    timings.grayscale_ms = round_tenth_ms(start);

    let start = Instant::now();
    let fov_mask = imaging::estimate_fov_mask(&grayscale, cfg.fov_tol)?;
    timings.fov_mask_ms = round_tenth_ms(start);

    let enhance_se = StructuringElement::disk(cfg.enhance_radius);
    let start = Instant::now();
    let enhanced = morphology::enhance_contrast(&grayscale, &enhance_se);
    timings.enhance_ms = round_tenth_ms(start);

    let start = Instant::now();
    let equalized = match cfg.equalization {
        EqualizationMode::Global => enhance::equalize_global(&enhanced, Some(&fov_mask))?,
        EqualizationMode::Tiled => enhance::equalize_adaptive(&enhanced, cfg.eq_tiles, cfg.eq_clip)?,
    };
    timings.equalize_ms = round_tenth_ms(start);

    let start = Instant::now();
    let denoised = enhance::denoise(&equalized, cfg.denoise_radius);
    timings.denoise_ms = round_tenth_ms(start);

    let working = if cfg.repeat_enhance_after_eq {
        let start = Instant::now();
        let repeated = morphology::enhance_contrast(&denoised, &enhance_se);
        timings.repeat_enhance_ms = round_tenth_ms(start);
        repeated
    } else {
        denoised.clone()
    };

    let start = Instant::now();
    let histogram = enhance::build_histogram(&working, Some(&fov_mask))?;
    timings.histogram_ms = round_tenth_ms(start);

    let start = Instant::now();
    let report = segment::otsu(&histogram);
    timings.otsu_ms = round_tenth_ms(start);

    let start = Instant::now();
    let binary = segment::binarize_dark(&working, &report, cfg.otsu_offset, Some(&fov_mask));
    timings.binarize_ms = round_tenth_ms(start);

    let start = Instant::now();
    let components = blobs::label_components(&binary, cfg.connectivity);
    timings.label_ms = round_tenth_ms(start);

    let start = Instant::now();
    let candidate = blobs::select_macula(&components, cfg.area_min, cfg.area_max, cfg.circ_min);
    timings.select_ms = round_tenth_ms(start);

    timings.total_ms = round_tenth_ms(total_start);

    let result = DetectionResult {
        source: String::new(),
        detected: candidate.is_some(),
        fovea: candidate.as_ref().map(|c| c.fovea),
        candidate: candidate.as_ref().map(|c| CandidateStats {
            area: c.component.area,
            circularity: round3(c.component.circularity),
            otsu_level: report.otsu_level,
            effective_threshold: round3(report.offset_threshold(cfg.otsu_offset)),
        }),
        timings,
        error: None,
    };
    let stages = StageImages {
        grayscale,
        enhanced,
        equalized,
        denoised: working,
        binary,
        components,
        fov_mask,
    };
    Ok((result, stages))
}

/// Loads and processes one file; failures yield an error-marked result
/// instead of propagating. The result source is the file name.
pub fn detect_file(path: impl AsRef<Path>, cfg: &PipelineConfig) -> DetectionResult {
    let path = path.as_ref();
    let source = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned());
    match imaging::load_image(path).and_then(|img| detect(&img, cfg)) {
        Ok(mut result) => {
            result.source = source;
            result
        }
        Err(e) => DetectionResult::error_marked(source, e.to_string()),
    }
}

/// Processes a list of files across `parallelism` workers. Results come
/// back in input order; per-file failures are error-marked and do not
/// abort the batch.
pub fn detect_batch(
    paths: &[std::path::PathBuf],
    cfg: &PipelineConfig,
    parallelism: usize,
) -> Vec<DetectionResult> {
    assert!(parallelism >= 1, "parallelism must be >= 1");
    if parallelism == 1 || paths.len() <= 1 {
        return paths.iter().map(|p| detect_file(p, cfg)).collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("worker pool construction");
    pool.install(|| paths.par_iter().map(|p| detect_file(p, cfg)).collect())
}
