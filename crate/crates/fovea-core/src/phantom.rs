//! Synthetic fundus phantoms with ground truth known by construction, and
//! the seeded phantom benchmark behind the CLI `bench` command.
//!
//! A phantom is a uniform illuminated disc on a black border carrying a
//! dark Gaussian macula blob, a bright optic-disc disk, thin dark vessel
//! lines, and optional Gaussian level noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::imaging::{round_half_up, RgbImage};
use crate::pipeline::{detect, PipelineConfig, StageTimings};
use crate::stats;

/// Straight dark vessel: the infinite line through `anchor` at `angle`,
/// darkened within `width / 2` of the line.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselLine {
    pub anchor: (f64, f64),
    pub angle: f64,
    pub width: f64,
    pub depth: f64,
}

/// Phantom description; rendering is deterministic given the fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub width: u32,
    pub height: u32,
    pub fov_center: (f64, f64),
    pub fov_radius: f64,
    pub background: f64,
    /// Ground-truth fovea location.
    pub macula_center: (f64, f64),
    pub macula_sigma: f64,
    pub macula_depth: f64,
    pub od_center: (f64, f64),
    pub od_radius: f64,
    pub od_brightness: f64,
    pub vessels: Vec<VesselLine>,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl Phantom {
    /// Deterministic noise-free phantom: 140-level disc of view, Gaussian
    /// macula blob (sigma 18 px, depth 60), bright optic disc, three dark
    /// width-3 vessel lines.
    pub fn reference(width: u32, height: u32) -> Self {
        let cx = f64::from(width) / 2.0;
        let cy = f64::from(height) / 2.0;
        let radius = 0.46 * f64::from(width.min(height));
        let od_center = (cx - 0.60 * radius, cy - 0.05 * radius);
        Self {
            width,
            height,
            fov_center: (cx, cy),
            fov_radius: radius,
            background: 140.0,
            macula_center: (cx + 0.12 * radius, cy + 0.03 * radius),
            macula_sigma: 18.0,
            macula_depth: 60.0,
            od_center,
            od_radius: (0.16 * radius).max(16.0),
            od_brightness: 70.0,
            vessels: vec![
                VesselLine {
                    anchor: (od_center.0 + 5.0, od_center.1 - 7.0),
                    angle: 0.45,
                    width: 3.0,
                    depth: 35.0,
                },
                VesselLine {
                    anchor: (od_center.0 - 4.0, od_center.1 + 8.0),
                    angle: -0.50,
                    width: 3.0,
                    depth: 35.0,
                },
                VesselLine {
                    anchor: (od_center.0 + 9.0, od_center.1 + 3.0),
                    angle: 1.25,
                    width: 3.0,
                    depth: 35.0,
                },
            ],
            noise_sigma: 0.0,
            noise_seed: 0,
        }
    }

    /// Uniform mid-gray disc of view with no macula, optic disc, or
    /// vessels.
    pub fn blank(width: u32, height: u32) -> Self {
        let mut phantom = Self::reference(width, height);
        phantom.macula_depth = 0.0;
        phantom.od_brightness = 0.0;
        phantom.vessels.clear();
        phantom
    }

    /// Seeded random phantom: blob center, vessel angles, and the noise
    /// realization vary; the remaining anatomy stays at reference values.
    /// Vessel lines keep clear of the blob, as real arcades keep clear of
    /// the foveal avascular zone.
    pub fn randomized(width: u32, height: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut phantom = Self::reference(width, height);
        let radius = phantom.fov_radius;
        let (cx, cy) = phantom.fov_center;
        phantom.macula_center = (
            cx + rng.gen_range(0.03..0.16) * radius,
            cy + rng.gen_range(-0.10..0.10) * radius,
        );
        for vessel in &mut phantom.vessels {
            vessel.anchor = (
                phantom.od_center.0 + rng.gen_range(-10.0..10.0),
                phantom.od_center.1 + rng.gen_range(-10.0..10.0),
            );
            // Resample until the line misses the foveal zone.
            loop {
                let angle = rng.gen_range(0.0..std::f64::consts::PI);
                let (sin, cos) = angle.sin_cos();
                let clearance = (-sin * (phantom.macula_center.0 - vessel.anchor.0)
                    + cos * (phantom.macula_center.1 - vessel.anchor.1))
                    .abs();
                if clearance > 2.5 * phantom.macula_sigma {
                    vessel.angle = angle;
                    break;
                }
            }
        }
        phantom.noise_sigma = 5.0;
        phantom.noise_seed = rng.gen();
        phantom
    }

    /// Renders the phantom as an RGB raster with equal channels.
    pub fn render(&self) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        let noise = (self.noise_sigma > 0.0)
            .then(|| Normal::new(0.0, self.noise_sigma).expect("positive sigma"));
        let (cx, cy) = self.fov_center;
        let fov_r2 = self.fov_radius * self.fov_radius;
        let sigma2 = 2.0 * self.macula_sigma * self.macula_sigma;
        let mut data = Vec::with_capacity(self.width as usize * self.height as usize);
        for y in 0..self.height {
            for x in 0..self.width {
                // Sample per pixel to keep the stream position independent
                // of geometry.
                let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                let px = f64::from(x);
                let py = f64::from(y);
                let dx = px - cx;
                let dy = py - cy;
                let level = if dx * dx + dy * dy > fov_r2 {
                    0.0
                } else {
                    let mut v = self.background;
                    let mdx = px - self.macula_center.0;
                    let mdy = py - self.macula_center.1;
                    let md2 = mdx * mdx + mdy * mdy;
                    if md2 < 25.0 * self.macula_sigma * self.macula_sigma {
                        v -= self.macula_depth * (-md2 / sigma2).exp();
                    }
                    let odx = px - self.od_center.0;
                    let ody = py - self.od_center.1;
                    let od_d2 = odx * odx + ody * ody;
                    if od_d2 < 9.0 * self.od_radius * self.od_radius {
                        let ratio = od_d2 / (self.od_radius * self.od_radius);
                        v += self.od_brightness * (-(ratio * ratio * ratio * ratio)).exp();
                    }
                    for vessel in &self.vessels {
                        let (sin, cos) = vessel.angle.sin_cos();
                        let dist =
                            (-sin * (px - vessel.anchor.0) + cos * (py - vessel.anchor.1)).abs();
                        if dist <= vessel.width / 2.0 {
                            v -= vessel.depth;
                        }
                    }
                    v + n
                };
                let value = round_half_up(level).clamp(0.0, 255.0) as u8;
                data.push([value; 3]);
            }
        }
        RgbImage::from_raw(self.width, self.height, data)
    }
}

/// Centroid-error statistics over detected phantoms, in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub median_px: f64,
    pub mean_px: f64,
    pub max_px: f64,
}

/// Total-runtime percentiles in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingPercentiles {
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

/// Outcome of a seeded phantom benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomBenchReport {
    pub phantoms: u32,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub detected: u32,
    pub detection_rate: f64,
    pub centroid_error_px: Option<ErrorStats>,
    pub timing_ms: TimingPercentiles,
    pub stage_median_ms: StageTimings,
}

/// Generates `count` seeded random phantoms, runs detection on each
/// (sequentially, so timings reflect a single worker), and summarizes
/// detection rate, centroid error, and per-stage timing medians.
///
/// Detection statistics depend only on `(count, seed, width, height, cfg)`;
/// repeated runs reproduce them exactly.
pub fn phantom_benchmark(
    count: u32,
    seed: u64,
    width: u32,
    height: u32,
    cfg: &PipelineConfig,
) -> PhantomBenchReport {
    assert!(count >= 1, "benchmark needs at least one phantom");
    let mut detected = 0u32;
    let mut errors: Vec<f64> = Vec::new();
    let mut totals: Vec<f64> = Vec::new();
    let mut timings: Vec<StageTimings> = Vec::new();
    for i in 0..count {
        let phantom = Phantom::randomized(width, height, seed.wrapping_add(u64::from(i)));
        let img = phantom.render();
        let result = detect(&img, cfg).expect("phantom field of view is never degenerate");
        totals.push(result.timings.total_ms);
        timings.push(result.timings.clone());
        if let Some((fx, fy)) = result.fovea {
            detected += 1;
            let dx = f64::from(fx) - phantom.macula_center.0;
            let dy = f64::from(fy) - phantom.macula_center.1;
            errors.push((dx * dx + dy * dy).sqrt());
        }
    }

    let centroid_error_px = (!errors.is_empty()).then(|| ErrorStats {
        median_px: stats::round3(stats::median(&errors)),
        mean_px: stats::round3(stats::mean(&errors)),
        max_px: stats::round3(errors.iter().fold(0.0f64, |a, &b| a.max(b))),
    });
    let median_of = |extract: fn(&StageTimings) -> f64| -> f64 {
        let values: Vec<f64> = timings.iter().map(extract).collect();
        stats::round3(stats::median(&values))
    };
    PhantomBenchReport {
        phantoms: count,
        seed,
        width,
        height,
        detected,
        detection_rate: stats::round3(f64::from(detected) / f64::from(count)),
        centroid_error_px,
        timing_ms: TimingPercentiles {
            p50_ms: stats::round3(stats::percentile(&totals, 50.0)),
            p90_ms: stats::round3(stats::percentile(&totals, 90.0)),
            p95_ms: stats::round3(stats::percentile(&totals, 95.0)),
            max_ms: stats::round3(totals.iter().fold(0.0f64, |a, &b| a.max(b))),
        },
        stage_median_ms: StageTimings {
            grayscale_ms: median_of(|t| t.grayscale_ms),
            fov_mask_ms: median_of(|t| t.fov_mask_ms),
            enhance_ms: median_of(|t| t.enhance_ms),
            equalize_ms: median_of(|t| t.equalize_ms),
            denoise_ms: median_of(|t| t.denoise_ms),
            repeat_enhance_ms: median_of(|t| t.repeat_enhance_ms),
            histogram_ms: median_of(|t| t.histogram_ms),
            otsu_ms: median_of(|t| t.otsu_ms),
            binarize_ms: median_of(|t| t.binarize_ms),
            label_ms: median_of(|t| t.label_ms),
            select_ms: median_of(|t| t.select_ms),
            total_ms: median_of(|t| t.total_ms),
        },
    }
}
