//! Otsu threshold selection with the dark-region offset rule, and
//! binarization of candidate macula tissue.

use crate::enhance::Histogram;
use crate::imaging::{FovMask, GrayImage};

/// Default offset subtracted from the normalized Otsu threshold.
pub const DEFAULT_OTSU_OFFSET: f64 = 0.2;

/// Boolean raster: `true` marks foreground (candidate macula tissue).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn from_raw(width: u32, height: u32, data: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        assert_eq!(
            data.len(),
            width as usize * height as usize,
            "pixel buffer length must equal width * height"
        );
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn flags(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Outcome of the threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    /// Smallest level maximizing the inter-class variance.
    pub otsu_level: u8,
    /// `otsu_level / 255`.
    pub normalized_threshold: f64,
    /// Normalized threshold after the configured offset; equals
    /// `normalized_threshold` straight out of [`otsu`].
    pub effective_threshold: f64,
    /// Inter-class variance at every candidate level, for diagnostics.
    pub variance_curve: Vec<f64>,
}

impl ThresholdReport {
    /// Normalized threshold lowered by `offset` and clamped to [0, 1].
    pub fn offset_threshold(&self, offset: f64) -> f64 {
        (self.normalized_threshold - offset).clamp(0.0, 1.0)
    }
}

/// Exhaustive Otsu sweep: evaluates the inter-class variance
/// `w0 w1 (mu0 - mu1)^2` at every split `t` in 1..=255 with class 0 the
/// levels below `t`, and returns the smallest maximizing `t`. The variance
/// is defined as 0 whenever either class is empty.
pub fn otsu(hist: &Histogram) -> ThresholdReport {
    let total = hist.total();
    assert!(total >= 1, "histogram must cover at least one pixel");
    let total_f = total as f64;
    let probabilities: Vec<f64> = hist.counts().iter().map(|&c| c as f64 / total_f).collect();
    let overall_mean: f64 = probabilities
        .iter()
        .enumerate()
        .map(|(i, &p)| i as f64 * p)
        .sum();

    let mut variance_curve = vec![0.0f64; 256];
    let mut count0 = 0u64;
    let mut w0 = 0.0f64;
    let mut sum0 = 0.0f64;
    let mut best_t = 1u8;
    let mut best_variance = f64::MIN;
    for t in 1..=255usize {
        count0 += hist.counts()[t - 1];
        w0 += probabilities[t - 1];
        sum0 += (t - 1) as f64 * probabilities[t - 1];
        let variance = if count0 == 0 || count0 == total {
            0.0
        } else {
            let w1 = 1.0 - w0;
            let mean0 = sum0 / w0;
            let mean1 = (overall_mean - sum0) / w1;
            w0 * w1 * (mean0 - mean1) * (mean0 - mean1)
        };
        variance_curve[t] = variance;
        if variance > best_variance {
            best_variance = variance;
            best_t = t as u8;
        }
    }

    ThresholdReport {
        otsu_level: best_t,
        normalized_threshold: f64::from(best_t) / 255.0,
        effective_threshold: f64::from(best_t) / 255.0,
        variance_curve,
    }
}

/// Binarizes dark regions: a pixel is foreground iff it is masked in and
/// its normalized level lies strictly below the offset threshold
/// `clamp(normalized_threshold - offset, 0, 1)`.
pub fn binarize_dark(
    f: &GrayImage,
    report: &ThresholdReport,
    offset: f64,
    mask: Option<&FovMask>,
) -> BinaryImage {
    assert!((0.0..=1.0).contains(&offset), "offset must lie in [0, 1]");
    let threshold = report.offset_threshold(offset);
    let data = f
        .levels()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let inside = mask.map_or(true, |m| m.flags()[i]);
            inside && f64::from(v) / 255.0 < threshold
        })
        .collect();
    BinaryImage::from_raw(f.width(), f.height(), data)
}
