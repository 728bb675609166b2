//! Histogram equalization (global and contrast-limited tiled) and the
//! post-equalization close/open denoising pass.

use crate::error::{Error, Result};
use crate::imaging::{round_half_up, FovMask, GrayImage};
use crate::morphology::{self, StructuringElement};

/// Default radius for the post-equalization denoise pass: between the
/// vessel scale and the macula scale.
pub const DEFAULT_DENOISE_RADIUS: u32 = 5;

/// 256-bin level histogram over the masked-in region of an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: [u64; 256],
    total: u64,
}

impl Histogram {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Counts level occurrences over the masked-in pixels (all pixels when
/// `mask` is `None`). Errors with [`Error::EmptyRegion`] when no pixel is
/// masked in.
pub fn build_histogram(f: &GrayImage, mask: Option<&FovMask>) -> Result<Histogram> {
    let mut counts = [0u64; 256];
    match mask {
        None => {
            for &v in f.levels() {
                counts[v as usize] += 1;
            }
        }
        Some(mask) => {
            assert_eq!(
                (mask.width(), mask.height()),
                (f.width(), f.height()),
                "mask dimensions must match the image"
            );
            for (&v, &inside) in f.levels().iter().zip(mask.flags()) {
                if inside {
                    counts[v as usize] += 1;
                }
            }
        }
    }
    let hist = Histogram::from_counts(counts);
    if hist.total == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(hist)
}

/// Level mapping for histogram equalization with cdf-min normalization:
/// `m(v) = round(255 (cdf(v) - cdf_min) / (total - cdf_min))`, identity when
/// the region holds a single level. Levels below the darkest occupied level
/// (possible for masked-out pixels) clamp to 0.
fn equalization_map(hist: &Histogram) -> [u8; 256] {
    let mut map = [0u8; 256];
    // Smallest nonzero cdf value = count of the darkest occupied level.
    let cdf_min = hist.counts.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if hist.total == cdf_min {
        for (v, slot) in map.iter_mut().enumerate() {
            *slot = v as u8;
        }
        return map;
    }
    let den = (hist.total - cdf_min) as f64;
    let mut cdf = 0u64;
    for (v, &count) in hist.counts.iter().enumerate() {
        cdf += count;
        let num = cdf.saturating_sub(cdf_min) as f64;
        map[v] = round_half_up(255.0 * num / den).clamp(0.0, 255.0) as u8;
    }
    map
}

/// Global histogram equalization. The mapping is built from the masked-in
/// histogram and applied to every pixel, so masked-out pixels keep visual
/// continuity without influencing the mapping.
pub fn equalize_global(f: &GrayImage, mask: Option<&FovMask>) -> Result<GrayImage> {
    let hist = build_histogram(f, mask)?;
    let map = equalization_map(&hist);
    Ok(GrayImage::from_raw(
        f.width(),
        f.height(),
        f.levels().iter().map(|&v| map[v as usize]).collect(),
    ))
}

/// Contrast-limited tiled equalization: the image is split into
/// `tiles x tiles` cells, each cell histogram is clipped at
/// `clip * cell_pixels / 256` with the excess redistributed uniformly, each
/// cell is equalized with the global formula, and mappings are bilinearly
/// interpolated between cell centers.
///
/// `tiles = 1` with an infinite `clip` reproduces [`equalize_global`]
/// exactly. Errors with [`Error::TileTooSmall`] when any cell covers fewer
/// than 2 pixels.
pub fn equalize_adaptive(f: &GrayImage, tiles: u32, clip: f64) -> Result<GrayImage> {
    assert!(tiles >= 1, "tile count must be >= 1");
    assert!(clip >= 1.0, "clip limit must be >= 1.0");
    let bounds_x = cell_bounds(f.width(), tiles);
    let bounds_y = cell_bounds(f.height(), tiles);
    let min_cell = bounds_x.iter().map(|b| b.len).min().unwrap() as u64
        * bounds_y.iter().map(|b| b.len).min().unwrap() as u64;
    if min_cell < 2 {
        return Err(Error::TileTooSmall {
            tiles,
            width: f.width(),
            height: f.height(),
        });
    }

    let t = tiles as usize;
    let mut luts: Vec<[u8; 256]> = Vec::with_capacity(t * t);
    for by in &bounds_y {
        for bx in &bounds_x {
            luts.push(cell_lut(f, bx, by, clip));
        }
    }

    let wx = interp_weights(f.width(), &bounds_x);
    let wy = interp_weights(f.height(), &bounds_y);
    let mut data = Vec::with_capacity(f.levels().len());
    for (y, &(iy0, iy1, fy)) in wy.iter().enumerate() {
        for (x, &(ix0, ix1, fx)) in wx.iter().enumerate() {
            let v = f.levels()[y * f.width() as usize + x] as usize;
            let tl = f64::from(luts[iy0 * t + ix0][v]);
            let tr = f64::from(luts[iy0 * t + ix1][v]);
            let bl = f64::from(luts[iy1 * t + ix0][v]);
            let br = f64::from(luts[iy1 * t + ix1][v]);
            let top = (1.0 - fx) * tl + fx * tr;
            let bottom = (1.0 - fx) * bl + fx * br;
            let blended = (1.0 - fy) * top + fy * bottom;
            data.push(round_half_up(blended).clamp(0.0, 255.0) as u8);
        }
    }
    Ok(GrayImage::from_raw(f.width(), f.height(), data))
}

struct CellBounds {
    start: u32,
    len: u32,
    center: f64,
}

fn cell_bounds(extent: u32, tiles: u32) -> Vec<CellBounds> {
    (0..tiles)
        .map(|i| {
            let start = (u64::from(extent) * u64::from(i) / u64::from(tiles)) as u32;
            let end = (u64::from(extent) * u64::from(i + 1) / u64::from(tiles)) as u32;
            CellBounds {
                start,
                len: end - start,
                center: f64::from(start + end - 1) / 2.0,
            }
        })
        .collect()
}

/// Per-coordinate interpolation lookup: (left cell, right cell, right weight).
/// Coordinates outside the outermost cell centers clamp to the edge mapping.
fn interp_weights(extent: u32, bounds: &[CellBounds]) -> Vec<(usize, usize, f64)> {
    let centers: Vec<f64> = bounds.iter().map(|b| b.center).collect();
    (0..extent as usize)
        .map(|p| {
            let pos = p as f64;
            if pos <= centers[0] {
                (0, 0, 0.0)
            } else if pos >= *centers.last().unwrap() {
                (centers.len() - 1, centers.len() - 1, 0.0)
            } else {
                let i = centers.partition_point(|&c| c <= pos) - 1;
                let w = (pos - centers[i]) / (centers[i + 1] - centers[i]);
                (i, i + 1, w)
            }
        })
        .collect()
}

fn cell_lut(f: &GrayImage, bx: &CellBounds, by: &CellBounds, clip: f64) -> [u8; 256] {
    let mut counts = [0u64; 256];
    for y in by.start..by.start + by.len {
        let row = f.row(y);
        for x in bx.start..bx.start + bx.len {
            counts[row[x as usize] as usize] += 1;
        }
    }
    // A cell holding a single level equalizes to the identity regardless of
    // clipping, matching the global formula's degenerate rule.
    if counts.iter().filter(|&&c| c > 0).count() <= 1 {
        let mut identity = [0u8; 256];
        for (v, slot) in identity.iter_mut().enumerate() {
            *slot = v as u8;
        }
        return identity;
    }
    let cell_pixels = u64::from(bx.len) * u64::from(by.len);
    if clip.is_finite() {
        clip_histogram(&mut counts, cell_pixels, clip);
    }
    equalization_map(&Histogram::from_counts(counts))
}

/// Clips bins at `clip * cell_pixels / 256` (floor, at least 1) and
/// redistributes the excess uniformly: an equal share to every bin, the
/// remainder spread one count at a time at a fixed stride.
fn clip_histogram(counts: &mut [u64; 256], cell_pixels: u64, clip: f64) {
    let limit = ((clip * cell_pixels as f64 / 256.0).floor() as u64).max(1);
    let mut excess = 0u64;
    for c in counts.iter_mut() {
        if *c > limit {
            excess += *c - limit;
            *c = limit;
        }
    }
    if excess == 0 {
        return;
    }
    let share = excess / 256;
    let mut remainder = (excess % 256) as usize;
    for c in counts.iter_mut() {
        *c += share;
    }
    let stride = 256usize.checked_div(remainder).map_or(0, |s| s.max(1));
    let mut i = 0;
    while remainder > 0 && i < 256 {
        counts[i] += 1;
        remainder -= 1;
        i += stride;
    }
}

/// Morphological closing then opening with a disk of the given radius:
/// dark pinholes are filled first, then bright specks are removed.
/// Closing must run first on dark-target images: an opening pass widens
/// every noise minimum into a structuring-element-sized dark plateau that
/// no subsequent closing can remove. Radius 0 is the identity.
pub fn denoise(f: &GrayImage, radius: u32) -> GrayImage {
    if radius == 0 {
        return f.clone();
    }
    let se = StructuringElement::disk(radius);
    morphology::open(&morphology::close(f, &se), &se)
}
