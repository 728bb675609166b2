//! Raster containers, decoding/encoding, grayscale conversion, field-of-view
//! masking, and annotated output rendering.
//!
//! All rasters are row-major with the origin at the top-left corner, x
//! rightward and y downward. Intensities are 8-bit levels in [0, 255];
//! 16-bit sources are truncated to 8 bits by dropping the low byte so that
//! the pipeline's fixed constants keep their meaning.

use std::io::ErrorKind;
use std::path::Path;

use crate::blobs::ComponentSet;
use crate::error::{Error, Result};
use crate::morphology::{self, StructuringElement};
use crate::pipeline::DetectionResult;

/// Default near-black tolerance for [`estimate_fov_mask`].
pub const DEFAULT_FOV_TOLERANCE: u8 = 10;

/// Radius of the disk used to close pinholes in the field-of-view estimate.
const FOV_CLOSING_RADIUS: u32 = 5;

/// Radius of the circle drawn around a detected fovea.
const ANNOTATION_CIRCLE_RADIUS: i64 = 20;

/// Half-length of the crosshair arms drawn through a detected fovea.
const ANNOTATION_CROSSHAIR_ARM: i64 = 28;

const ANNOTATION_COLOR: [u8; 3] = [0, 255, 0];

/// 8-bit color raster, one `[r, g, b]` triple per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<[u8; 3]>,
}

impl RgbImage {
    /// Creates an image filled with `fill`. Panics if either dimension is 0.
    pub fn new(width: u32, height: u32, fill: [u8; 3]) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        Self {
            width,
            height,
            data: vec![fill; width as usize * height as usize],
        }
    }

    /// Wraps an existing pixel buffer. Panics unless `data.len() == width * height`.
    pub fn from_raw(width: u32, height: u32, data: Vec<[u8; 3]>) -> Self {
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

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: [u8; 3]) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }
}

/// 8-bit single-channel raster holding the working image of every
/// morphological and histogram stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    /// Creates an image filled with `fill`. Panics if either dimension is 0.
    pub fn new(width: u32, height: u32, fill: u8) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        Self {
            width,
            height,
            data: vec![fill; width as usize * height as usize],
        }
    }

    /// Wraps an existing level buffer. Panics unless `data.len() == width * height`.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        assert_eq!(
            data.len(),
            width as usize * height as usize,
            "pixel buffer length must equal width * height"
        );
        Self { width, height, data }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn levels(&self) -> &[u8] {
        &self.data
    }

    pub fn levels_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    /// Row `y` as a slice of `width` levels.
    #[inline]
    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        let start = y as usize * w;
        &self.data[start..start + w]
    }
}

/// Boolean map of the camera's field of view: `true` pixels lie inside the
/// illuminated disc, `false` pixels on the black border.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FovMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl FovMask {
    pub fn from_raw(width: u32, height: u32, data: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be >= 1");
        assert_eq!(
            data.len(),
            width as usize * height as usize,
            "mask buffer length must equal width * height"
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
    pub fn inside(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn count_inside(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Decodes a PNG or JPEG file into an [`RgbImage`].
///
/// 16-bit channels are truncated to their high byte; alpha is discarded.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path).map_err(|e| {
        if e.kind() == ErrorKind::NotFound {
            Error::FileNotFound { path: path.into() }
        } else {
            Error::Decode {
                path: path.into(),
                source: image::ImageError::IoError(e),
            }
        }
    })?;
    let decoded = reader.decode().map_err(|e| Error::Decode {
        path: path.into(),
        source: e,
    })?;
    Ok(dynamic_to_rgb(decoded))
}

fn dynamic_to_rgb(img: image::DynamicImage) -> RgbImage {
    use image::DynamicImage::*;
    let (width, height) = (img.width(), img.height());
    let high = |v: u16| (v >> 8) as u8;
    let data: Vec<[u8; 3]> = match img {
        ImageLuma16(buf) => buf.pixels().map(|p| [high(p.0[0]); 3]).collect(),
        ImageLumaA16(buf) => buf.pixels().map(|p| [high(p.0[0]); 3]).collect(),
        ImageRgb16(buf) => buf
            .pixels()
            .map(|p| [high(p.0[0]), high(p.0[1]), high(p.0[2])])
            .collect(),
        ImageRgba16(buf) => buf
            .pixels()
            .map(|p| [high(p.0[0]), high(p.0[1]), high(p.0[2])])
            .collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| [p.0[0], p.0[1], p.0[2]])
            .collect(),
    };
    RgbImage::from_raw(width, height, data)
}

/// Writes `img` as a PNG file.
pub fn save_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = image::RgbImage::new(img.width(), img.height());
    for (i, p) in img.pixels().iter().enumerate() {
        let x = (i % img.width() as usize) as u32;
        let y = (i / img.width() as usize) as u32;
        buf.put_pixel(x, y, image::Rgb(*p));
    }
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Write {
            path: path.into(),
            source: e,
        })
}

/// Writes a grayscale raster as a PNG file.
pub fn save_gray_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = image::GrayImage::from_raw(img.width(), img.height(), img.levels().to_vec())
        .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Write {
            path: path.into(),
            source: e,
        })
}

/// Converts a color image to grayscale levels.
///
/// Each output level is `0.299 R + 0.587 G + 0.114 B`, rounded half-up.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let data = img
        .pixels()
        .iter()
        .map(|&[r, g, b]| {
            let luma = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
            round_half_up(luma) as u8
        })
        .collect();
    GrayImage::from_raw(img.width(), img.height(), data)
}

/// Rounds a nonnegative value half-up to the nearest integer.
#[inline]
pub fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

/// Estimates the camera field of view: pixels brighter than `tol` form the
/// candidate region, which is then closed with a radius-5 disk to fill
/// vessel-dark pinholes near the rim.
///
/// Returns [`Error::DegenerateMask`] when the closed region is empty.
pub fn estimate_fov_mask(img: &GrayImage, tol: u8) -> Result<FovMask> {
    let binary = GrayImage::from_raw(
        img.width(),
        img.height(),
        img.levels().iter().map(|&v| if v > tol { 255 } else { 0 }).collect(),
    );
    let closed = morphology::close(&binary, &StructuringElement::disk(FOV_CLOSING_RADIUS));
    let data: Vec<bool> = closed.levels().iter().map(|&v| v > 0).collect();
    if !data.iter().any(|&b| b) {
        return Err(Error::DegenerateMask);
    }
    Ok(FovMask::from_raw(img.width(), img.height(), data))
}

/// Writes a PNG copy of `img`; when `result.detected`, overlays a crosshair
/// and a radius-20 circle centered on the fovea.
pub fn render_annotation(
    img: &RgbImage,
    result: &DetectionResult,
    out: impl AsRef<Path>,
) -> Result<()> {
    let mut annotated = img.clone();
    if let Some((fx, fy)) = result.fovea {
        draw_marker(&mut annotated, i64::from(fx), i64::from(fy));
    }
    save_png(&annotated, out)
}

fn draw_marker(img: &mut RgbImage, cx: i64, cy: i64) {
    let mut plot = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < i64::from(img.width()) && y < i64::from(img.height()) {
            img.set(x as u32, y as u32, ANNOTATION_COLOR);
        }
    };
    for d in -ANNOTATION_CROSSHAIR_ARM..=ANNOTATION_CROSSHAIR_ARM {
        plot(cx + d, cy);
        plot(cx, cy + d);
    }
    // Midpoint circle.
    let r = ANNOTATION_CIRCLE_RADIUS;
    let mut x = r;
    let mut y = 0i64;
    let mut err = 1 - r;
    while x >= y {
        for &(dx, dy) in &[
            (x, y),
            (y, x),
            (-y, x),
            (-x, y),
            (-x, -y),
            (-y, -x),
            (y, -x),
            (x, -y),
        ] {
            plot(cx + dx, cy + dy);
        }
        y += 1;
        if err < 0 {
            err += 2 * y + 1;
        } else {
            x -= 1;
            err += 2 * (y - x) + 1;
        }
    }
}

/// Renders labeled components as a color map: background black, each label a
/// distinct hue (golden-angle rotation so neighbors differ).
pub fn colormap_components(set: &ComponentSet, width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::new(width, height, [0, 0, 0]);
    for component in &set.components {
        let hue = (component.label as f64 * 137.508) % 360.0;
        let color = hsv_to_rgb(hue, 0.85, 1.0);
        for &(x, y) in &component.pixels {
            img.set(x, y, color);
        }
    }
    img
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        round_half_up((r + m) * 255.0) as u8,
        round_half_up((g + m) * 255.0) as u8,
        round_half_up((b + m) * 255.0) as u8,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::pipeline::{DetectionResult, StageTimings};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grayscale_coefficients() {
        let img = RgbImage::from_raw(
            3,
            1,
            vec![[255, 0, 0], [128, 128, 128], [0, 255, 0]],
        );
        let gray = to_grayscale(&img);
        assert_eq!(gray.levels(), &[76, 128, 150]);
    }

    #[test]
    fn grayscale_identity_on_gray_pixels() {
        for v in 0..=255u8 {
            let img = RgbImage::new(1, 1, [v, v, v]);
            assert_eq!(to_grayscale(&img).get(0, 0), v);
        }
    }

    #[test]
    fn grayscale_bounded_by_channel_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..2000 {
            let p: [u8; 3] = [rng.gen(), rng.gen(), rng.gen()];
            let v = to_grayscale(&RgbImage::new(1, 1, p)).get(0, 0);
            assert!(v >= *p.iter().min().unwrap());
            assert!(v <= *p.iter().max().unwrap());
        }
    }

    #[test]
    fn load_reports_missing_files() {
        assert!(matches!(
            load_image("/nonexistent/image.png"),
            Err(Error::FileNotFound { .. })
        ));
    }

    #[test]
    fn load_reports_decode_failures() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.png");
        std::fs::write(&path, b"not a png").unwrap();
        assert!(matches!(load_image(&path), Err(Error::Decode { .. })));
    }

    #[test]
    fn png_save_load_round_trip_is_pixel_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let img = RgbImage::from_raw(
            33,
            17,
            (0..33 * 17).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect(),
        );
        let path = dir.path().join("img.png");
        save_png(&img, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);
    }

    #[test]
    fn load_single_pixel_and_full_size() {
        let dir = tempfile::tempdir().unwrap();
        let tiny = dir.path().join("tiny.png");
        save_png(&RgbImage::new(1, 1, [10, 20, 30]), &tiny).unwrap();
        let loaded = load_image(&tiny).unwrap();
        assert_eq!((loaded.width(), loaded.height()), (1, 1));
        assert_eq!(loaded.get(0, 0), [10, 20, 30]);

        let big = dir.path().join("big.png");
        save_png(&RgbImage::new(700, 1050, [120, 60, 40]), &big).unwrap();
        let loaded = load_image(&big).unwrap();
        assert_eq!((loaded.width(), loaded.height()), (700, 1050));
    }

    #[test]
    fn sixteen_bit_sources_drop_the_low_byte() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        let mut buf = image::ImageBuffer::<image::Rgb<u16>, Vec<u16>>::new(2, 1);
        buf.put_pixel(0, 0, image::Rgb([0x12ff, 0x3401, 0xabcd]));
        buf.put_pixel(1, 0, image::Rgb([0x00ff, 0xffff, 0x8000]));
        buf.save_with_format(&path, image::ImageFormat::Png).unwrap();
        let loaded = load_image(&path).unwrap();
        assert_eq!(loaded.get(0, 0), [0x12, 0x34, 0xab]);
        assert_eq!(loaded.get(1, 0), [0x00, 0xff, 0x80]);
    }

    #[test]
    fn fov_mask_trivial_cases() {
        let white = GrayImage::new(16, 16, 255);
        let mask = estimate_fov_mask(&white, 10).unwrap();
        assert_eq!(mask.count_inside(), 256);

        let black = GrayImage::new(16, 16, 0);
        assert!(matches!(
            estimate_fov_mask(&black, 10),
            Err(Error::DegenerateMask)
        ));
    }

    #[test]
    fn fov_mask_matches_threshold_plus_closing_oracle() {
        // Bright disc on black with a few dark pinholes near the rim.
        let mut img = GrayImage::from_fn(64, 64, |x, y| {
            let dx = f64::from(x) - 32.0;
            let dy = f64::from(y) - 32.0;
            if dx * dx + dy * dy <= 24.0 * 24.0 {
                180
            } else {
                0
            }
        });
        img.set(32, 9, 0);
        img.set(50, 30, 3);
        let mask = estimate_fov_mask(&img, 10).unwrap();

        // Oracle: direct threshold, then binary closing from the offset
        // list (dilate then erode over in-bounds windows).
        let disk = StructuringElement::disk(5);
        let thresholded: Vec<bool> = img.levels().iter().map(|&v| v > 10).collect();
        let extremum = |src: &[bool], take_max: bool| -> Vec<bool> {
            let mut out = vec![false; src.len()];
            for y in 0..64i64 {
                for x in 0..64i64 {
                    let mut acc: Option<bool> = None;
                    for &(dx, dy) in disk.offsets() {
                        let (sx, sy) = (x - i64::from(dx), y - i64::from(dy));
                        if sx < 0 || sy < 0 || sx >= 64 || sy >= 64 {
                            continue;
                        }
                        let v = src[(sy * 64 + sx) as usize];
                        acc = Some(match acc {
                            None => v,
                            Some(a) if take_max => a || v,
                            Some(a) => a && v,
                        });
                    }
                    out[(y * 64 + x) as usize] = acc.unwrap();
                }
            }
            out
        };
        let closed = extremum(&extremum(&thresholded, true), false);
        assert_eq!(mask.flags(), closed.as_slice());
        // The pinholes are filled.
        assert!(mask.inside(32, 9));
        assert!(mask.inside(50, 30));
    }

    #[test]
    fn fov_mask_monotone_in_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let img = GrayImage::from_fn(32, 32, |_, _| rng.gen());
        let mut previous: Option<FovMask> = None;
        for tol in [0u8, 40, 90, 140, 200] {
            match (estimate_fov_mask(&img, tol), &previous) {
                (Ok(mask), Some(prev)) => {
                    for (now, before) in mask.flags().iter().zip(prev.flags()) {
                        assert!(!now | before, "raising tol added a pixel");
                    }
                    previous = Some(mask);
                }
                (Ok(mask), None) => previous = Some(mask),
                (Err(Error::DegenerateMask), _) => break,
                (Err(e), _) => panic!("unexpected error {e:?}"),
            }
        }
    }

    fn result_at(fovea: Option<(u32, u32)>) -> DetectionResult {
        DetectionResult {
            source: "test.png".into(),
            detected: fovea.is_some(),
            fovea,
            candidate: None,
            timings: StageTimings::default(),
            error: None,
        }
    }

    #[test]
    fn annotation_without_detection_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage::new(64, 64, [90, 40, 30]);
        let out = dir.path().join("plain.png");
        render_annotation(&img, &result_at(None), &out).unwrap();
        assert_eq!(load_image(&out).unwrap(), img);
    }

    #[test]
    fn annotation_changes_only_the_marker_stencil() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage::new(200, 160, [90, 40, 30]);
        let out = dir.path().join("marked.png");
        let (cx, cy) = (100i64, 80i64);
        render_annotation(&img, &result_at(Some((cx as u32, cy as u32))), &out).unwrap();
        let marked = load_image(&out).unwrap();
        let mut changed = 0;
        for y in 0..160i64 {
            for x in 0..200i64 {
                if marked.get(x as u32, y as u32) == img.get(x as u32, y as u32) {
                    continue;
                }
                changed += 1;
                let on_crosshair =
                    (y == cy && (x - cx).abs() <= 28) || (x == cx && (y - cy).abs() <= 28);
                let radius = (((x - cx).pow(2) + (y - cy).pow(2)) as f64).sqrt();
                let on_circle = (19.0..=21.0).contains(&radius);
                assert!(
                    on_crosshair || on_circle,
                    "pixel ({x},{y}) outside the marker stencil"
                );
            }
        }
        assert!(changed > 100, "marker drew {changed} pixels");
    }

    #[test]
    fn annotation_write_failure_reports_path() {
        let img = RgbImage::new(8, 8, [1, 2, 3]);
        let err = render_annotation(&img, &result_at(None), "/nonexistent/dir/out.png");
        assert!(matches!(err, Err(Error::Write { .. })));
    }

    #[test]
    fn component_colormap_colors_labels_distinctly() {
        use crate::blobs::{label_components, Connectivity};
        use crate::segment::BinaryImage;
        let mut data = vec![false; 64];
        data[0] = true;
        data[63] = true;
        let bin = BinaryImage::from_raw(8, 8, data);
        let set = label_components(&bin, Connectivity::Eight);
        let map = colormap_components(&set, 8, 8);
        assert_ne!(map.get(0, 0), [0, 0, 0]);
        assert_ne!(map.get(7, 7), [0, 0, 0]);
        assert_ne!(map.get(0, 0), map.get(7, 7));
        assert_eq!(map.get(3, 3), [0, 0, 0]);
    }
}
