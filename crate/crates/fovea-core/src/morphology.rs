//! Flat-disk grayscale morphology: dilation, erosion, opening, closing,
//! top-hat, bottom-hat, and the composite contrast enhancement built from
//! them.
//!
//! All operators use a flat (zero-height) structuring function, so suprema
//! and infima reduce to windowed maxima and minima. Neighbors falling
//! outside the image are ignored: the window is restricted to in-bounds
//! pixels, with no padding value. Dilation and erosion run in near-linear
//! time by decomposing the disk into horizontal runs and sliding a
//! monotonic-deque extremum along each row.

use crate::imaging::GrayImage;

/// Flat disk-shaped neighborhood: all integer offsets `(dx, dy)` with
/// `dx^2 + dy^2 <= radius^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    radius: u32,
    offsets: Vec<(i32, i32)>,
}

impl StructuringElement {
    /// Rasterizes the disk of the given radius. Radius 0 yields `{(0, 0)}`.
    pub fn disk(radius: u32) -> Self {
        let r = i64::from(radius);
        let mut offsets = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    offsets.push((dx as i32, dy as i32));
                }
            }
        }
        Self { radius, offsets }
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    /// Horizontal runs `(dy, half_width)`: row `dy` of the disk covers
    /// `dx in [-half_width, half_width]`.
    fn row_runs(&self) -> Vec<(i32, u32)> {
        let r = i64::from(self.radius);
        (-r..=r)
            .map(|dy| {
                let half = ((r * r - dy * dy) as f64).sqrt().floor() as u32;
                (dy as i32, half)
            })
            .collect()
    }
}

/// Signed raster carrying top-hat/bottom-hat residues, which live in
/// [-255, 510] before saturation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedImage {
    width: u32,
    height: u32,
    data: Vec<i16>,
}

impl SignedImage {
    pub fn from_raw(width: u32, height: u32, data: Vec<i16>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize);
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[i16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> i16 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Extremum {
    Min,
    Max,
}

/// Grayscale dilation: windowed maximum over the reflected structuring
/// element, restricted to in-bounds pixels.
pub fn dilate(f: &GrayImage, se: &StructuringElement) -> GrayImage {
    windowed_extremum(f, se, Extremum::Max)
}

/// Grayscale erosion: windowed minimum, restricted to in-bounds pixels.
pub fn erode(f: &GrayImage, se: &StructuringElement) -> GrayImage {
    windowed_extremum(f, se, Extremum::Min)
}

/// Opening: erosion followed by dilation.
pub fn open(f: &GrayImage, se: &StructuringElement) -> GrayImage {
    dilate(&erode(f, se), se)
}

/// Closing: dilation followed by erosion.
pub fn close(f: &GrayImage, se: &StructuringElement) -> GrayImage {
    erode(&dilate(f, se), se)
}

/// Top-hat transform `f - open(f)`. Nonnegative, carried signed.
pub fn top_hat(f: &GrayImage, se: &StructuringElement) -> SignedImage {
    let opened = open(f, se);
    let data = f
        .levels()
        .iter()
        .zip(opened.levels())
        .map(|(&v, &o)| i16::from(v) - i16::from(o))
        .collect();
    SignedImage::from_raw(f.width(), f.height(), data)
}

/// Bottom-hat transform `close(f) - f`. Nonnegative, carried signed.
pub fn bottom_hat(f: &GrayImage, se: &StructuringElement) -> SignedImage {
    let closed = close(f, se);
    let data = closed
        .levels()
        .iter()
        .zip(f.levels())
        .map(|(&c, &v)| i16::from(c) - i16::from(v))
        .collect();
    SignedImage::from_raw(f.width(), f.height(), data)
}

/// Contrast enhancement `f + top_hat(f) - bottom_hat(f)`, evaluated in
/// signed arithmetic and saturated to [0, 255].
pub fn enhance_contrast(f: &GrayImage, se: &StructuringElement) -> GrayImage {
    let top = top_hat(f, se);
    let bottom = bottom_hat(f, se);
    let data = f
        .levels()
        .iter()
        .zip(top.values())
        .zip(bottom.values())
        .map(|((&v, &t), &b)| (i16::from(v) + t - b).clamp(0, 255) as u8)
        .collect();
    GrayImage::from_raw(f.width(), f.height(), data)
}

fn windowed_extremum(f: &GrayImage, se: &StructuringElement, ext: Extremum) -> GrayImage {
    if se.radius() == 0 {
        return f.clone();
    }
    let w = f.width() as usize;
    let h = f.height() as usize;
    let runs = se.row_runs();

    // One row-filtered image per distinct run half-width.
    let mut half_widths: Vec<u32> = runs.iter().map(|&(_, k)| k).collect();
    half_widths.sort_unstable();
    half_widths.dedup();
    let filtered: Vec<(u32, Vec<u8>)> = half_widths
        .iter()
        .map(|&k| (k, row_extremum(f.levels(), w, h, k as usize, ext)))
        .collect();
    let filtered_for = |k: u32| -> &[u8] {
        &filtered[filtered.binary_search_by_key(&k, |&(hw, _)| hw).unwrap()].1
    };

    let neutral = match ext {
        Extremum::Max => 0u8,
        Extremum::Min => 255u8,
    };
    let mut out = vec![neutral; w * h];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for &(dy, k) in &runs {
            let sy = y as i64 + i64::from(dy);
            if sy < 0 || sy >= h as i64 {
                continue;
            }
            let src = &filtered_for(k)[sy as usize * w..(sy as usize + 1) * w];
            match ext {
                Extremum::Max => {
                    for (d, &s) in dst.iter_mut().zip(src) {
                        if s > *d {
                            *d = s;
                        }
                    }
                }
                Extremum::Min => {
                    for (d, &s) in dst.iter_mut().zip(src) {
                        if s < *d {
                            *d = s;
                        }
                    }
                }
            }
        }
    }
    GrayImage::from_raw(f.width(), f.height(), out)
}

/// Per-row sliding extremum over the in-bounds window `[x - k, x + k]`,
/// using a monotonic index deque (amortized O(1) per pixel).
fn row_extremum(src: &[u8], w: usize, h: usize, k: usize, ext: Extremum) -> Vec<u8> {
    let mut out = vec![0u8; w * h];
    if k == 0 {
        out.copy_from_slice(src);
        return out;
    }
    let keep = |held: u8, incoming: u8| match ext {
        // Pop `held` when `incoming` dominates it.
        Extremum::Max => held > incoming,
        Extremum::Min => held < incoming,
    };
    let mut deque: Vec<usize> = Vec::with_capacity(2 * k + 2);
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let dst = &mut out[y * w..(y + 1) * w];
        deque.clear();
        let mut head = 0usize;
        let push = |deque: &mut Vec<usize>, head: &mut usize, j: usize| {
            while deque.len() > *head && !keep(row[*deque.last().unwrap()], row[j]) {
                deque.pop();
            }
            deque.push(j);
        };
        for j in 0..=k.min(w - 1) {
            push(&mut deque, &mut head, j);
        }
        for (x, out) in dst.iter_mut().enumerate() {
            while deque[head] + k < x {
                head += 1;
            }
            *out = row[deque[head]];
            let next = x + k + 1;
            if next < w {
                push(&mut deque, &mut head, next);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::GrayImage;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: evaluates the windowed extremum directly from the
    /// offset list, ignoring out-of-bounds neighbors.
    pub(crate) fn naive_extremum(f: &GrayImage, se: &StructuringElement, max: bool) -> GrayImage {
        let (w, h) = (f.width() as i64, f.height() as i64);
        GrayImage::from_fn(f.width(), f.height(), |x, y| {
            let mut acc: Option<u8> = None;
            for &(dx, dy) in se.offsets() {
                let (sx, sy) = (i64::from(x) - i64::from(dx), i64::from(y) - i64::from(dy));
                if sx < 0 || sy < 0 || sx >= w || sy >= h {
                    continue;
                }
                let v = f.get(sx as u32, sy as u32);
                acc = Some(match acc {
                    None => v,
                    Some(a) if max => a.max(v),
                    Some(a) => a.min(v),
                });
            }
            acc.expect("(0,0) is always a member, so the window is never empty")
        })
    }

    pub(crate) fn random_image(rng: &mut impl Rng, max_side: u32) -> GrayImage {
        let w = rng.gen_range(1..=max_side);
        let h = rng.gen_range(1..=max_side);
        GrayImage::from_fn(w, h, |_, _| rng.gen())
    }

    fn invert(f: &GrayImage) -> GrayImage {
        GrayImage::from_raw(
            f.width(),
            f.height(),
            f.levels().iter().map(|&v| 255 - v).collect(),
        )
    }

    #[test]
    fn disk_offset_counts() {
        assert_eq!(StructuringElement::disk(0).offsets().len(), 1);
        assert_eq!(StructuringElement::disk(0).offsets()[0], (0, 0));
        assert_eq!(StructuringElement::disk(1).offsets().len(), 5);
        assert_eq!(StructuringElement::disk(15).offsets().len(), 709);
    }

    #[test]
    fn disk_matches_brute_force_enumeration() {
        for radius in [0u32, 1, 2, 3, 7, 15, 20] {
            let disk = StructuringElement::disk(radius);
            let r = i64::from(radius);
            let mut expected = Vec::new();
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx * dx + dy * dy <= r * r {
                        expected.push((dx as i32, dy as i32));
                    }
                }
            }
            assert_eq!(disk.offsets(), expected.as_slice());
        }
    }

    #[test]
    fn disk_is_point_symmetric_and_contains_origin() {
        for radius in [0u32, 1, 4, 15] {
            let disk = StructuringElement::disk(radius);
            assert!(disk.offsets().contains(&(0, 0)));
            for &(dx, dy) in disk.offsets() {
                assert!(disk.offsets().contains(&(-dx, -dy)));
            }
        }
    }

    #[test]
    fn dilate_constant_is_constant() {
        let f = GrayImage::new(9, 7, 42);
        for radius in [0u32, 1, 3] {
            let out = dilate(&f, &StructuringElement::disk(radius));
            assert_eq!(out, f);
        }
    }

    #[test]
    fn dilate_single_pixel_marks_cross() {
        let mut f = GrayImage::new(5, 5, 0);
        f.set(2, 2, 255);
        let out = dilate(&f, &StructuringElement::disk(1));
        for y in 0..5 {
            for x in 0..5 {
                let on_cross = (x as i32 - 2).abs() + (y as i32 - 2).abs() <= 1;
                assert_eq!(out.get(x, y), if on_cross { 255 } else { 0 });
            }
        }
    }

    #[test]
    fn radius_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_image(&mut rng, 32);
        let se = StructuringElement::disk(0);
        assert_eq!(dilate(&f, &se), f);
        assert_eq!(erode(&f, &se), f);
    }

    #[test]
    fn erode_single_dark_pixel_marks_cross() {
        let mut f = GrayImage::new(5, 5, 255);
        f.set(2, 2, 0);
        let out = erode(&f, &StructuringElement::disk(1));
        for y in 0..5 {
            for x in 0..5 {
                let on_cross = (x as i32 - 2).abs() + (y as i32 - 2).abs() <= 1;
                assert_eq!(out.get(x, y), if on_cross { 0 } else { 255 });
            }
        }
    }

    #[test]
    fn erode_dilate_duality_under_inversion() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let f = random_image(&mut rng, 40);
            for radius in [1u32, 3] {
                let se = StructuringElement::disk(radius);
                let lhs = erode(&f, &se);
                let rhs = invert(&dilate(&invert(&f), &se));
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn open_close_constants_and_specks() {
        let constant = GrayImage::new(8, 8, 99);
        let se = StructuringElement::disk(2);
        assert_eq!(open(&constant, &se), constant);
        assert_eq!(close(&constant, &se), constant);

        let mut speck = GrayImage::new(7, 7, 0);
        speck.set(3, 3, 255);
        assert_eq!(open(&speck, &StructuringElement::disk(1)), GrayImage::new(7, 7, 0));

        let mut hole = GrayImage::new(7, 7, 255);
        hole.set(3, 3, 0);
        assert_eq!(close(&hole, &StructuringElement::disk(1)), GrayImage::new(7, 7, 255));
    }

    #[test]
    fn hats_on_constant_are_zero() {
        let f = GrayImage::new(6, 9, 123);
        let se = StructuringElement::disk(3);
        assert!(top_hat(&f, &se).values().iter().all(|&v| v == 0));
        assert!(bottom_hat(&f, &se).values().iter().all(|&v| v == 0));
    }

    #[test]
    fn top_hat_single_bright_pixel() {
        let mut f = GrayImage::new(7, 7, 0);
        f.set(3, 3, 200);
        let hat = top_hat(&f, &StructuringElement::disk(1));
        for y in 0..7 {
            for x in 0..7 {
                let expected = if (x, y) == (3, 3) { 200 } else { 0 };
                assert_eq!(hat.get(x, y), expected);
            }
        }
    }

    #[test]
    fn hats_are_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = random_image(&mut rng, 32);
            let se = StructuringElement::disk(2);
            assert!(top_hat(&f, &se).values().iter().all(|&v| v >= 0));
            assert!(bottom_hat(&f, &se).values().iter().all(|&v| v >= 0));
        }
    }

    #[test]
    fn enhance_contrast_constant_unchanged() {
        let f = GrayImage::new(10, 4, 77);
        assert_eq!(enhance_contrast(&f, &StructuringElement::disk(3)), f);
    }

    #[test]
    fn enhance_contrast_saturates_bright_speck() {
        let mut f = GrayImage::new(7, 7, 0);
        f.set(3, 3, 200);
        let out = enhance_contrast(&f, &StructuringElement::disk(1));
        // 200 + 200 - 0 saturates at 255.
        assert_eq!(out.get(3, 3), 255);
    }

    #[test]
    fn enhance_contrast_matches_naive_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = GrayImage::from_fn(64, 64, |_, _| rng.gen());
        let se = StructuringElement::disk(3);

        let opened = naive_extremum(&naive_extremum(&f, &se, false), &se, true);
        let closed = naive_extremum(&naive_extremum(&f, &se, true), &se, false);
        let expected = GrayImage::from_fn(64, 64, |x, y| {
            let v = i32::from(f.get(x, y));
            let top = v - i32::from(opened.get(x, y));
            let bottom = i32::from(closed.get(x, y)) - v;
            (v + top - bottom).clamp(0, 255) as u8
        });
        assert_eq!(enhance_contrast(&f, &se), expected);
    }

    #[test]
    fn fast_path_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..12 {
            let f = random_image(&mut rng, 48);
            for radius in [0u32, 1, 3, 15] {
                let se = StructuringElement::disk(radius);
                assert_eq!(dilate(&f, &se), naive_extremum(&f, &se, true));
                assert_eq!(erode(&f, &se), naive_extremum(&f, &se, false));
            }
        }
    }

    #[test]
    fn ordering_and_extensivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let f = random_image(&mut rng, 32);
            let se = StructuringElement::disk(2);
            let eroded = erode(&f, &se);
            let dilated = dilate(&f, &se);
            let opened = open(&f, &se);
            let closed = close(&f, &se);
            for i in 0..f.levels().len() {
                assert!(eroded.levels()[i] <= f.levels()[i]);
                assert!(f.levels()[i] <= dilated.levels()[i]);
                assert!(opened.levels()[i] <= f.levels()[i]);
                assert!(f.levels()[i] <= closed.levels()[i]);
            }
        }
    }

    #[test]
    fn open_close_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let f = random_image(&mut rng, 32);
            let se = StructuringElement::disk(2);
            let opened = open(&f, &se);
            assert_eq!(open(&opened, &se), opened);
            let closed = close(&f, &se);
            assert_eq!(close(&closed, &se), closed);
        }
    }

    #[test]
    fn operators_are_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let f = random_image(&mut rng, 24);
            let g = GrayImage::from_raw(
                f.width(),
                f.height(),
                f.levels()
                    .iter()
                    .map(|&v| v.saturating_add(rng.gen_range(0..40)))
                    .collect(),
            );
            let se = StructuringElement::disk(2);
            for (op_f, op_g) in [
                (dilate(&f, &se), dilate(&g, &se)),
                (erode(&f, &se), erode(&g, &se)),
                (open(&f, &se), open(&g, &se)),
                (close(&f, &se), close(&g, &se)),
            ] {
                for i in 0..op_f.levels().len() {
                    assert!(op_f.levels()[i] <= op_g.levels()[i]);
                }
            }
        }
    }
}
