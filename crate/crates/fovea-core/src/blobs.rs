//! Connected-component labeling, area and circularity measurement, and
//! final macula candidate selection.

use serde::{Deserialize, Serialize};

use crate::imaging::round_half_up;
use crate::segment::BinaryImage;

/// Default window on candidate areas, exclusive on both ends.
pub const DEFAULT_AREA_MIN: usize = 400;
pub const DEFAULT_AREA_MAX: usize = 5000;

/// Default circularity floor separating disk-like blobs from line and
/// rectangle shapes.
pub const DEFAULT_CIRCULARITY_MIN: f64 = 0.6;

/// Pixel adjacency for component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, String> {
        match value {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(value: Connectivity) -> u8 {
        match value {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

/// One connected foreground domain with its shape statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub label: u32,
    /// Pixel count; always equals `pixels.len()`.
    pub area: usize,
    pub pixels: Vec<(u32, u32)>,
    /// Mean of the member pixel centers.
    pub centroid: (f64, f64),
    /// Longest pairwise pixel-center distance.
    pub feret: f64,
    /// `4 area / (pi feret^2)`; 0 for single-pixel components.
    pub circularity: f64,
}

/// All components of a binary image, labeled 1.. in raster order of their
/// first pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    pub components: Vec<Component>,
    pub connectivity: Connectivity,
}

/// The selected macula component and its rounded centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaculaCandidate {
    pub component: Component,
    pub fovea: (u32, u32),
}

/// Labels foreground components under the chosen adjacency with a two-pass
/// union-find, relabeled so labels follow the raster order of each
/// component's first-encountered pixel.
pub fn label_components(bin: &BinaryImage, connectivity: Connectivity) -> ComponentSet {
    let w = bin.width() as usize;
    let h = bin.height() as usize;
    let flags = bin.flags();

    // Provisional labels, one per foreground pixel, merged via union-find.
    let mut parent: Vec<u32> = Vec::new();
    let mut provisional: Vec<u32> = vec![u32::MAX; w * h];

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }

    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if !flags[idx] {
                continue;
            }
            // Previously visited neighbors: W, NW, N, NE (N and W only for
            // 4-connectivity).
            let mut merged: Option<u32> = None;
            let mut consider = |px: i64, py: i64, parent: &mut Vec<u32>| {
                if px < 0 || py < 0 || px >= w as i64 || py >= h as i64 {
                    return;
                }
                let nidx = py as usize * w + px as usize;
                if !flags[nidx] {
                    return;
                }
                let root = find(parent, provisional[nidx]);
                merged = Some(match merged {
                    None => root,
                    Some(current) => {
                        let keep = current.min(root);
                        let drop = current.max(root);
                        parent[drop as usize] = keep;
                        keep
                    }
                });
            };
            let (xi, yi) = (x as i64, y as i64);
            consider(xi - 1, yi, &mut parent);
            consider(xi, yi - 1, &mut parent);
            if connectivity == Connectivity::Eight {
                consider(xi - 1, yi - 1, &mut parent);
                consider(xi + 1, yi - 1, &mut parent);
            }
            provisional[idx] = match merged {
                Some(root) => root,
                None => {
                    let fresh = parent.len() as u32;
                    parent.push(fresh);
                    fresh
                }
            };
        }
    }

    // Second pass: resolve roots and assign final labels in raster order.
    let mut final_label: Vec<u32> = vec![0; parent.len()];
    let mut pixel_lists: Vec<Vec<(u32, u32)>> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if !flags[idx] {
                continue;
            }
            let root = find(&mut parent, provisional[idx]);
            if final_label[root as usize] == 0 {
                pixel_lists.push(Vec::new());
                final_label[root as usize] = pixel_lists.len() as u32;
            }
            pixel_lists[final_label[root as usize] as usize - 1].push((x as u32, y as u32));
        }
    }

    let components = pixel_lists
        .into_iter()
        .enumerate()
        .map(|(i, pixels)| build_component(i as u32 + 1, pixels))
        .collect();
    ComponentSet {
        components,
        connectivity,
    }
}

fn build_component(label: u32, pixels: Vec<(u32, u32)>) -> Component {
    let area = pixels.len();
    let (sx, sy) = pixels
        .iter()
        .fold((0f64, 0f64), |(ax, ay), &(x, y)| {
            (ax + f64::from(x), ay + f64::from(y))
        });
    let centroid = (sx / area as f64, sy / area as f64);
    let feret = feret_diameter(&pixels);
    Component {
        label,
        area,
        centroid,
        circularity: circularity(area, feret),
        feret,
        pixels,
    }
}

/// Longest pairwise pixel-center distance, computed exactly: squared
/// distances stay in integers, and only convex-hull vertices are compared
/// (the maximum is always attained there). A single pixel yields 0.
pub fn feret_diameter(pixels: &[(u32, u32)]) -> f64 {
    assert!(!pixels.is_empty(), "component must hold at least one pixel");
    if pixels.len() == 1 {
        return 0.0;
    }
    let hull = convex_hull(pixels);
    let mut best = 0u64;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            let dx = hull[i].0 - hull[j].0;
            let dy = hull[i].1 - hull[j].1;
            best = best.max((dx * dx + dy * dy) as u64);
        }
    }
    (best as f64).sqrt()
}

/// Monotone-chain convex hull over integer points.
fn convex_hull(pixels: &[(u32, u32)]) -> Vec<(i64, i64)> {
    let mut points: Vec<(i64, i64)> = pixels
        .iter()
        .map(|&(x, y)| (i64::from(x), i64::from(y)))
        .collect();
    points.sort_unstable();
    points.dedup();
    if points.len() <= 2 {
        return points;
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| -> i64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &points {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in points.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Circularity `4 A / (pi P^2)`, defined as 0 when the Feret diameter is 0.
/// Rasterized shapes may slightly exceed 1; values are reported unclamped.
pub fn circularity(area: usize, feret: f64) -> f64 {
    if feret > 0.0 {
        4.0 * area as f64 / (std::f64::consts::PI * feret * feret)
    } else {
        0.0
    }
}

/// Applies the area window (exclusive bounds) and circularity floor, then
/// picks the largest surviving component; ties break toward higher
/// circularity, then the smaller label. Returns `None` when nothing
/// survives.
pub fn select_macula(
    set: &ComponentSet,
    area_min: usize,
    area_max: usize,
    circ_min: f64,
) -> Option<MaculaCandidate> {
    assert!(area_min < area_max, "area window must be nonempty");
    assert!((0.0..=1.0).contains(&circ_min), "circularity floor in [0,1]");
    let mut best: Option<&Component> = None;
    for component in &set.components {
        if !(component.area > area_min && component.area < area_max) {
            continue;
        }
        if component.circularity < circ_min {
            continue;
        }
        let better = match best {
            None => true,
            Some(current) => {
                component.area > current.area
                    || (component.area == current.area
                        && (component.circularity > current.circularity
                            || (component.circularity == current.circularity
                                && component.label < current.label)))
            }
        };
        if better {
            best = Some(component);
        }
    }
    best.map(|component| MaculaCandidate {
        fovea: (
            round_half_up(component.centroid.0) as u32,
            round_half_up(component.centroid.1) as u32,
        ),
        component: component.clone(),
    })
}
