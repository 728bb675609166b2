//! Shared fixtures for the pipeline benchmarks.

use fovea_core::phantom::Phantom;
use fovea_core::{GrayImage, RgbImage};

/// Reference image at the working resolution of the timing budget.
pub fn full_size_image() -> RgbImage {
    Phantom::reference(700, 1050).render()
}

pub fn full_size_gray() -> GrayImage {
    fovea_core::imaging::to_grayscale(&full_size_image())
}
