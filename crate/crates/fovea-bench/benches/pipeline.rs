//! Per-stage and end-to-end timings on a 700x1050 image.
//!
//! Run with `cargo bench -p fovea-bench`.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use fovea_bench::{full_size_gray, full_size_image};
use fovea_core::morphology::{self, StructuringElement};
use fovea_core::pipeline::{detect, PipelineConfig};
use fovea_core::{enhance, imaging, segment};

fn bench_stages(c: &mut Criterion) {
    let img = full_size_image();
    let gray = full_size_gray();
    let disk15 = StructuringElement::disk(15);
    let mask = imaging::estimate_fov_mask(&gray, 10).unwrap();
    let enhanced = morphology::enhance_contrast(&gray, &disk15);
    let equalized = enhance::equalize_adaptive(&enhanced, 8, 2.0).unwrap();
    let denoised = enhance::denoise(&equalized, 5);
    let hist = enhance::build_histogram(&denoised, Some(&mask)).unwrap();
    let report = segment::otsu(&hist);

    let mut group = c.benchmark_group("stages_700x1050");
    group.sample_size(10);
    group.bench_function("grayscale", |b| b.iter(|| imaging::to_grayscale(black_box(&img))));
    group.bench_function("fov_mask", |b| {
        b.iter(|| imaging::estimate_fov_mask(black_box(&gray), 10).unwrap())
    });
    group.bench_function("dilate_disk15", |b| {
        b.iter(|| morphology::dilate(black_box(&gray), &disk15))
    });
    group.bench_function("enhance_disk15", |b| {
        b.iter(|| morphology::enhance_contrast(black_box(&gray), &disk15))
    });
    group.bench_function("equalize_tiled_8x8", |b| {
        b.iter(|| enhance::equalize_adaptive(black_box(&enhanced), 8, 2.0).unwrap())
    });
    group.bench_function("denoise_disk5", |b| {
        b.iter(|| enhance::denoise(black_box(&equalized), 5))
    });
    group.bench_function("otsu_sweep", |b| b.iter(|| segment::otsu(black_box(&hist))));
    group.bench_function("binarize_label_select", |b| {
        b.iter(|| {
            let binary = segment::binarize_dark(&denoised, &report, 0.2, Some(&mask));
            let set = fovea_core::blobs::label_components(&binary, fovea_core::Connectivity::Eight);
            fovea_core::blobs::select_macula(&set, 400, 5000, 0.6)
        })
    });
    group.finish();
}

fn bench_detect(c: &mut Criterion) {
    let img = full_size_image();
    let cfg = PipelineConfig::default();
    let mut group = c.benchmark_group("detect_700x1050");
    group.sample_size(10);
    group.bench_function("full_pipeline", |b| {
        b.iter(|| detect(black_box(&img), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_stages, bench_detect);
criterion_main!(benches);
