//! Writes a synthetic dataset as CSV and as `NFBP` binary, reads both back
//! and images them.
//!
//! `cargo run --release --example dataset_io [-- <out_dir>]`

use std::path::PathBuf;

use nfbp::forward::{add_noise, synthesize};
use nfbp::geometry::spiral_layout;
use nfbp::io::{self, DatasetFormat};
use nfbp::reconstruct::Engine;
use nfbp::{FocusingOperatorKind, ImageGrid, Position3, Result, Scene};

fn main() -> Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("nfbp_dataset_io"), PathBuf::from);
    std::fs::create_dir_all(&out)?;

    let layout = spiral_layout(24, 0.1, 0.1)?;
    let ms = synthesize(&Scene::two_rings(0.0), &layout, &[39e9, 40e9, 41e9])?;
    let ms = add_noise(&ms, 20.0, 42)?;

    let csv = out.join("capture.csv");
    let bin = out.join("capture.nfbp");
    io::save_measurements(&csv, &ms, DatasetFormat::Csv)?;
    io::save_measurements(&bin, &ms, DatasetFormat::Bin)?;
    io::save_layout(&out.join("layout.csv"), &ms.layout)?;
    for p in [&csv, &bin] {
        println!("{:>40}: {} bytes", p.display(), std::fs::metadata(p)?.len());
    }

    let from_bin = io::load_measurements(&bin)?;
    let from_csv = io::load_measurements(&csv)?;
    println!("binary round trip exact: {}", from_bin == ms);
    println!("csv samples exact: {} (weights reset to 1)", from_csv.samples == ms.samples);

    // Equal-area spiral weights are uniform, so unit weights give the same
    // normalized image.
    let grid = ImageGrid::centered(Position3::new(0.0, 0.0, 0.0), [2e-3; 3], [61, 61, 1])?;
    let engine = Engine::default();
    let a = engine.backproject_multi_freq(&from_bin, &grid, FocusingOperatorKind::F1)?;
    let b = engine.backproject_multi_freq(&from_csv, &grid, FocusingOperatorKind::F1)?;
    let worst = a.voxels.iter().zip(&b.voxels).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    println!("largest voxel difference between the two images: {worst:.2e}");

    io::save_volume(&out.join("volume.nfim"), &a)?;
    let back = io::load_volume(&out.join("volume.nfim"))?;
    println!("volume dump round trip exact: {}", back.voxels == a.voxels);
    Ok(())
}
