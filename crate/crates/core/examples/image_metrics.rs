//! Projections, difference images, entropy and artifact level on a small
//! three-dimensional reconstruction.
//!
//! `cargo run --release --example image_metrics`

use nfbp::forward::synthesize;
use nfbp::geometry::spiral_layout;
use nfbp::geometry::SPEED_OF_LIGHT;
use nfbp::metrics::{artifact_level, diff_image, entropy, mip, resolution_cell, target_mask};
use nfbp::reconstruct::Engine;
use nfbp::{FocusingOperatorKind, ImageGrid, Position3, ProjectionAxis, Result, Scene};

fn main() -> Result<()> {
    let layout = spiral_layout(60, 0.08, 0.08)?;
    let scene = Scene::ring(Position3::new(0.0, 0.0, 0.0), 0.02, 5, 0.0);
    let freqs: Vec<f64> = (0..8).map(|i| 36e9 + i as f64 * 1e9).collect();
    let ms = synthesize(&scene, &layout, &freqs)?;
    let grid = ImageGrid::centered(Position3::new(0.0, 0.0, 0.0), [1e-3, 1e-3, 2e-3], [61, 61, 9])?;
    let truth: Vec<Position3> = scene.scatterers.iter().map(|s| s.position).collect();
    // one resolution cell at the center frequency, aperture radius and range 0.08 m
    let cell = resolution_cell(SPEED_OF_LIGHT / 39.5e9, 0.08, 0.08);
    let mask = target_mask(&grid, &truth, cell);
    let engine = Engine::default();

    let mut z_mips = Vec::new();
    for kind in FocusingOperatorKind::ALL {
        let v = engine.backproject_multi_freq(&ms, &grid, kind)?;
        let maxima: Vec<f64> = ProjectionAxis::ALL.iter().map(|a| mip(&v, *a).max()).collect();
        println!(
            "{kind:>9}: entropy {:.4} nats, artifact level {:6.2} dB, projection maxima {maxima:?}",
            entropy(&v)?,
            artifact_level(&v, &mask)?
        );
        z_mips.push(mip(&v, ProjectionAxis::Z));
    }
    for (i, kind) in FocusingOperatorKind::ALL.iter().enumerate().skip(1) {
        let d = diff_image(&z_mips[i], &z_mips[0])?;
        println!(
            "|{kind}| - |PhaseOnly|: min {:+.3}, max {:+.3}",
            d.min(),
            d.max()
        );
    }
    Ok(())
}
