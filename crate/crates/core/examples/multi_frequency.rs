//! Coherent superposition over a frequency sweep: one frequency focuses in
//! cross-range only, a 10 GHz sweep also focuses in range.
//!
//! `cargo run --release --example multi_frequency`

use nfbp::forward::synthesize;
use nfbp::geometry::rect_layout;
use nfbp::metrics::mip;
use nfbp::reconstruct::Engine;
use nfbp::{FocusingOperatorKind, ImageGrid, PointScatterer, Position3, ProjectionAxis, Result, Scene};

/// Width of the range profile above half its peak, in samples.
fn half_max_width(profile: &[f64]) -> usize {
    let peak = profile.iter().copied().fold(0.0, f64::max);
    profile.iter().filter(|v| **v >= 0.5 * peak).count()
}

fn main() -> Result<()> {
    let layout = rect_layout(12, 12, 0.1, 0.1, 0.1)?;
    let scene = Scene::new(vec![PointScatterer::unit(Position3::new(0.0, 0.0, 0.0))]);
    let grid = ImageGrid::centered(Position3::new(0.0, 0.0, 0.0), [1e-3, 1e-3, 2e-3], [1, 21, 61])?;
    let engine = Engine::default();

    for count in [1usize, 4, 16, 64] {
        let freqs: Vec<f64> = if count == 1 {
            vec![76e9]
        } else {
            (0..count).map(|i| 71e9 + i as f64 * 10e9 / (count - 1) as f64).collect()
        };
        let ms = synthesize(&scene, &layout, &freqs)?;
        let v = engine.backproject_multi_freq(&ms, &grid, FocusingOperatorKind::F1)?;
        // rows of the x projection run along z
        let p = mip(&v, ProjectionAxis::X);
        let profile: Vec<f64> = (0..p.rows).map(|r| p.get(r, p.cols / 2)).collect();
        println!(
            "{count:>3} frequencies: range half-max width {:>3} mm",
            2 * half_max_width(&profile)
        );
    }
    Ok(())
}
