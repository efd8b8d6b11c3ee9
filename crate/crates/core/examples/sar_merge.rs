//! Two captures of a small rectangular array, shifted against each other,
//! merged into one dataset and imaged together.
//!
//! `cargo run --release --example sar_merge`

use nfbp::forward::{merge, synthesize};
use nfbp::geometry::{rect_layout, shift_layout};
use nfbp::metrics::entropy;
use nfbp::reconstruct::Engine;
use nfbp::{FocusingOperatorKind, ImageGrid, Pairing, PointScatterer, Position3, Result, Scene};

fn main() -> Result<()> {
    let freqs: Vec<f64> = (0..16).map(|i| 71e9 + i as f64 * 10e9 / 15.0).collect();
    let scene = Scene::new(vec![
        PointScatterer::unit(Position3::new(0.0, 0.0, 0.0)),
        PointScatterer::unit(Position3::new(0.04, 0.01, 0.0)),
    ]);
    let base = rect_layout(8, 8, 0.06, 0.06, 0.12)?;
    let shifted = shift_layout(&base, Position3::new(0.04, 0.0, 0.0))?;

    let a = synthesize(&scene, &base, &freqs)?;
    let b = synthesize(&scene, &shifted, &freqs)?;
    let both = merge(&a, &b)?;
    if let Pairing::Pairs(p) = &both.pairing {
        println!("merged: {} Tx, {} Rx, {} pairs per frequency", both.n_tx(), both.n_rx(), p.len());
    }

    let grid = ImageGrid::centered(Position3::new(0.02, 0.0, 0.0), [1e-3, 1e-3, 1e-3], [81, 41, 1])?;
    let engine = Engine::default();
    for (label, ms) in [("first capture", &a), ("second capture", &b), ("merged", &both)] {
        let v = engine.backproject_multi_freq(ms, &grid, FocusingOperatorKind::F1)?;
        let at = |p: Position3| {
            let [x, y, z] = grid.nearest(&p).expect("on grid");
            v.get(x, y, z).norm()
        };
        println!(
            "{label:>14}: |s| at scatterers {:.3} / {:.3}, entropy {:.3}",
            at(scene.scatterers[0].position),
            at(scene.scatterers[1].position),
            entropy(&v)?
        );
    }
    Ok(())
}
