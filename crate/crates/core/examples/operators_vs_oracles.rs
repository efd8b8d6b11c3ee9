//! Closed-form focusing operators next to their two numerical oracles.
//!
//! `cargo run --release --example operators_vs_oracles`

use nfbp::focusing::oracle::{fd_oracle, spectral_oracle_all};
use nfbp::focusing::{evaluate, FilterOrder};
use nfbp::{Displacement, FocusingOperatorKind, Result, WaveNumber};

fn main() -> Result<()> {
    let k = WaveNumber::from_frequency(60e9)?;
    let cases = [
        Displacement::new(0.0, 0.0, -0.05),
        Displacement::new(0.03, -0.01, -0.02),
        Displacement::new(0.1, 0.05, -0.01),
    ];
    let kinds = [FocusingOperatorKind::F0, FocusingOperatorKind::F1, FocusingOperatorKind::F2];

    println!("k = {:.3} rad/m, lambda = {:.3} mm", k.value(), 1e3 * k.wavelength());
    println!("{:>26} {:>4} {:>24} {:>10} {:>10}", "R (m)", "op", "closed form", "fd err", "spec err");
    for d in cases {
        let spectral = spectral_oracle_all(d, k, FilterOrder::new(2)?)?;
        for (n, kind) in kinds.into_iter().enumerate() {
            let f = evaluate(kind, d, k)?;
            let fd = fd_oracle(d, k, kind.filter_order().expect("F operators have an order"))?;
            let rel = |x: nfbp::C64| (x - f).norm() / f.norm();
            println!(
                "({:>6.3},{:>6.3},{:>6.3}) {:>4} {:>11.4e}{:+.4e}j {:>10.2e} {:>10.2e}",
                d.rx,
                d.ry,
                d.rz,
                kind.name(),
                f.re,
                f.im,
                rel(fd),
                rel(spectral[n])
            );
        }
    }

    // Directivity: |F1| falls off with the angle from broadside.
    println!("\nangle  |F1|/|F1(0)|");
    let f_broadside = evaluate(FocusingOperatorKind::F1, Displacement::new(0.0, 0.0, -0.05), k)?.norm();
    for deg in [0.0f64, 15.0, 30.0, 45.0, 60.0, 75.0] {
        let t = deg.to_radians();
        let d = Displacement::new(0.05 * t.sin(), 0.0, -0.05 * t.cos());
        let f = evaluate(FocusingOperatorKind::F1, d, k)?.norm();
        println!("{deg:>5.0}  {:.4}", f / f_broadside);
    }
    Ok(())
}
