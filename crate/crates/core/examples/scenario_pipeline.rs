//! Runs a bundled scenario end to end and prints its report.
//!
//! `cargo run --release --example scenario_pipeline [-- <name> <out_dir>]`
//!
//! Bundled names: fig1_point_scatterers, rect_dense, sar_plate_like, smoke.

use std::path::PathBuf;

use nfbp::scenario::{RunOptions, Scenario};
use nfbp::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "smoke".into());
    let out = args.next().map_or_else(|| std::env::temp_dir().join(format!("nfbp_{name}")), PathBuf::from);

    let scenario = Scenario::bundled(&name)?;
    scenario.validate()?;
    let report = scenario.run(&RunOptions {
        out_dir: Some(out.clone()),
        ..RunOptions::default()
    })?;
    print!("{}", report.to_toml()?);
    println!("# outputs in {}", out.display());
    Ok(())
}
