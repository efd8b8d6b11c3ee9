use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nfbp::io::{self, DatasetFormat};
use nfbp::metrics::{artifact_level, entropy, mip, target_mask, ProjectionAxis};
use nfbp::reconstruct::Engine;
use nfbp::scenario::{RunOptions, Scenario};
use nfbp::{FocusingOperatorKind, Result};

/// Near-field multi-static back-projection toolkit.
#[derive(Parser)]
#[command(name = "nfbp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the scenario's dataset and array layout.
    Synth {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "bin", value_parser = parse_format)]
        format: DatasetFormat,
    },
    /// Reconstruct normalized volumes on the scenario grid.
    Reconstruct {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Dataset to image instead of synthesizing one.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Maximum intensity projections of a volume dump.
    Project {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Axes to collapse; all three when omitted.
        #[arg(long)]
        axis: Vec<ProjectionAxis>,
    },
    /// Entropy and, with a scenario, artifact level of a volume dump.
    Metrics {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Full pipeline: data, volumes, projections, differences, report.
    Run {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Check a scenario and list every problem.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArg,
    },
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
}

#[derive(Args)]
struct EngineArgs {
    /// Worker threads, 0 = all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Operator to use; repeat for several. Defaults to the scenario's list.
    #[arg(long = "operator")]
    operators: Vec<FocusingOperatorKind>,
}

fn parse_format(s: &str) -> std::result::Result<DatasetFormat, String> {
    s.parse().map_err(|e: nfbp::Error| e.to_string())
}

/// Loads a scenario file, falling back to the bundled set. Returns the
/// directory relative dataset paths resolve against.
fn load_scenario(arg: &str) -> Result<(Scenario, PathBuf)> {
    let path = Path::new(arg);
    if path.exists() || nfbp::scenario::bundled_source(arg).is_none() {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Scenario::load(path)?, base))
    } else {
        Ok((Scenario::bundled(arg)?, PathBuf::new()))
    }
}

fn operators(s: &Scenario, cli: &[FocusingOperatorKind]) -> Result<Vec<FocusingOperatorKind>> {
    if cli.is_empty() {
        s.operator_kinds()
    } else {
        Ok(cli.to_vec())
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { scenario, out, format } => {
            let (s, _) = load_scenario(&scenario.scenario)?;
            s.validate()?;
            let ms = s.synthesize()?;
            std::fs::create_dir_all(&out)?;
            let data = out.join(format!("dataset.{}", format.extension()));
            io::save_measurements(&data, &ms, format)?;
            io::save_layout(&out.join("layout.csv"), &ms.layout)?;
            println!("{}", data.display());
        }
        Command::Reconstruct {
            scenario,
            dataset,
            out,
            engine,
        } => {
            let (mut s, base) = load_scenario(&scenario.scenario)?;
            if let Some(d) = dataset {
                s.scene.dataset = Some(std::fs::canonicalize(&d).unwrap_or(d));
            }
            let kinds = operators(&s, &engine.operators)?;
            let prepared = s.prepare(&base)?;
            let e = Engine::new(engine.workers);
            for kind in kinds {
                let v = e.backproject_multi_freq(&prepared.measurements, &prepared.grid, kind)?;
                let dir = out.join(kind.name());
                std::fs::create_dir_all(&dir)?;
                let path = dir.join("volume.nfim");
                io::save_volume(&path, &v)?;
                println!("{}", path.display());
            }
        }
        Command::Project { volume, out, axis } => {
            let v = io::load_volume(&volume)?;
            std::fs::create_dir_all(&out)?;
            let axes = if axis.is_empty() { ProjectionAxis::ALL.to_vec() } else { axis };
            for a in axes {
                io::save_image(&out, &format!("mip_{a}"), &mip(&v, a))?;
            }
        }
        Command::Metrics { volume, scenario } => {
            let v = io::load_volume(&volume)?;
            println!("entropy = {}", entropy(&v)?);
            if let Some(arg) = scenario {
                let (s, base) = load_scenario(&arg)?;
                let prepared = s.prepare(&base)?;
                let mask = target_mask(&v.grid, &prepared.truth, prepared.mask_radius);
                println!("artifact_level_db = {}", artifact_level(&v, &mask)?);
                println!("mask_radius_m = {}", prepared.mask_radius);
            }
        }
        Command::Run { scenario, out, engine } => {
            let (s, base) = load_scenario(&scenario.scenario)?;
            let opts = RunOptions {
                base_dir: base,
                out_dir: out,
                workers: engine.workers,
                operators: (!engine.operators.is_empty()).then_some(engine.operators),
            };
            print!("{}", s.run(&opts)?.to_toml()?);
        }
        Command::Validate { scenario } => {
            let (s, _) = load_scenario(&scenario.scenario)?;
            s.validate()?;
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
