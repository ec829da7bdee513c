//! `geotwin gen-data` — write a synthetic trajectory CSV.

use std::path::PathBuf;

use serde::Serialize;

use geotwin_core::data::{generate_synthetic_trajectories, write_trajectory_csv};

use super::{emit_run_config, MetaBlock, TRAJECTORIES_CSV};
use crate::config::{require, FileConfig};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Directory the CSV and run records are written to.
    #[arg(long)]
    output: Option<PathBuf>,
    /// RNG seed for the trajectories.
    #[arg(long)]
    seed: Option<u64>,
    /// How many vehicles to simulate.
    #[arg(long)]
    vehicles: Option<usize>,
    /// Samples per vehicle.
    #[arg(long)]
    samples: Option<usize>,
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
struct Resolved {
    command: &'static str,
    output: PathBuf,
    seed: u64,
    vehicles: usize,
    samples: usize,
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let resolved = Resolved {
        command: "gen-data",
        output: require(args.output.clone().or(file.path_value("output")?), "output")?,
        seed: args.seed.or(file.u64_value("seed")?).unwrap_or(42),
        vehicles: args.vehicles.or(file.usize_value("vehicles")?).unwrap_or(5),
        samples: args
            .samples
            .or(file.usize_value("samples")?)
            .unwrap_or(1000),
    };
    emit_run_config(&resolved.output, &resolved)?;
    let meta = MetaBlock::new("gen-data");

    let data = generate_synthetic_trajectories(resolved.vehicles, resolved.samples, resolved.seed)
        .map_err(|e| CliError::stage("generate", e))?;
    let path = resolved.output.join(TRAJECTORIES_CSV);
    write_trajectory_csv(&data, &path).map_err(|e| CliError::stage("write-output", e))?;
    println!("wrote {} records to {}", data.records.len(), path.display());

    meta.write(&resolved.output)
}
