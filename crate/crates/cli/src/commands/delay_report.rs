//! `geotwin delay-report` — write the twin-vs-direct communication delay
//! comparison for a set of vehicle counts.

use std::path::PathBuf;

use serde::Serialize;

use geotwin_core::delay::{delay_report, PhysicalParams, REFERENCE_DELAY_TABLE};
use geotwin_core::DelayCoefficients;

use super::{emit_run_config, MetaBlock, DELAY_REPORT_CSV, DELAY_REPORT_JSON};
use crate::config::{require, FileConfig};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Directory for the report files and run records.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Comma-separated vehicle counts (defaults to the reference set).
    #[arg(long)]
    counts: Option<String>,
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
struct Resolved {
    command: &'static str,
    output: PathBuf,
    counts: Vec<usize>,
}

fn parse_counts(raw: &str) -> Result<Vec<usize>, CliError> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("--counts: {part:?} is not a vehicle count")))
        })
        .collect()
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let counts_raw = args.counts.clone().or(file.string_value("counts")?);
    let counts = match counts_raw {
        Some(raw) => parse_counts(&raw)?,
        None => REFERENCE_DELAY_TABLE.iter().map(|row| row.0).collect(),
    };
    let resolved = Resolved {
        command: "delay-report",
        output: require(args.output.clone().or(file.path_value("output")?), "output")?,
        counts,
    };
    emit_run_config(&resolved.output, &resolved)?;
    let meta = MetaBlock::new("delay-report");

    let coefficients = DelayCoefficients::reference();
    let params = PhysicalParams::default();
    let report = delay_report(&resolved.counts, &coefficients, &params)
        .map_err(|e| CliError::stage("delay-fit", e))?;

    report
        .save_csv(&resolved.output.join(DELAY_REPORT_CSV))
        .map_err(|e| CliError::stage("write-output", e))?;
    report
        .save_json(&resolved.output.join(DELAY_REPORT_JSON))
        .map_err(|e| CliError::stage("write-output", e))?;

    for row in &report.rows {
        println!(
            "n={}: without_twin={:.9}s with_twin={:.9}s improvement={:.2}%",
            row.n, row.no_dt_s, row.dt_s, row.improvement_pct
        );
    }
    meta.write(&resolved.output)
}
