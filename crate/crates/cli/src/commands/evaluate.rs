//! `geotwin evaluate` — score saved models against a trajectory CSV, in
//! degrees or in standardized target units.

use std::path::PathBuf;

use serde::Serialize;

use geotwin_core::metrics::evaluate;
use geotwin_core::{Dataset, Matrix, MetricsReport, Standardizer};

use super::{
    emit_run_config, load_input_csv, load_models, MetaBlock, ModelChoice, Predictor, SpaceChoice,
};
use crate::config::{require, FileConfig};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Trajectory CSV to score against.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory holding standardizer.json and the model files.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Directory for metrics and run records.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Which predictor(s) to score.
    #[arg(long, value_enum)]
    model: Option<ModelChoice>,
    /// Coordinate space the metrics are computed in.
    #[arg(long, value_enum)]
    space: Option<SpaceChoice>,
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
struct Resolved {
    command: &'static str,
    input: PathBuf,
    models: PathBuf,
    output: PathBuf,
    model: ModelChoice,
    space: SpaceChoice,
}

fn resolve(args: &Args) -> Result<Resolved, CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let model = match args.model {
        Some(m) => m,
        None => file
            .string_value("model")?
            .map(|s| ModelChoice::from_config(&s))
            .transpose()?
            .unwrap_or(ModelChoice::Both),
    };
    let space = match args.space {
        Some(s) => s,
        None => file
            .string_value("space")?
            .map(|s| SpaceChoice::from_config(&s))
            .transpose()?
            .unwrap_or(SpaceChoice::Degrees),
    };
    Ok(Resolved {
        command: "evaluate",
        input: require(args.input.clone().or(file.path_value("input")?), "input")?,
        models: require(args.models.clone().or(file.path_value("models")?), "models")?,
        output: require(args.output.clone().or(file.path_value("output")?), "output")?,
        model,
        space,
    })
}

/// Actual/predicted matrices in the requested space for one predictor.
fn score(
    data: &Dataset,
    standardizer: &Standardizer,
    predictor: &Predictor,
    space: SpaceChoice,
) -> Result<MetricsReport, CliError> {
    let n = data.records.len();
    let mut actual = Matrix::zeros(n, 2);
    let mut predicted = Matrix::zeros(n, 2);
    match space {
        SpaceChoice::Degrees => {
            let degrees = super::predict_degrees(data, standardizer, predictor)?;
            for (i, record) in data.records.iter().enumerate() {
                actual.set(i, 0, record.next_lat);
                actual.set(i, 1, record.next_lon);
                predicted.set(i, 0, degrees[i].0);
                predicted.set(i, 1, degrees[i].1);
            }
        }
        SpaceChoice::Standardized => {
            let (features, targets) = standardizer
                .transform(data)
                .map_err(|e| CliError::stage("standardize", e))?;
            for i in 0..n {
                actual.set(i, 0, targets.get(i, 0));
                actual.set(i, 1, targets.get(i, 1));
                let (lat, lon) = match predictor {
                    Predictor::Svr(pair) => pair
                        .predict(features.row(i))
                        .map_err(|e| CliError::stage("predict-svr", e))?,
                    Predictor::Dnn(model) => {
                        let out = model
                            .predict(features.row(i))
                            .map_err(|e| CliError::stage("predict-dnn", e))?;
                        (out[0], out[1])
                    }
                };
                predicted.set(i, 0, lat);
                predicted.set(i, 1, lon);
            }
        }
    }
    evaluate(actual, predicted).map_err(|e| CliError::stage("evaluate", e))
}

fn write_metrics(
    output: &std::path::Path,
    name: &str,
    report: &MetricsReport,
) -> Result<(), CliError> {
    report
        .save_json(&output.join(format!("metrics_{name}.json")))
        .map_err(|e| CliError::stage("write-output", e))?;
    report
        .save_csv(&output.join(format!("metrics_{name}.csv")))
        .map_err(|e| CliError::stage("write-output", e))?;
    println!(
        "{name}: mae={} mse={} r2={} n={}",
        report.mae, report.mse, report.r_squared, report.n
    );
    Ok(())
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let resolved = resolve(args)?;
    emit_run_config(&resolved.output, &resolved)?;
    let meta = MetaBlock::new("evaluate");

    let data = load_input_csv(&resolved.input)?;
    let models = load_models(&resolved.models, resolved.model)?;

    if let Some(pair) = &models.svr {
        let report = score(
            &data,
            &models.standardizer,
            &Predictor::Svr(pair),
            resolved.space,
        )?;
        write_metrics(&resolved.output, "svr", &report)?;
    }
    if let Some(model) = &models.dnn {
        let report = score(
            &data,
            &models.standardizer,
            &Predictor::Dnn(model),
            resolved.space,
        )?;
        write_metrics(&resolved.output, "dnn", &report)?;
    }

    meta.write(&resolved.output)
}
