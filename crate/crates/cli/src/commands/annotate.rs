//! `geotwin annotate` — add per-model predicted next coordinates to a
//! trajectory CSV so it can be replayed or inspected downstream.

use std::path::PathBuf;

use serde::Serialize;

use geotwin_core::data::{write_annotated_csv, AnnotatedRecord};

use super::{
    emit_run_config, load_input_csv, load_models, MetaBlock, ModelChoice, Predictor, ANNOTATED_CSV,
};
use crate::config::{require, FileConfig};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Trajectory CSV to annotate.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory holding standardizer.json and the model files.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Directory for the annotated CSV and run records.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Which predictor(s) to annotate with.
    #[arg(long, value_enum)]
    model: Option<ModelChoice>,
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
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let model = match args.model {
        Some(m) => m,
        None => file
            .string_value("model")?
            .map(|s| ModelChoice::from_config(&s))
            .transpose()?
            .unwrap_or(ModelChoice::Both),
    };
    let resolved = Resolved {
        command: "annotate",
        input: require(args.input.clone().or(file.path_value("input")?), "input")?,
        models: require(args.models.clone().or(file.path_value("models")?), "models")?,
        output: require(args.output.clone().or(file.path_value("output")?), "output")?,
        model,
    };
    emit_run_config(&resolved.output, &resolved)?;
    let meta = MetaBlock::new("annotate");

    let data = load_input_csv(&resolved.input)?;
    let models = load_models(&resolved.models, resolved.model)?;

    let pred_svr = match &models.svr {
        Some(pair) => Some(super::predict_degrees(
            &data,
            &models.standardizer,
            &Predictor::Svr(pair),
        )?),
        None => None,
    };
    let pred_dnn = match &models.dnn {
        Some(model) => Some(super::predict_degrees(
            &data,
            &models.standardizer,
            &Predictor::Dnn(model),
        )?),
        None => None,
    };

    let annotated: Vec<AnnotatedRecord> = data
        .records
        .iter()
        .enumerate()
        .map(|(i, record)| AnnotatedRecord {
            record: record.clone(),
            pred_svr: pred_svr.as_ref().map(|p| p[i]),
            pred_dnn: pred_dnn.as_ref().map(|p| p[i]),
        })
        .collect();

    let path = resolved.output.join(ANNOTATED_CSV);
    write_annotated_csv(&annotated, &path).map_err(|e| CliError::stage("write-output", e))?;
    println!(
        "annotated {} records into {}",
        annotated.len(),
        path.display()
    );

    meta.write(&resolved.output)
}
