//! `geotwin train` — fit the standardizer plus the chosen predictors and
//! score them on the held-out split.

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use geotwin_core::data::split_dataset;
use geotwin_core::metrics::evaluate;
use geotwin_core::mlp::{train_mlp, MlpConfig};
use geotwin_core::svr::train_dual_svr;
use geotwin_core::{Dataset, Matrix, MetricsReport, Standardizer, SvrHyperparams};

use super::{
    emit_run_config, load_input_csv, MetaBlock, ModelChoice, DNN_HISTORY_CSV, DNN_JSON,
    STANDARDIZER_JSON, SVR_LAT_JSON, SVR_LON_JSON,
};
use crate::config::{require, FileConfig};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Trajectory CSV to train on.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory for models, metrics, and run records.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Which predictor(s) to fit.
    #[arg(long, value_enum)]
    model: Option<ModelChoice>,
    /// Seed driving the split, the subsample, and weight initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of records used for training (rest is held out).
    #[arg(long)]
    ratio: Option<f64>,
    /// SVR box constraint.
    #[arg(long)]
    c: Option<f64>,
    /// SVR tube half-width, in standardized target units.
    #[arg(long)]
    epsilon: Option<f64>,
    /// RBF kernel width, in standardized feature units.
    #[arg(long)]
    sigma: Option<f64>,
    /// DNN training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// DNN mini-batch size.
    #[arg(long)]
    batch: Option<usize>,
    /// DNN learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Cap on SVR training rows (0 = use the full training split).
    #[arg(long)]
    svr_subsample: Option<usize>,
    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
struct Resolved {
    command: &'static str,
    input: PathBuf,
    output: PathBuf,
    model: ModelChoice,
    seed: u64,
    ratio: f64,
    c: f64,
    epsilon: f64,
    sigma: f64,
    epochs: usize,
    batch: usize,
    lr: f64,
    svr_subsample: usize,
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
    Ok(Resolved {
        command: "train",
        input: require(args.input.clone().or(file.path_value("input")?), "input")?,
        output: require(args.output.clone().or(file.path_value("output")?), "output")?,
        model,
        seed: args.seed.or(file.u64_value("seed")?).unwrap_or(42),
        ratio: args.ratio.or(file.f64_value("ratio")?).unwrap_or(0.8),
        c: args.c.or(file.f64_value("c")?).unwrap_or(10.0),
        epsilon: args.epsilon.or(file.f64_value("epsilon")?).unwrap_or(0.01),
        sigma: args.sigma.or(file.f64_value("sigma")?).unwrap_or(2.5),
        epochs: args.epochs.or(file.usize_value("epochs")?).unwrap_or(200),
        batch: args.batch.or(file.usize_value("batch")?).unwrap_or(32),
        lr: args.lr.or(file.f64_value("lr")?).unwrap_or(0.02),
        svr_subsample: args
            .svr_subsample
            .or(file.usize_value("svr-subsample")?)
            .unwrap_or(2000),
    })
}

/// Seeded subsample of row indices, returned in ascending order so the
/// selected rows keep their temporal ordering.
fn subsample_rows(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if cap == 0 || cap >= n {
        return (0..n).collect();
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x53_55_42_53_41_4d_50); // distinct stream from the split
    indices.shuffle(&mut rng);
    indices.truncate(cap);
    indices.sort_unstable();
    indices
}

fn gather(m: &Matrix, rows: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), m.cols());
    for (i, &r) in rows.iter().enumerate() {
        for j in 0..m.cols() {
            out.set(i, j, m.get(r, j));
        }
    }
    out
}

/// Converts standardized predictions to degrees and scores them against the
/// held-out targets.
fn score_degrees(
    standardizer: &Standardizer,
    holdout: &Dataset,
    predicted_std: &Matrix,
) -> Result<MetricsReport, CliError> {
    let mut predicted = Matrix::zeros(predicted_std.rows(), 2);
    for i in 0..predicted_std.rows() {
        let row = standardizer
            .inverse_transform_targets(predicted_std.row(i))
            .map_err(|e| CliError::stage("standardize", e))?;
        predicted.set(i, 0, row[0]);
        predicted.set(i, 1, row[1]);
    }
    evaluate(holdout.target_matrix::<f64>(), predicted).map_err(|e| CliError::stage("evaluate", e))
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
        "{name} validation: mae={} mse={} r2={} n={}",
        report.mae, report.mse, report.r_squared, report.n
    );
    Ok(())
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let resolved = resolve(args)?;
    emit_run_config(&resolved.output, &resolved)?;
    let mut meta = MetaBlock::new("train");

    let data = load_input_csv(&resolved.input)?;
    let split = split_dataset(&data, resolved.ratio, resolved.seed)
        .map_err(|e| CliError::stage("split", e))?;
    let standardizer =
        Standardizer::fit(&split.train).map_err(|e| CliError::stage("standardize", e))?;
    standardizer
        .save_json(&resolved.output.join(STANDARDIZER_JSON))
        .map_err(|e| CliError::stage("write-output", e))?;

    let (train_x, train_y) = standardizer
        .transform(&split.train)
        .map_err(|e| CliError::stage("standardize", e))?;
    let (val_x, _) = standardizer
        .transform(&split.validation)
        .map_err(|e| CliError::stage("standardize", e))?;

    if resolved.model.wants_svr() {
        let rows = subsample_rows(train_x.rows(), resolved.svr_subsample, resolved.seed);
        let sub_x = gather(&train_x, &rows);
        let sub_y = gather(&train_y, &rows);
        let hp = SvrHyperparams {
            c: resolved.c,
            epsilon: resolved.epsilon,
            sigma: resolved.sigma,
            tol: 1e-3,
            ..SvrHyperparams::defaults_for(rows.len())
        };
        let t0 = Instant::now();
        let pair =
            train_dual_svr(&sub_x, &sub_y, &hp).map_err(|e| CliError::stage("train-svr", e))?;
        meta.record_f64("svr_train_seconds", t0.elapsed().as_secs_f64());
        pair.lat_model
            .save_json(&resolved.output.join(SVR_LAT_JSON))
            .map_err(|e| CliError::stage("write-output", e))?;
        pair.lon_model
            .save_json(&resolved.output.join(SVR_LON_JSON))
            .map_err(|e| CliError::stage("write-output", e))?;

        let mut predicted_std = Matrix::zeros(val_x.rows(), 2);
        for i in 0..val_x.rows() {
            let (lat, lon) = pair
                .predict(val_x.row(i))
                .map_err(|e| CliError::stage("predict-svr", e))?;
            predicted_std.set(i, 0, lat);
            predicted_std.set(i, 1, lon);
        }
        let report = score_degrees(&standardizer, &split.validation, &predicted_std)?;
        write_metrics(&resolved.output, "svr", &report)?;
    }

    if resolved.model.wants_dnn() {
        let config = MlpConfig {
            epochs: resolved.epochs,
            batch_size: resolved.batch,
            learning_rate: resolved.lr,
            momentum: 0.9,
            validation_fraction: 0.1,
            seed: resolved.seed,
            ..MlpConfig::default()
        };
        let t0 = Instant::now();
        let (model, history) =
            train_mlp(&train_x, &train_y, &config).map_err(|e| CliError::stage("train-dnn", e))?;
        meta.record_f64("dnn_train_seconds", t0.elapsed().as_secs_f64());
        model
            .save_json(&resolved.output.join(DNN_JSON))
            .map_err(|e| CliError::stage("write-output", e))?;
        history
            .save_csv(&resolved.output.join(DNN_HISTORY_CSV))
            .map_err(|e| CliError::stage("write-output", e))?;

        let predicted_std = model
            .forward_batch(&val_x)
            .map_err(|e| CliError::stage("predict-dnn", e))?;
        let report = score_degrees(&standardizer, &split.validation, &predicted_std)?;
        write_metrics(&resolved.output, "dnn", &report)?;
    }

    meta.write(&resolved.output)
}
