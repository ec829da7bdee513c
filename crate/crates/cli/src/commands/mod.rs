//! The six subcommands plus plumbing they share: output-directory setup,
//! resolved-config echo, the wall-clock meta block, and the
//! standardize-predict-invert path used by train, evaluate, and annotate.

pub mod annotate;
pub mod delay_report;
pub mod evaluate;
pub mod gen_data;
pub mod replay;
pub mod train;

use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use geotwin_core::data::parse_trajectory_csv;
use geotwin_core::{Dataset, MlpModel, Standardizer, SvrModel, SvrPair};

use crate::CliError;

pub const RUN_CONFIG_JSON: &str = "run_config.json";
pub const RUN_META_JSON: &str = "run_meta.json";
pub const TRAJECTORIES_CSV: &str = "trajectories.csv";
pub const STANDARDIZER_JSON: &str = "standardizer.json";
pub const SVR_LAT_JSON: &str = "svr_lat.json";
pub const SVR_LON_JSON: &str = "svr_lon.json";
pub const DNN_JSON: &str = "dnn.json";
pub const DNN_HISTORY_CSV: &str = "dnn_history.csv";
pub const ANNOTATED_CSV: &str = "annotated.csv";
pub const DELAY_REPORT_CSV: &str = "delay_report.csv";
pub const DELAY_REPORT_JSON: &str = "delay_report.json";

/// Which predictor(s) a command operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Svr,
    Dnn,
    Both,
}

impl ModelChoice {
    pub fn wants_svr(self) -> bool {
        matches!(self, Self::Svr | Self::Both)
    }

    pub fn wants_dnn(self) -> bool {
        matches!(self, Self::Dnn | Self::Both)
    }

    pub fn from_config(value: &str) -> Result<Self, CliError> {
        match value {
            "svr" => Ok(Self::Svr),
            "dnn" => Ok(Self::Dnn),
            "both" => Ok(Self::Both),
            other => Err(CliError::stage(
                "config",
                format!("key \"model\": expected svr, dnn, or both, got {other:?}"),
            )),
        }
    }
}

/// Coordinate space metrics are computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceChoice {
    Degrees,
    Standardized,
}

impl SpaceChoice {
    pub fn from_config(value: &str) -> Result<Self, CliError> {
        match value {
            "degrees" => Ok(Self::Degrees),
            "standardized" => Ok(Self::Standardized),
            other => Err(CliError::stage(
                "config",
                format!("key \"space\": expected degrees or standardized, got {other:?}"),
            )),
        }
    }
}

/// Creates the output directory, echoes the resolved configuration to
/// stdout, and writes it as `run_config.json` for reproducibility.
pub fn emit_run_config<T: Serialize>(output: &Path, resolved: &T) -> Result<(), CliError> {
    std::fs::create_dir_all(output).map_err(|e| CliError::stage("write-output", e))?;
    let json =
        serde_json::to_string_pretty(resolved).map_err(|e| CliError::stage("write-output", e))?;
    println!("{json}");
    std::fs::write(output.join(RUN_CONFIG_JSON), format!("{json}\n"))
        .map_err(|e| CliError::stage("write-output", e))?;
    Ok(())
}

/// Collects the wall-clock values of a run. Everything non-deterministic
/// lands here so every other output file is byte-identical across reruns.
pub struct MetaBlock {
    start: Instant,
    values: Map<String, Value>,
}

impl MetaBlock {
    pub fn new(command: &str) -> Self {
        let mut values = Map::new();
        values.insert("command".to_string(), Value::String(command.to_string()));
        Self {
            start: Instant::now(),
            values,
        }
    }

    pub fn record_f64(&mut self, key: &str, value: f64) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn record_u64(&mut self, key: &str, value: u64) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn write(mut self, output: &Path) -> Result<(), CliError> {
        self.values.insert(
            "wall_seconds".to_string(),
            self.start.elapsed().as_secs_f64().into(),
        );
        let json = serde_json::to_string_pretty(&Value::Object(self.values))
            .map_err(|e| CliError::stage("write-output", e))?;
        std::fs::write(output.join(RUN_META_JSON), format!("{json}\n"))
            .map_err(|e| CliError::stage("write-output", e))?;
        Ok(())
    }
}

pub fn load_input_csv(input: &Path) -> Result<Dataset, CliError> {
    parse_trajectory_csv(input).map_err(|e| CliError::stage("parse-csv", e))
}

/// Everything needed to predict in degree space for saved models.
pub struct LoadedModels {
    pub standardizer: Standardizer,
    pub svr: Option<SvrPair>,
    pub dnn: Option<MlpModel>,
}

pub fn load_models(dir: &Path, choice: ModelChoice) -> Result<LoadedModels, CliError> {
    let standardizer = Standardizer::load_json(&dir.join(STANDARDIZER_JSON))
        .map_err(|e| CliError::stage("load-model", e))?;
    let svr = if choice.wants_svr() {
        let lat_model = SvrModel::load_json(&dir.join(SVR_LAT_JSON))
            .map_err(|e| CliError::stage("load-model", e))?;
        let lon_model = SvrModel::load_json(&dir.join(SVR_LON_JSON))
            .map_err(|e| CliError::stage("load-model", e))?;
        Some(SvrPair {
            lat_model,
            lon_model,
        })
    } else {
        None
    };
    let dnn = if choice.wants_dnn() {
        Some(
            MlpModel::load_json(&dir.join(DNN_JSON))
                .map_err(|e| CliError::stage("load-model", e))?,
        )
    } else {
        None
    };
    Ok(LoadedModels {
        standardizer,
        svr,
        dnn,
    })
}

/// Predicted `(lat, lon)` per record, in standardized target units.
pub enum Predictor<'a> {
    Svr(&'a SvrPair),
    Dnn(&'a MlpModel),
}

impl Predictor<'_> {
    pub fn stage_name(&self) -> &'static str {
        match self {
            Self::Svr(_) => "predict-svr",
            Self::Dnn(_) => "predict-dnn",
        }
    }

    fn predict_std(&self, features: &[f64]) -> Result<(f64, f64), String> {
        match self {
            Self::Svr(pair) => pair.predict(features).map_err(|e| e.to_string()),
            Self::Dnn(model) => {
                let out = model.predict(features).map_err(|e| e.to_string())?;
                Ok((out[0], out[1]))
            }
        }
    }
}

/// Standardizes each record's features, runs the predictor, and converts the
/// outputs back to degrees.
pub fn predict_degrees(
    dataset: &Dataset,
    standardizer: &Standardizer,
    predictor: &Predictor,
) -> Result<Vec<(f64, f64)>, CliError> {
    let mut out = Vec::with_capacity(dataset.records.len());
    for record in &dataset.records {
        let features = [
            record.timestamp,
            record.speed_kmh,
            record.distance_m,
            record.stay_duration_s,
            record.lat,
            record.lon,
        ];
        let std_features = standardizer
            .transform_features(&features)
            .map_err(|e| CliError::stage("standardize", e))?;
        let (lat_std, lon_std) = predictor
            .predict_std(&std_features)
            .map_err(|e| CliError::stage(predictor.stage_name(), e))?;
        let degrees = standardizer
            .inverse_transform_targets(&[lat_std, lon_std])
            .map_err(|e| CliError::stage("standardize", e))?;
        out.push((degrees[0], degrees[1]));
    }
    Ok(out)
}
