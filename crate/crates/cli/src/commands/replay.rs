//! `geotwin replay` — stream an annotated CSV through the in-process broker
//! with a concurrent producer and consumer, then write the panel tables.

use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;

use geotwin_core::data::parse_annotated_csv;
use geotwin_core::stream::{
    build_panel_export, replay_dataset, run_consumer_loop, ReplayConfig, StreamError, TcpSink,
    DEFAULT_TOPIC,
};
use geotwin_core::{Broker, StreamMessage};

use super::{emit_run_config, MetaBlock};
use crate::config::{require, FileConfig};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Annotated CSV to replay (rows are sorted by timestamp first).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory for the panel CSVs and run records.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Wall-clock seconds per recorded second (0 = as fast as possible).
    #[arg(long)]
    time_scale: Option<f64>,
    /// Optional HOST:PORT to forward consumed messages to as NDJSON.
    #[arg(long)]
    tcp_sink: Option<String>,
    /// Optional cap on how many records to publish.
    #[arg(long)]
    max_messages: Option<usize>,
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
    time_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tcp_sink: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_messages: Option<usize>,
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let resolved = Resolved {
        command: "replay",
        input: require(args.input.clone().or(file.path_value("input")?), "input")?,
        output: require(args.output.clone().or(file.path_value("output")?), "output")?,
        time_scale: args
            .time_scale
            .or(file.f64_value("time-scale")?)
            .unwrap_or(1.0),
        tcp_sink: args.tcp_sink.clone().or(file.string_value("tcp-sink")?),
        max_messages: args.max_messages.or(file.usize_value("max-messages")?),
    };
    emit_run_config(&resolved.output, &resolved)?;
    let mut meta = MetaBlock::new("replay");

    let mut records =
        parse_annotated_csv(&resolved.input).map_err(|e| CliError::stage("parse-csv", e))?;
    // Replay follows one global timeline even when vehicles interleave.
    records.sort_by(|a, b| {
        a.record
            .timestamp
            .partial_cmp(&b.record.timestamp)
            .expect("timestamps validated finite")
    });

    let mut sink = match &resolved.tcp_sink {
        Some(addr) => Some(
            TcpSink::connect(addr.as_str())
                .map_err(|e| CliError::stage("tcp-sink", format!("connect to {addr}: {e}")))?,
        ),
        None => None,
    };

    let broker = Broker::default();
    let topic = broker
        .create_topic(DEFAULT_TOPIC, Some(1024))
        .map_err(|e| CliError::stage("replay", e))?;
    let consumer = topic
        .subscribe()
        .map_err(|e| CliError::stage("replay", e))?;

    let replay_config = ReplayConfig {
        time_scale: resolved.time_scale,
        max_messages: resolved.max_messages,
    };
    let producer = {
        let topic = topic.clone();
        let broker = broker.clone();
        std::thread::spawn(move || {
            let result = replay_dataset(&topic, &records, &replay_config);
            broker.close();
            result
        })
    };

    let mut consumed: Vec<StreamMessage> = Vec::new();
    let consumer_result = run_consumer_loop(&consumer, Duration::from_millis(100), |msg| {
        if let Some(sink) = sink.as_mut() {
            sink.send(msg).map_err(|e| e.to_string())?;
        }
        consumed.push(msg.clone());
        Ok(())
    });

    let summary = producer
        .join()
        .map_err(|_| CliError::stage("replay", "producer thread panicked"))?
        .map_err(|e| CliError::stage("replay", e))?;
    let processed = consumer_result.map_err(|e| match e {
        StreamError::Sink { seq, reason } => {
            CliError::stage("tcp-sink", format!("message seq {seq}: {reason}"))
        }
        other => CliError::stage("replay", other),
    })?;

    let export = build_panel_export(&consumed).map_err(|e| CliError::stage("replay", e))?;
    export
        .save_csv_set(&resolved.output)
        .map_err(|e| CliError::stage("write-output", e))?;

    println!(
        "replayed {} messages, consumed {}, panels written to {}",
        summary.published,
        processed,
        resolved.output.display()
    );
    meta.record_u64("published", summary.published as u64);
    meta.record_u64("consumed", processed as u64);
    meta.record_f64("replay_wall_seconds", summary.wall.as_secs_f64());
    meta.write(&resolved.output)
}
