//! In-process pub/sub with timestamp-faithful replay.
//!
//! A [`Broker`] fans published [`StreamMessage`]s out to per-consumer
//! bounded queues; [`replay_dataset`] paces an annotated trajectory onto a
//! topic so inter-message wall-clock gaps match the recorded timestamps;
//! [`PanelExport`] turns a consumed run back into plot-ready tables, and
//! [`TcpSink`] forwards messages to an external listener as NDJSON.

mod broker;
mod message;
mod panels;
mod replay;
mod tcp;

pub use broker::{Broker, BrokerConfig, Consumer, Topic};
pub use message::StreamMessage;
pub use panels::{build_panel_export, GeomapPoint, PanelExport};
pub use replay::{replay_dataset, run_consumer_loop, ReplayConfig, ReplaySummary};
pub use tcp::TcpSink;

use thiserror::Error;

/// Topic name used by the pipeline when none is given.
pub const DEFAULT_TOPIC: &str = "my-stream";

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("topic {0:?} already exists")]
    DuplicateTopic(String),
    #[error("topic {0:?} does not exist")]
    UnknownTopic(String),
    #[error("broker is closed")]
    BrokerClosed,
    #[error("records are not sorted by timestamp (first violation at index {index})")]
    UnsortedInput { index: usize },
    #[error("no messages to process")]
    EmptyInput,
    #[error("invalid stream configuration: {0}")]
    InvalidConfig(String),
    #[error("sink failed on message seq {seq}: {reason}")]
    Sink { seq: u64, reason: String },
    #[error("malformed message: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
