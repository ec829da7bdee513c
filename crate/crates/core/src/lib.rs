//! Next-location prediction and digital-twin stream replay for vehicle GPS
//! telemetry.
//!
//! The crate covers the full pipeline: trajectory datasets ([`data`]),
//! kernel machinery and an SMO-trained epsilon-SVR ([`kernel`], [`svr`]),
//! a from-scratch MLP regressor ([`mlp`]), combined-coordinate regression
//! metrics ([`metrics`]), an in-process pub/sub broker with
//! timestamp-faithful replay ([`stream`]), and the witnessed-delay model
//! that quantifies how prediction offsets physical-to-digital lag
//! ([`delay`]).
//!
//! Numeric routines are generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`). The aliases at the crate root fix `f64`, which is what
//! the CLI and all file formats use.

pub mod data;
pub mod delay;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod mlp;
pub mod scalar;
pub mod stream;
pub mod svr;

pub use scalar::Real;

/// Scalar used by the CLI and every on-disk format.
pub type Scalar = f64;

pub type Matrix = linalg::Matrix<Scalar>;
pub type Standardizer = data::Standardizer<Scalar>;
pub type SvrHyperparams = svr::SvrHyperparams<Scalar>;
pub type SvrModel = svr::SvrModel<Scalar>;
pub type SvrPair = svr::SvrPair<Scalar>;
pub type MlpModel = mlp::MlpModel<Scalar>;
pub type TrainingHistory = mlp::TrainingHistory<Scalar>;
pub type MetricsReport = metrics::MetricsReport<Scalar>;
pub type DelayCoefficients = delay::DelayCoefficients<Scalar>;
pub type DelayReport = delay::DelayReport<Scalar>;

pub use data::{Dataset, DatasetSource, SplitPair, TrajectoryRecord};
pub use stream::{Broker, BrokerConfig, Consumer, ReplayConfig, StreamMessage, Topic};
