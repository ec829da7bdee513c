//! Wire format of the replayed telemetry stream: one JSON object per line
//! (NDJSON), with null prediction fields when a model's output is absent.

use serde::{Deserialize, Serialize};

use crate::data::AnnotatedRecord;

use super::StreamError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMessage {
    /// Original record timestamp in seconds (data, not wall clock).
    pub ts: f64,
    pub vehicle_id: String,
    /// Actual current location, degrees.
    pub lat: f64,
    pub lon: f64,
    pub pred_svr_lat: Option<f64>,
    pub pred_svr_lon: Option<f64>,
    pub pred_dnn_lat: Option<f64>,
    pub pred_dnn_lon: Option<f64>,
    /// Assigned by the broker at publish time; strictly increasing per
    /// topic, starting at 1. Zero means "not yet published".
    pub seq: u64,
}

impl StreamMessage {
    /// Builds an unpublished message (seq 0) from an annotated record.
    pub fn from_annotated(row: &AnnotatedRecord) -> Self {
        Self {
            ts: row.record.timestamp,
            vehicle_id: row.record.vehicle_id.clone(),
            lat: row.record.lat,
            lon: row.record.lon,
            pred_svr_lat: row.pred_svr.map(|p| p.0),
            pred_svr_lon: row.pred_svr.map(|p| p.1),
            pred_dnn_lat: row.pred_dnn.map(|p| p.0),
            pred_dnn_lon: row.pred_dnn.map(|p| p.1),
            seq: 0,
        }
    }

    /// Single-line JSON, no trailing newline.
    pub fn to_ndjson_line(&self) -> String {
        serde_json::to_string(self).expect("message serialization cannot fail")
    }

    pub fn from_ndjson_line(line: &str) -> Result<Self, StreamError> {
        serde_json::from_str(line).map_err(|e| StreamError::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> StreamMessage {
        StreamMessage {
            ts: 1_546_300_800.5,
            vehicle_id: "V17".to_string(),
            lat: 41.0151,
            lon: 28.9795,
            pred_svr_lat: Some(41.0153),
            pred_svr_lon: Some(28.9801),
            pred_dnn_lat: None,
            pred_dnn_lon: None,
            seq: 42,
        }
    }

    #[test]
    fn serializes_missing_predictions_as_null() {
        let line = sample().to_ndjson_line();
        assert!(!line.contains('\n'));
        assert!(line.contains("\"pred_dnn_lat\":null"));
        assert!(line.contains("\"seq\":42"));
    }

    #[test]
    fn round_trips_the_sample() {
        let msg = sample();
        assert_eq!(
            StreamMessage::from_ndjson_line(&msg.to_ndjson_line()).unwrap(),
            msg
        );
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(
            StreamMessage::from_ndjson_line("{\"ts\": }"),
            Err(StreamError::Format(_))
        ));
    }

    proptest! {
        #[test]
        fn ndjson_round_trip(
            ts in -2e9f64..2e9,
            id in "[A-Za-z0-9_-]{1,12}",
            lat in -90.0f64..90.0,
            lon in -180.0f64..180.0,
            svr in proptest::option::of((-90.0f64..90.0, -180.0f64..180.0)),
            dnn in proptest::option::of((-90.0f64..90.0, -180.0f64..180.0)),
            seq in 0u64..u64::MAX,
        ) {
            let msg = StreamMessage {
                ts,
                vehicle_id: id,
                lat,
                lon,
                pred_svr_lat: svr.map(|p| p.0),
                pred_svr_lon: svr.map(|p| p.1),
                pred_dnn_lat: dnn.map(|p| p.0),
                pred_dnn_lon: dnn.map(|p| p.1),
                seq,
            };
            let back = StreamMessage::from_ndjson_line(&msg.to_ndjson_line()).unwrap();
            prop_assert_eq!(back, msg);
        }
    }
}
