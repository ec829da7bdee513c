//! Timestamp-faithful replay of a recorded trajectory onto a topic.
//!
//! Inter-record gaps are reproduced on the wall clock (optionally scaled).
//! Each publish is scheduled relative to the *previous actual publish*, so a
//! message is never sent earlier than its recorded offset demands even when
//! an earlier publish ran late or blocked on backpressure.

use std::time::{Duration, Instant};

use super::{StreamError, StreamMessage, Topic};
use crate::data::AnnotatedRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayConfig {
    /// Wall-clock seconds per recorded second. 1.0 is real time, 0.0 replays
    /// as fast as the consumers allow.
    pub time_scale: f64,
    /// Optional cap on how many records to publish.
    pub max_messages: Option<usize>,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            time_scale: 1.0,
            max_messages: None,
        }
    }
}

/// What a replay run actually did, for timing verification.
#[derive(Debug, Clone)]
pub struct ReplaySummary {
    pub published: usize,
    /// Total wall time from just before the first publish to after the last.
    pub wall: Duration,
    /// Wall-clock offset of each publish from the start of the run.
    pub publish_offsets: Vec<Duration>,
}

/// Sleep until `target`, trading the last stretch for a spin so the wakeup
/// lands within OS-timer jitter of the goal.
fn wait_until(target: Instant) {
    let spin_margin = Duration::from_millis(2);
    loop {
        let now = Instant::now();
        if now >= target {
            return;
        }
        let remaining = target - now;
        if remaining > spin_margin {
            std::thread::sleep(remaining - spin_margin);
        } else {
            std::hint::spin_loop();
        }
    }
}

/// Publishes `records` to `topic`, pacing messages by their timestamp gaps.
///
/// Records must be sorted by timestamp (ties allowed). The first record goes
/// out immediately; record `k+1` goes out no earlier than
/// `time_scale * (ts[k+1] - ts[k])` after record `k` actually left.
pub fn replay_dataset(
    topic: &Topic,
    records: &[AnnotatedRecord],
    config: &ReplayConfig,
) -> Result<ReplaySummary, StreamError> {
    if records.is_empty() {
        return Err(StreamError::EmptyInput);
    }
    if !(config.time_scale.is_finite() && config.time_scale >= 0.0) {
        return Err(StreamError::InvalidConfig(format!(
            "time_scale must be finite and >= 0, got {}",
            config.time_scale
        )));
    }
    for (index, pair) in records.windows(2).enumerate() {
        if pair[1].record.timestamp < pair[0].record.timestamp {
            return Err(StreamError::UnsortedInput { index: index + 1 });
        }
    }

    let limit = config.max_messages.unwrap_or(usize::MAX).min(records.len());
    let start = Instant::now();
    let mut publish_offsets = Vec::with_capacity(limit);
    let mut last_publish = start;
    let mut last_ts = None::<f64>;
    for annotated in records.iter().take(limit) {
        if let Some(prev_ts) = last_ts {
            let gap = (annotated.record.timestamp - prev_ts) * config.time_scale;
            if gap > 0.0 {
                wait_until(last_publish + Duration::from_secs_f64(gap));
            }
        }
        topic.publish(StreamMessage::from_annotated(annotated))?;
        last_publish = Instant::now();
        last_ts = Some(annotated.record.timestamp);
        publish_offsets.push(last_publish - start);
    }

    Ok(ReplaySummary {
        published: publish_offsets.len(),
        wall: start.elapsed(),
        publish_offsets,
    })
}

/// Drains a consumer until the broker closes, handing every message to
/// `sink`. Fails fast with the offending sequence number if the sink errors.
/// Returns how many messages were processed successfully.
pub fn run_consumer_loop<F>(
    consumer: &super::Consumer,
    poll_timeout: Duration,
    mut sink: F,
) -> Result<usize, StreamError>
where
    F: FnMut(&StreamMessage) -> Result<(), String>,
{
    let mut processed = 0usize;
    loop {
        match consumer.poll(poll_timeout) {
            Ok(Some(msg)) => {
                sink(&msg).map_err(|reason| StreamError::Sink {
                    seq: msg.seq,
                    reason,
                })?;
                processed += 1;
            }
            Ok(None) => continue,
            Err(StreamError::BrokerClosed) => return Ok(processed),
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TrajectoryRecord;
    use crate::stream::Broker;
    use std::thread;

    fn annotated(ts: f64) -> AnnotatedRecord {
        AnnotatedRecord {
            record: TrajectoryRecord {
                vehicle_id: "V1".to_string(),
                timestamp: ts,
                speed_kmh: 30.0,
                distance_m: 10.0,
                stay_duration_s: 0.0,
                lat: 41.0,
                lon: 29.0,
                next_lat: 41.001,
                next_lon: 29.001,
            },
            pred_svr: Some((41.0005, 29.0005)),
            pred_dnn: None,
        }
    }

    fn run_replay(
        records: Vec<AnnotatedRecord>,
        config: ReplayConfig,
    ) -> (ReplaySummary, Vec<StreamMessage>) {
        let broker = Broker::default();
        let topic = broker.create_topic("my-stream", Some(4096)).unwrap();
        let consumer = topic.subscribe().unwrap();
        let collector = thread::spawn(move || {
            let mut got = Vec::new();
            loop {
                match consumer.poll(Duration::from_millis(100)) {
                    Ok(Some(m)) => got.push(m),
                    Ok(None) => continue,
                    Err(StreamError::BrokerClosed) => break,
                    Err(e) => panic!("unexpected error {e:?}"),
                }
            }
            got
        });
        let summary = replay_dataset(&topic, &records, &config).unwrap();
        broker.close();
        (summary, collector.join().unwrap())
    }

    #[test]
    fn gaps_are_reproduced_at_scale_one() {
        let records = vec![annotated(0.0), annotated(0.1), annotated(0.3)];
        let (summary, got) = run_replay(records, ReplayConfig::default());
        assert_eq!(summary.published, 3);
        assert_eq!(got.len(), 3);

        let offsets = &summary.publish_offsets;
        let gap1 = (offsets[1] - offsets[0]).as_secs_f64();
        let gap2 = (offsets[2] - offsets[1]).as_secs_f64();
        assert!(gap1 >= 0.1 && gap1 < 0.12, "first gap {gap1}");
        assert!(gap2 >= 0.2 && gap2 < 0.22, "second gap {gap2}");
    }

    #[test]
    fn time_scale_stretches_gaps() {
        let records = vec![annotated(0.0), annotated(0.1)];
        let config = ReplayConfig {
            time_scale: 2.0,
            ..ReplayConfig::default()
        };
        let (summary, _) = run_replay(records, config);
        let gap = (summary.publish_offsets[1] - summary.publish_offsets[0]).as_secs_f64();
        assert!(gap >= 0.2 && gap < 0.23, "scaled gap {gap}");
    }

    #[test]
    fn zero_scale_replays_as_fast_as_possible() {
        let records: Vec<AnnotatedRecord> = (0..1000).map(|i| annotated(i as f64)).collect();
        let config = ReplayConfig {
            time_scale: 0.0,
            ..ReplayConfig::default()
        };
        let (summary, got) = run_replay(records, config);
        assert_eq!(summary.published, 1000);
        assert_eq!(got.len(), 1000);
        assert!(
            summary.wall < Duration::from_secs(1),
            "took {:?}",
            summary.wall
        );
    }

    #[test]
    fn max_messages_caps_the_run() {
        let records: Vec<AnnotatedRecord> = (0..10).map(|i| annotated(i as f64)).collect();
        let config = ReplayConfig {
            time_scale: 0.0,
            max_messages: Some(4),
        };
        let (summary, got) = run_replay(records, config);
        assert_eq!(summary.published, 4);
        assert_eq!(got.len(), 4);
    }

    #[test]
    fn unsorted_input_is_rejected_with_position() {
        let broker = Broker::default();
        let topic = broker.create_topic("t", None).unwrap();
        let records = vec![annotated(1.0), annotated(2.0), annotated(1.5)];
        let err = replay_dataset(&topic, &records, &ReplayConfig::default()).unwrap_err();
        assert!(matches!(err, StreamError::UnsortedInput { index: 2 }));
    }

    #[test]
    fn empty_input_is_rejected() {
        let broker = Broker::default();
        let topic = broker.create_topic("t", None).unwrap();
        let err = replay_dataset(&topic, &[], &ReplayConfig::default()).unwrap_err();
        assert!(matches!(err, StreamError::EmptyInput));
    }

    #[test]
    fn negative_time_scale_is_rejected() {
        let broker = Broker::default();
        let topic = broker.create_topic("t", None).unwrap();
        let config = ReplayConfig {
            time_scale: -1.0,
            ..ReplayConfig::default()
        };
        let err = replay_dataset(&topic, &[annotated(0.0)], &config).unwrap_err();
        assert!(matches!(err, StreamError::InvalidConfig(_)));
    }

    #[test]
    fn consumer_loop_processes_everything_until_close() {
        let broker = Broker::default();
        let topic = broker.create_topic("t", None).unwrap();
        let consumer = topic.subscribe().unwrap();
        for i in 0..5 {
            topic
                .publish(StreamMessage::from_annotated(&annotated(i as f64)))
                .unwrap();
        }
        broker.close();
        let mut seen = Vec::new();
        let processed = run_consumer_loop(&consumer, Duration::from_millis(50), |m| {
            seen.push(m.seq);
            Ok(())
        })
        .unwrap();
        assert_eq!(processed, 5);
        assert_eq!(seen, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn consumer_loop_reports_failing_sequence() {
        let broker = Broker::default();
        let topic = broker.create_topic("t", None).unwrap();
        let consumer = topic.subscribe().unwrap();
        for i in 0..5 {
            topic
                .publish(StreamMessage::from_annotated(&annotated(i as f64)))
                .unwrap();
        }
        broker.close();
        let mut processed_before_failure = 0;
        let err = run_consumer_loop(&consumer, Duration::from_millis(50), |m| {
            if m.seq == 3 {
                Err("disk full".to_string())
            } else {
                processed_before_failure += 1;
                Ok(())
            }
        })
        .unwrap_err();
        match err {
            StreamError::Sink { seq, reason } => {
                assert_eq!(seq, 3);
                assert_eq!(reason, "disk full");
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert_eq!(processed_before_failure, 2);
    }

    #[test]
    fn consumer_loop_on_closed_empty_topic_returns_zero() {
        let broker = Broker::default();
        let topic = broker.create_topic("t", None).unwrap();
        let consumer = topic.subscribe().unwrap();
        broker.close();
        let processed =
            run_consumer_loop(&consumer, Duration::from_millis(10), |_| Ok(())).unwrap();
        assert_eq!(processed, 0);
    }
}
