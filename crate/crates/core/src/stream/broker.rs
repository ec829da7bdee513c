//! In-process topic-based pub/sub with bounded per-consumer queues.
//!
//! Every consumer gets its own FIFO queue (broadcast fan-out); a publish
//! blocks until all subscriber queues have room, so memory stays bounded by
//! capacity and slow consumers exert backpressure instead of losing data.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{StreamError, StreamMessage};

#[derive(Debug, Clone, PartialEq)]
pub struct BrokerConfig {
    /// Per-consumer queue bound used when a topic doesn't set its own.
    pub default_capacity: usize,
    /// How many delivered messages each topic keeps for inspection.
    pub retained_capacity: usize,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            default_capacity: 64,
            retained_capacity: 1024,
        }
    }
}

struct TopicState {
    capacity: usize,
    next_seq: u64,
    retained: VecDeque<StreamMessage>,
    retained_capacity: usize,
    /// Consumer id -> pending queue.
    queues: HashMap<u64, VecDeque<StreamMessage>>,
}

struct BrokerState {
    closed: bool,
    topics: HashMap<String, TopicState>,
    next_consumer_id: u64,
}

struct Shared {
    state: Mutex<BrokerState>,
    /// Signalled when queue space frees up (poll or consumer drop).
    space_freed: Condvar,
    /// Signalled on publish and on close.
    data_ready: Condvar,
}

#[derive(Clone)]
pub struct Broker {
    shared: Arc<Shared>,
    config: BrokerConfig,
}

/// Handle to one topic of a broker.
#[derive(Clone)]
pub struct Topic {
    broker: Broker,
    name: String,
}

/// One subscription with its own queue; dropping it unsubscribes.
pub struct Consumer {
    shared: Arc<Shared>,
    topic: String,
    id: u64,
}

impl Default for Broker {
    fn default() -> Self {
        Self::new(BrokerConfig::default())
    }
}

impl Broker {
    pub fn new(config: BrokerConfig) -> Self {
        Self {
            shared: Arc::new(Shared {
                state: Mutex::new(BrokerState {
                    closed: false,
                    topics: HashMap::new(),
                    next_consumer_id: 1,
                }),
                space_freed: Condvar::new(),
                data_ready: Condvar::new(),
            }),
            config,
        }
    }

    /// Registers a topic; publishing requires this explicit step.
    pub fn create_topic(&self, name: &str, capacity: Option<usize>) -> Result<Topic, StreamError> {
        let mut state = self.shared.state.lock().expect("broker lock poisoned");
        if state.closed {
            return Err(StreamError::BrokerClosed);
        }
        if state.topics.contains_key(name) {
            return Err(StreamError::DuplicateTopic(name.to_string()));
        }
        state.topics.insert(
            name.to_string(),
            TopicState {
                capacity: capacity.unwrap_or(self.config.default_capacity).max(1),
                next_seq: 1,
                retained: VecDeque::new(),
                retained_capacity: self.config.retained_capacity,
                queues: HashMap::new(),
            },
        );
        Ok(Topic {
            broker: self.clone(),
            name: name.to_string(),
        })
    }

    /// Enqueues the message for every current subscriber, blocking while any
    /// subscriber queue is full. Returns the assigned sequence number.
    pub fn publish(&self, topic: &str, mut msg: StreamMessage) -> Result<u64, StreamError> {
        let mut state = self.shared.state.lock().expect("broker lock poisoned");
        loop {
            if state.closed {
                return Err(StreamError::BrokerClosed);
            }
            let t = state
                .topics
                .get(topic)
                .ok_or_else(|| StreamError::UnknownTopic(topic.to_string()))?;
            if t.queues.values().all(|q| q.len() < t.capacity) {
                break;
            }
            state = self
                .shared
                .space_freed
                .wait(state)
                .expect("broker lock poisoned");
        }
        let t = state.topics.get_mut(topic).expect("checked above");
        msg.seq = t.next_seq;
        t.next_seq += 1;
        for q in t.queues.values_mut() {
            q.push_back(msg.clone());
        }
        if t.retained_capacity > 0 {
            if t.retained.len() == t.retained_capacity {
                t.retained.pop_front();
            }
            t.retained.push_back(msg.clone());
        }
        self.shared.data_ready.notify_all();
        Ok(msg.seq)
    }

    /// Attaches a new consumer with an empty queue; it sees only messages
    /// published after this call.
    pub fn subscribe(&self, topic: &str) -> Result<Consumer, StreamError> {
        let mut state = self.shared.state.lock().expect("broker lock poisoned");
        if state.closed {
            return Err(StreamError::BrokerClosed);
        }
        if !state.topics.contains_key(topic) {
            return Err(StreamError::UnknownTopic(topic.to_string()));
        }
        let id = state.next_consumer_id;
        state.next_consumer_id += 1;
        state
            .topics
            .get_mut(topic)
            .expect("checked above")
            .queues
            .insert(id, VecDeque::new());
        Ok(Consumer {
            shared: Arc::clone(&self.shared),
            topic: topic.to_string(),
            id,
        })
    }

    /// Snapshot of the bounded retained log of a topic.
    pub fn retained(&self, topic: &str) -> Result<Vec<StreamMessage>, StreamError> {
        let state = self.shared.state.lock().expect("broker lock poisoned");
        state
            .topics
            .get(topic)
            .map(|t| t.retained.iter().cloned().collect())
            .ok_or_else(|| StreamError::UnknownTopic(topic.to_string()))
    }

    /// Stops all publishing and wakes every blocked publisher and poller.
    /// Consumers can still drain messages already queued.
    pub fn close(&self) {
        let mut state = self.shared.state.lock().expect("broker lock poisoned");
        state.closed = true;
        self.shared.space_freed.notify_all();
        self.shared.data_ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.shared
            .state
            .lock()
            .expect("broker lock poisoned")
            .closed
    }
}

impl Topic {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn publish(&self, msg: StreamMessage) -> Result<u64, StreamError> {
        self.broker.publish(&self.name, msg)
    }

    pub fn subscribe(&self) -> Result<Consumer, StreamError> {
        self.broker.subscribe(&self.name)
    }

    pub fn retained(&self) -> Result<Vec<StreamMessage>, StreamError> {
        self.broker.retained(&self.name)
    }
}

impl Consumer {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    /// Next message in seq order. `Ok(None)` after `timeout` with nothing
    /// queued; `BrokerClosed` once the broker is closed and the queue is
    /// fully drained.
    pub fn poll(&self, timeout: Duration) -> Result<Option<StreamMessage>, StreamError> {
        let deadline = Instant::now() + timeout;
        let mut state = self.shared.state.lock().expect("broker lock poisoned");
        loop {
            let queue = state
                .topics
                .get_mut(&self.topic)
                .and_then(|t| t.queues.get_mut(&self.id))
                .expect("consumer queue disappeared before drop");
            if let Some(msg) = queue.pop_front() {
                self.shared.space_freed.notify_all();
                return Ok(Some(msg));
            }
            if state.closed {
                return Err(StreamError::BrokerClosed);
            }
            let now = Instant::now();
            if now >= deadline {
                return Ok(None);
            }
            let (guard, _) = self
                .shared
                .data_ready
                .wait_timeout(state, deadline - now)
                .expect("broker lock poisoned");
            state = guard;
        }
    }
}

impl Drop for Consumer {
    fn drop(&mut self) {
        let mut state = self.shared.state.lock().expect("broker lock poisoned");
        if let Some(t) = state.topics.get_mut(&self.topic) {
            t.queues.remove(&self.id);
        }
        // A publisher may have been waiting on this queue's space.
        self.shared.space_freed.notify_all();
    }
}
