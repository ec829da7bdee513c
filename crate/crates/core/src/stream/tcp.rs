//! Forwards messages to an external process as NDJSON over TCP.

use std::io::{BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};

use super::{StreamError, StreamMessage};

/// A connected sink that writes one JSON object per line.
pub struct TcpSink {
    writer: BufWriter<TcpStream>,
    peer: String,
}

impl TcpSink {
    pub fn connect<A: ToSocketAddrs + std::fmt::Display>(addr: A) -> Result<Self, StreamError> {
        let peer = addr.to_string();
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            writer: BufWriter::new(stream),
            peer,
        })
    }

    pub fn peer(&self) -> &str {
        &self.peer
    }

    /// Writes the message as one NDJSON line and flushes it so the receiver
    /// sees each message as soon as it is processed.
    pub fn send(&mut self, msg: &StreamMessage) -> Result<(), StreamError> {
        let line = msg.to_ndjson_line();
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader};
    use std::net::TcpListener;
    use std::thread;

    #[test]
    fn messages_arrive_as_parseable_lines() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let reader = BufReader::new(stream);
            reader.lines().map(|l| l.unwrap()).collect::<Vec<String>>()
        });

        let mut sink = TcpSink::connect(addr).unwrap();
        for seq in 1..=3u64 {
            let msg = StreamMessage {
                ts: seq as f64,
                vehicle_id: "V1".to_string(),
                lat: 41.0,
                lon: 29.0,
                pred_svr_lat: Some(41.001),
                pred_svr_lon: Some(29.001),
                pred_dnn_lat: None,
                pred_dnn_lon: None,
                seq,
            };
            sink.send(&msg).unwrap();
        }
        drop(sink);

        let lines = server.join().unwrap();
        assert_eq!(lines.len(), 3);
        for (i, line) in lines.iter().enumerate() {
            let parsed = StreamMessage::from_ndjson_line(line).unwrap();
            assert_eq!(parsed.seq, (i + 1) as u64);
            assert_eq!(parsed.pred_dnn_lat, None);
        }
    }

    #[test]
    fn connecting_to_a_dead_port_fails() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        assert!(TcpSink::connect(addr).is_err());
    }
}
