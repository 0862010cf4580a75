use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use web_time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub step: u64,
    pub episode: u32,
    #[serde(rename = "type")]
    pub kind: String,
    pub payload: Value,
    pub wall_time: f64,
}

/// Append-only event log, mirrored to a JSONL file that is flushed after
/// every event when a sink is attached.
#[derive(Debug, Default)]
pub struct EventLog {
    events: Vec<LogEvent>,
    sink: Option<File>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Attaches a file sink, writing any events recorded so far.
    pub fn attach(&mut self, path: &Path) -> io::Result<()> {
        let mut f = OpenOptions::new().create(true).truncate(true).write(true).open(path)?;
        for e in &self.events {
            writeln!(f, "{}", serde_json::to_string(e).expect("log events serialize"))?;
        }
        f.flush()?;
        self.sink = Some(f);
        Ok(())
    }

    pub fn record(&mut self, step: u64, episode: u32, kind: &str, payload: Value) {
        let wall_time = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let e = LogEvent { step, episode, kind: kind.to_string(), payload, wall_time };
        if let Some(f) = &mut self.sink {
            // A failing sink must not stop the session; the in-memory log stays complete.
            let _ = writeln!(f, "{}", serde_json::to_string(&e).expect("log events serialize")).and_then(|_| f.flush());
        }
        self.events.push(e);
    }

    pub fn events(&self) -> &[LogEvent] {
        &self.events
    }

    pub fn to_jsonl(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("log events serialize") + "\n").collect()
    }

    /// The log with wall-clock times zeroed, for comparing runs.
    pub fn without_wall_time(&self) -> Vec<LogEvent> {
        self.events
            .iter()
            .cloned()
            .map(|mut e| {
                e.wall_time = 0.0;
                e
            })
            .collect()
    }
}

/// Reads a JSONL session log, skipping a truncated final line.
pub fn read_log(path: &Path) -> io::Result<Vec<LogEvent>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(e) => out.push(e),
            Err(_) => break,
        }
    }
    Ok(out)
}
