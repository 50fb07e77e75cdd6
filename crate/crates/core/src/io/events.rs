//! Plain-text event streams, one `t x y p` line per event: `t` in seconds
//! with nine fractional digits, `p` is 1 for ON and 0 for OFF.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::circuit::Polarity;
use crate::simulator::EventRecord;

#[derive(Debug, Error)]
pub enum EventFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}: event file is empty")]
    Empty(PathBuf),
}

pub fn format_event(e: &EventRecord, out: &mut String) {
    let p = match e.polarity {
        Polarity::On => 1,
        _ => 0,
    };
    let _ = writeln!(out, "{:.9} {} {} {}", e.t, e.x, e.y, p);
}

pub fn format_events(events: &[EventRecord]) -> String {
    let mut out = String::with_capacity(events.len() * 24);
    for e in events {
        format_event(e, &mut out);
    }
    out
}

/// Parses an event stream; blank lines are ignored. `path` only labels errors.
pub fn parse_events(text: &str, path: &Path) -> Result<Vec<EventRecord>, EventFileError> {
    let err = |line: usize, message: String| EventFileError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        let [t, x, y, p] = fields[..] else {
            return Err(err(
                line,
                format!("expected 4 fields 't x y p', got {}", fields.len()),
            ));
        };
        let t: f64 = t
            .parse()
            .map_err(|_| err(line, format!("bad timestamp '{t}'")))?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(err(line, format!("timestamp {t} must be finite and >= 0")));
        }
        let x: u32 = x.parse().map_err(|_| err(line, format!("bad x '{x}'")))?;
        let y: u32 = y.parse().map_err(|_| err(line, format!("bad y '{y}'")))?;
        let polarity = match p {
            "1" => Polarity::On,
            "0" => Polarity::Off,
            other => return Err(err(line, format!("polarity must be 0 or 1, got '{other}'"))),
        };
        events.push(EventRecord { t, x, y, polarity });
    }
    Ok(events)
}

/// Reads a non-empty event file.
pub fn read_event_file(path: &Path) -> Result<Vec<EventRecord>, EventFileError> {
    let text = fs::read_to_string(path).map_err(|source| EventFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let events = parse_events(&text, path)?;
    if events.is_empty() {
        return Err(EventFileError::Empty(path.to_path_buf()));
    }
    Ok(events)
}
