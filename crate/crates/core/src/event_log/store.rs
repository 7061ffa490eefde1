//! Versioned JSON container for processed logs.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ActivityId, EventLog, Trace, Vocabulary};
use crate::error::{Error, Result};

pub const LOG_FORMAT_VERSION: u32 = 1;
const LOG_FORMAT_TAG: &str = "cfproc-log";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    vocabulary: Vec<String>,
    max_len: usize,
    eos_appended: bool,
}

#[derive(Serialize, Deserialize)]
struct StoredTrace {
    case_id: String,
    label: u8,
    activities: Vec<u32>,
    timestamps: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct Container {
    header: Header,
    traces: Vec<StoredTrace>,
}

pub fn write_log<W: Write>(log: &EventLog, mut out: W) -> Result<()> {
    let container = Container {
        header: Header {
            format: LOG_FORMAT_TAG.into(),
            version: LOG_FORMAT_VERSION,
            vocabulary: log.vocabulary.names().to_vec(),
            max_len: log.max_len,
            eos_appended: log.eos_appended,
        },
        traces: log
            .traces
            .iter()
            .map(|t| StoredTrace {
                case_id: t.case_id.clone(),
                label: t.label,
                activities: t.activities.iter().map(|a| a.0).collect(),
                timestamps: t.timestamps.clone(),
            })
            .collect(),
    };
    serde_json::to_writer(&mut out, &container).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_log<R: Read>(input: R) -> Result<EventLog> {
    let c: Container = serde_json::from_reader(input).map_err(|e| Error::Format(e.to_string()))?;
    if c.header.format != LOG_FORMAT_TAG || c.header.version != LOG_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported log container {} v{}",
            c.header.format, c.header.version
        )));
    }
    let vocabulary = Vocabulary::from_persisted(c.header.vocabulary)?;
    let mut traces = Vec::with_capacity(c.traces.len());
    for t in c.traces {
        if t.activities.len() != t.timestamps.len() || t.label > 1 {
            return Err(Error::Format(format!("corrupt trace '{}'", t.case_id)));
        }
        if t.activities.len() > c.header.max_len || t.activities.iter().any(|&a| a as usize >= vocabulary.len()) {
            return Err(Error::Format(format!("trace '{}' does not fit the header", t.case_id)));
        }
        traces.push(Trace {
            case_id: t.case_id,
            activities: t.activities.into_iter().map(ActivityId).collect(),
            timestamps: t.timestamps,
            label: t.label,
        });
    }
    Ok(EventLog { vocabulary, traces, max_len: c.header.max_len, eos_appended: c.header.eos_appended })
}
