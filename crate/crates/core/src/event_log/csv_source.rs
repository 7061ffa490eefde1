use std::collections::HashMap;
use std::io::Read;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use super::{ActivityId, EventLog, Trace, Vocabulary};
use crate::error::{Error, Result};

/// Column names of the four required CSV fields.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub case_id: String,
    pub activity: String,
    pub timestamp: String,
    pub label: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            case_id: "case_id".into(),
            activity: "activity".into(),
            timestamp: "timestamp".into(),
            label: "label".into(),
        }
    }
}

struct RawEvent {
    activity: String,
    timestamp: i64,
    order: usize,
}

struct RawCase {
    label: u8,
    events: Vec<RawEvent>,
}

/// Parses an ISO-8601 timestamp into milliseconds since the epoch. Values
/// without an offset are taken as UTC.
pub(crate) fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_millis());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp_millis());
        }
    }
    if let Ok(d) = DateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f%:z") {
        return Some(d.timestamp_millis());
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp_millis())
}

fn parse_label(s: &str) -> Option<u8> {
    match s.trim() {
        "0" => Some(0),
        "1" => Some(1),
        _ => None,
    }
}

/// Reads a labelled event log from CSV.
///
/// Events are grouped per case (cases keep their first-appearance order) and
/// sorted by timestamp, ties keeping input order.
pub fn parse_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<EventLog> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(|e| Error::Schema(format!("unreadable header: {e}")))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let (case_col, act_col, ts_col, label_col) =
        (column(&schema.case_id)?, column(&schema.activity)?, column(&schema.timestamp)?, column(&schema.label)?);

    let mut case_order: Vec<String> = Vec::new();
    let mut cases: HashMap<String, RawCase> = HashMap::new();
    for (order, record) in reader.records().enumerate() {
        // header is line 1
        let row = order + 2;
        let record = record.map_err(|e| Error::data_at(row, format!("malformed record: {e}")))?;
        let field = |i: usize| record.get(i).ok_or_else(|| Error::data_at(row, "missing field"));
        let case_id = field(case_col)?.to_owned();
        let activity = field(act_col)?.to_owned();
        let ts_raw = field(ts_col)?;
        let label_raw = field(label_col)?;
        if case_id.is_empty() || activity.is_empty() {
            return Err(Error::data_at(row, "empty case id or activity"));
        }
        let timestamp =
            parse_timestamp(ts_raw).ok_or_else(|| Error::data_at(row, format!("unparseable timestamp '{ts_raw}'")))?;
        let label = parse_label(label_raw)
            .ok_or_else(|| Error::data_at(row, format!("label must be 0 or 1, got '{label_raw}'")))?;

        let entry = cases.entry(case_id.clone()).or_insert_with(|| {
            case_order.push(case_id.clone());
            RawCase { label, events: Vec::new() }
        });
        if entry.label != label {
            return Err(Error::data_at(row, format!("case '{case_id}' has inconsistent labels")));
        }
        entry.events.push(RawEvent { activity, timestamp, order });
    }

    let vocabulary = Vocabulary::from_activity_names(
        cases.values().flat_map(|c| c.events.iter().map(|e| e.activity.as_str())),
    )?;

    let mut traces = Vec::with_capacity(case_order.len());
    for case_id in case_order {
        let mut raw = cases.remove(&case_id).expect("case recorded in order list");
        raw.events.sort_by_key(|e| (e.timestamp, e.order));
        let activities: Vec<ActivityId> =
            raw.events.iter().map(|e| vocabulary.id(&e.activity).expect("activity in vocabulary")).collect();
        let timestamps = raw.events.iter().map(|e| e.timestamp).collect();
        traces.push(Trace { case_id, activities, timestamps, label: raw.label });
    }
    Ok(EventLog::new(vocabulary, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::EOS_NAME;

    fn parse(s: &str) -> Result<EventLog> {
        parse_csv(s.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn two_rows_one_case() {
        let log = parse(
            "case_id,activity,timestamp,label\nc1,A,2020-01-01T00:00:00Z,1\nc1,B,2020-01-01T00:01:00Z,1\n",
        )
        .unwrap();
        assert_eq!(log.traces.len(), 1);
        assert_eq!(log.vocabulary.names(), &["A", "B", EOS_NAME]);
        assert_eq!(log.traces[0].activities, vec![ActivityId(0), ActivityId(1)]);
        assert_eq!(log.traces[0].label, 1);
        assert_eq!(log.max_len, 2);
    }

    #[test]
    fn empty_body() {
        let log = parse("case_id,activity,timestamp,label\n").unwrap();
        assert!(log.traces.is_empty());
        assert_eq!(log.vocabulary.names(), &[EOS_NAME]);
        assert_eq!(log.max_len, 0);
    }

    #[test]
    fn inconsistent_label_is_a_data_error() {
        let err = parse("case_id,activity,timestamp,label\nc1,A,2020-01-01,0\nc1,B,2020-01-02,1\n").unwrap_err();
        assert!(matches!(err, Error::Data { row: Some(3), .. }), "{err}");
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let err = parse("case_id,activity,label\nc1,A,0\n").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn bad_timestamp_reports_row() {
        let err = parse("case_id,activity,timestamp,label\nc1,A,2020-01-01,0\nc1,B,yesterday,0\n").unwrap_err();
        match err {
            Error::Data { row, msg } => {
                assert_eq!(row, Some(3));
                assert!(msg.contains("yesterday"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn events_sorted_by_time_then_input_order() {
        let log = parse(
            "case_id,activity,timestamp,label\n\
             c1,C,2020-01-01 10:00:00,0\n\
             c1,A,2020-01-01 09:00:00,0\n\
             c1,B,2020-01-01 10:00:00,0\n",
        )
        .unwrap();
        let names: Vec<&str> = log.traces[0].activities.iter().map(|&a| log.vocabulary.name(a)).collect();
        assert_eq!(names, ["A", "C", "B"]);
    }

    #[test]
    fn timestamp_formats() {
        let z = parse_timestamp("1970-01-01T00:00:01Z").unwrap();
        assert_eq!(z, 1000);
        assert_eq!(parse_timestamp("1970-01-01T00:00:01.250+00:00"), Some(1250));
        assert_eq!(parse_timestamp("1970-01-01T01:00:00+01:00"), Some(0));
        assert_eq!(parse_timestamp("1970-01-02"), Some(86_400_000));
        assert_eq!(parse_timestamp("1970-01-01 00:00:02.5"), Some(2500));
        assert_eq!(parse_timestamp("not a date"), None);
    }

    #[test]
    fn parsing_is_deterministic() {
        let csv = "case_id,activity,timestamp,label\nx,Z,2020-01-01,1\ny,A,2020-01-01,0\nx,A,2020-01-02,1\n";
        assert_eq!(parse(csv).unwrap(), parse(csv).unwrap());
    }
}
