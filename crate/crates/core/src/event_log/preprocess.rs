use std::cmp::Ordering;

use super::{ActivityId, EventLog, Trace};
use crate::error::{Error, Result};

/// Cuts every trace strictly before its first `outcome_activity`; traces left
/// empty are dropped. Returns the new log and the number of dropped traces.
pub fn truncate_outcome_activity(log: &EventLog, outcome_activity: ActivityId) -> Result<(EventLog, usize)> {
    if !log.vocabulary.contains(outcome_activity) || outcome_activity == log.vocabulary.eos() {
        return Err(Error::Argument(format!("unknown outcome activity id {}", outcome_activity.0)));
    }
    let mut dropped = 0;
    let traces: Vec<Trace> = log
        .traces
        .iter()
        .filter_map(|t| {
            let cut = t.activities.iter().position(|&a| a == outcome_activity).unwrap_or(t.len());
            if cut == 0 {
                dropped += 1;
                return None;
            }
            Some(Trace {
                case_id: t.case_id.clone(),
                activities: t.activities[..cut].to_vec(),
                timestamps: t.timestamps[..cut].to_vec(),
                label: t.label,
            })
        })
        .collect();
    let mut out = log.with_traces(traces);
    out.max_len = out.traces.iter().map(Trace::len).max().unwrap_or(0);
    Ok((out, dropped))
}

/// Empirical `q`-quantile length cut: `max_len` becomes the smallest length
/// covering at least `ceil(q * N)` traces, and longer traces keep their first
/// `max_len` events.
pub fn cut_at_quantile(log: &EventLog, q: f64) -> Result<EventLog> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Argument(format!("quantile must lie in (0, 1], got {q}")));
    }
    if log.traces.is_empty() {
        return Err(Error::State("cannot cut an empty log".into()));
    }
    let mut lengths: Vec<usize> = log.traces.iter().map(Trace::len).collect();
    lengths.sort_unstable();
    let n = lengths.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    let max_len = lengths[k - 1];

    let traces = log
        .traces
        .iter()
        .map(|t| {
            let keep = t.len().min(max_len);
            Trace {
                case_id: t.case_id.clone(),
                activities: t.activities[..keep].to_vec(),
                timestamps: t.timestamps[..keep].to_vec(),
                label: t.label,
            }
        })
        .collect();
    let mut out = log.with_traces(traces);
    out.max_len = max_len;
    Ok(out)
}

/// Appends the EoS token to every trace (timestamped like the last event)
/// and grows `max_len` by one.
pub fn append_eos(log: &EventLog) -> Result<EventLog> {
    let eos = log.vocabulary.eos();
    if log.eos_appended || log.traces.iter().any(|t| t.activities.contains(&eos)) {
        return Err(Error::State("EoS token already present".into()));
    }
    let traces = log
        .traces
        .iter()
        .map(|t| {
            let mut t = t.clone();
            let ts = t.timestamps.last().copied().unwrap_or(0);
            t.activities.push(eos);
            t.timestamps.push(ts);
            t
        })
        .collect();
    let mut out = log.with_traces(traces);
    out.max_len = log.max_len + 1;
    out.eos_appended = true;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: EventLog,
    pub test: EventLog,
    /// Earliest first-event timestamp among test cases.
    pub split_instant: i64,
    /// Train cases emptied by overlap cutting.
    pub dropped: usize,
}

/// Temporal train/test split keyed on each case's first-event timestamp
/// (ties broken by case id). Train events at or after the split instant are
/// removed; when EoS was already appended it is re-attached after cutting.
pub fn temporal_split(log: &EventLog, train_fraction: f64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Argument(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    if log.traces.len() < 2 {
        return Err(Error::State("temporal split needs at least two cases".into()));
    }
    let mut order: Vec<&Trace> = log.traces.iter().collect();
    order.sort_by(|a, b| match a.first_timestamp().cmp(&b.first_timestamp()) {
        Ordering::Equal => a.case_id.cmp(&b.case_id),
        o => o,
    });
    let n = order.len();
    let n_train = ((train_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let split_instant = order[n_train].first_timestamp().unwrap_or(i64::MIN);

    let eos = log.vocabulary.eos();
    let mut dropped = 0;
    let mut train = Vec::with_capacity(n_train);
    for t in &order[..n_train] {
        let had_eos = log.eos_appended && t.activities.last() == Some(&eos);
        let (mut activities, mut timestamps): (Vec<ActivityId>, Vec<i64>) = t
            .activities
            .iter()
            .zip(&t.timestamps)
            .filter(|(&a, &ts)| a != eos && ts < split_instant)
            .map(|(&a, &ts)| (a, ts))
            .unzip();
        if activities.is_empty() {
            dropped += 1;
            continue;
        }
        if had_eos {
            let ts = *timestamps.last().expect("non-empty");
            activities.push(eos);
            timestamps.push(ts);
        }
        train.push(Trace { case_id: t.case_id.clone(), activities, timestamps, label: t.label });
    }
    let test = order[n_train..].iter().map(|&t| t.clone()).collect();
    Ok(Split { train: log.with_traces(train), test: log.with_traces(test), split_instant, dropped })
}

/// Every non-empty prefix of every trace, labels inherited. Prefix case ids
/// are suffixed with `#<length>`.
pub fn prefix_log(log: &EventLog) -> EventLog {
    let traces = log
        .traces
        .iter()
        .flat_map(|t| {
            (1..=t.len()).map(move |l| Trace {
                case_id: format!("{}#{l}", t.case_id),
                activities: t.activities[..l].to_vec(),
                timestamps: t.timestamps[..l].to_vec(),
                label: t.label,
            })
        })
        .collect();
    log.with_traces(traces)
}
