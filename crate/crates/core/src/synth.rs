//! Synthetic labelled event logs for testing and demonstrations.
//!
//! Every trace starts with `S`, followed by 3 to 7 activities drawn
//! uniformly from `A..=E`. A case is labelled 1 iff some `B` occurs after
//! some `A`. Cases start one hour apart and events one minute apart.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::event_log::{parse_csv, CsvSchema, EventLog};

pub const START: &str = "S";
pub const BODY: [&str; 5] = ["A", "B", "C", "D", "E"];

const BASE_MS: i64 = 1_600_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthCase {
    pub case_id: String,
    pub activities: Vec<&'static str>,
    pub label: u8,
}

/// `B` eventually follows `A`.
pub fn a_then_b(acts: &[&str]) -> bool {
    match acts.iter().position(|&a| a == "A") {
        Some(i) => acts[i + 1..].contains(&"B"),
        None => false,
    }
}

pub fn synthetic_cases(n: usize, seed: u64) -> Vec<SynthCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(3..=7);
            let mut acts = vec![START];
            acts.extend((0..len).map(|_| BODY[rng.random_range(0..BODY.len())]));
            let label = u8::from(a_then_b(&acts));
            SynthCase { case_id: format!("case{i:04}"), activities: acts, label }
        })
        .collect()
}

/// CSV text with `case_id,activity,timestamp,label` columns.
pub fn synthetic_csv(n: usize, seed: u64) -> String {
    let mut s = String::from("case_id,activity,timestamp,label\n");
    for (i, c) in synthetic_cases(n, seed).iter().enumerate() {
        for (j, a) in c.activities.iter().enumerate() {
            let ms = BASE_MS + i as i64 * 3_600_000 + j as i64 * 60_000;
            let ts = chrono::DateTime::from_timestamp_millis(ms).expect("in range").to_rfc3339();
            s.push_str(&format!("{},{a},{ts},{}\n", c.case_id, c.label));
        }
    }
    s
}

/// The synthetic CSV parsed into a raw log (no EoS yet).
pub fn synthetic_log(n: usize, seed: u64) -> Result<EventLog> {
    parse_csv(synthetic_csv(n, seed).as_bytes(), &CsvSchema::default())
}
