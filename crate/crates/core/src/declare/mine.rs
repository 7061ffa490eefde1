use std::collections::BTreeSet;

use rayon::prelude::*;

use super::{Constraint, ConstraintSet, Template};
use crate::error::{Error, Result};
use crate::event_log::{ActivityId, Trace};

/// Upper bound on `n` for the cardinality templates.
pub const DEFAULT_MAX_CARD: u32 = 3;

fn candidates(alphabet: &[ActivityId], max_card: u32) -> Vec<Constraint> {
    let mut out = Vec::new();
    for &a in alphabet {
        for n in 1..=max_card {
            for t in [Template::Existence(n), Template::Absence(n), Template::Exactly(n)] {
                out.push(Constraint::unary(t, a).expect("unary template"));
            }
        }
        out.push(Constraint::unary(Template::Init, a).expect("unary template"));
        out.push(Constraint::unary(Template::Last, a).expect("unary template"));
    }
    for &a in alphabet {
        for &b in alphabet {
            if a == b {
                continue;
            }
            for t in Template::BINARY {
                // co-existence is symmetric; keep one orientation
                if t == Template::CoExistence && a > b {
                    continue;
                }
                out.push(Constraint::binary(t, a, b).expect("distinct activities"));
            }
        }
    }
    out
}

/// Mines over the activities that occur in `traces`.
pub fn mine(traces: &[&Trace], support: f64, max_card: u32) -> Result<Vec<Constraint>> {
    let alphabet: BTreeSet<ActivityId> = traces.iter().flat_map(|t| t.activities.iter().copied()).collect();
    let alphabet: Vec<ActivityId> = alphabet.into_iter().collect();
    mine_over(traces, &alphabet, support, max_card)
}

/// Returns every candidate over `alphabet` satisfied by at least a
/// `support` fraction of `traces`, in canonical order.
pub fn mine_over(traces: &[&Trace], alphabet: &[ActivityId], support: f64, max_card: u32) -> Result<Vec<Constraint>> {
    if traces.is_empty() {
        return Err(Error::Argument("cannot mine an empty trace set".into()));
    }
    if !(support > 0.0 && support <= 1.0) {
        return Err(Error::Argument(format!("support must lie in (0, 1], got {support}")));
    }
    if max_card < 1 {
        return Err(Error::Argument("max_card must be at least 1".into()));
    }
    let n = traces.len();
    let required = (support * n as f64 - 1e-9).ceil().max(0.0) as usize;
    let mut mined: Vec<Constraint> = candidates(alphabet, max_card)
        .into_par_iter()
        .filter(|c| {
            let mut ok = 0;
            for (seen, t) in traces.iter().enumerate() {
                if c.holds(&t.activities) {
                    ok += 1;
                } else if n - (seen + 1) + ok < required {
                    return false;
                }
            }
            ok >= required
        })
        .collect();
    mined.sort_by(Constraint::canonical_cmp);
    Ok(mined)
}

/// `tdc = mine(all)`, `ldc = mine(desired) \ tdc`, both over the alphabet
/// of `all`.
pub fn derive_tdc_ldc(all: &[&Trace], desired: &[&Trace], support: f64, max_card: u32) -> Result<ConstraintSet> {
    if desired.is_empty() {
        return Err(Error::Argument("no traces carry the desired label".into()));
    }
    let alphabet: BTreeSet<ActivityId> = all.iter().flat_map(|t| t.activities.iter().copied()).collect();
    let alphabet: Vec<ActivityId> = alphabet.into_iter().collect();
    let tdc = mine_over(all, &alphabet, support, max_card)?;
    let ldc = mine_over(desired, &alphabet, support, max_card)?
        .into_iter()
        .filter(|c| tdc.binary_search_by(|t| t.canonical_cmp(c)).is_err())
        .collect();
    Ok(ConstraintSet { tdc, ldc })
}
