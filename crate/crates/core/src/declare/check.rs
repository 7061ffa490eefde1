use super::{Constraint, Template};
use crate::error::{Error, Result};
use crate::event_log::{ActivityId, Trace, Vocabulary};

fn count(t: &[ActivityId], a: ActivityId) -> usize {
    t.iter().filter(|&&x| x == a).count()
}

fn response(t: &[ActivityId], a: ActivityId, b: ActivityId) -> bool {
    match t.iter().rposition(|&x| x == a) {
        Some(last_a) => t[last_a + 1..].contains(&b),
        None => true,
    }
}

fn precedence(t: &[ActivityId], a: ActivityId, b: ActivityId) -> bool {
    match t.iter().position(|&x| x == b) {
        Some(first_b) => t[..first_b].contains(&a),
        None => true,
    }
}

fn alternate_response(t: &[ActivityId], a: ActivityId, b: ActivityId) -> bool {
    let mut pending = false;
    for &x in t {
        if x == a {
            if pending {
                return false;
            }
            pending = true;
        } else if x == b {
            pending = false;
        }
    }
    !pending
}

fn alternate_precedence(t: &[ActivityId], a: ActivityId, b: ActivityId) -> bool {
    let mut armed = false;
    for &x in t {
        if x == a {
            armed = true;
        } else if x == b {
            if !armed {
                return false;
            }
            armed = false;
        }
    }
    true
}

fn chain_response(t: &[ActivityId], a: ActivityId, b: ActivityId) -> bool {
    t.iter().enumerate().all(|(i, &x)| x != a || t.get(i + 1) == Some(&b))
}

// A `b` in first position has no predecessor and violates.
fn chain_precedence(t: &[ActivityId], a: ActivityId, b: ActivityId) -> bool {
    t.iter().enumerate().all(|(i, &x)| x != b || (i > 0 && t[i - 1] == a))
}

impl Constraint {
    /// Finite-trace satisfaction. Binary templates with a missing second
    /// activity never hold.
    pub fn holds(&self, t: &[ActivityId]) -> bool {
        let a = self.a;
        let b = match (self.template.is_binary(), self.b) {
            (true, Some(b)) => b,
            (true, None) => return false,
            (false, _) => a,
        };
        match self.template {
            Template::Existence(n) => count(t, a) >= n as usize,
            Template::Absence(n) => count(t, a) < n as usize,
            Template::Exactly(n) => count(t, a) == n as usize,
            Template::Init => t.first() == Some(&a),
            // whenever `a` occurs, the next event (if any) is `a` as well
            Template::Last => t.windows(2).all(|w| w[0] != a || w[1] == a),
            Template::CoExistence => t.contains(&a) == t.contains(&b),
            Template::Response => response(t, a, b),
            Template::Precedence => precedence(t, a, b),
            Template::Succession => response(t, a, b) && precedence(t, a, b),
            Template::NotSuccession => match t.iter().position(|&x| x == a) {
                Some(first_a) => !t[first_a + 1..].contains(&b),
                None => true,
            },
            Template::AlternateResponse => alternate_response(t, a, b),
            Template::AlternatePrecedence => alternate_precedence(t, a, b),
            Template::AlternateSuccession => alternate_response(t, a, b) && precedence(t, a, b),
            Template::ChainResponse => chain_response(t, a, b),
            Template::ChainPrecedence => chain_precedence(t, a, b),
            Template::ChainSuccession => chain_response(t, a, b) && chain_precedence(t, a, b),
        }
    }
}

/// Validated [`Constraint::holds`] over a trace of `vocab`.
pub fn check(c: &Constraint, trace: &Trace, vocab: &Vocabulary) -> Result<bool> {
    if let Some(bad) = c.activities().find(|&x| !vocab.contains(x)) {
        return Err(Error::Argument(format!("activity id {} not in vocabulary", bad.0)));
    }
    if c.template.is_binary() && c.b.is_none() {
        return Err(Error::Argument(format!("{} constraint lacks its second activity", c.template.name())));
    }
    Ok(c.holds(&trace.activities))
}
