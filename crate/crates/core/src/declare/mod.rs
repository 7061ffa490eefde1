//! Declare constraints over finite traces.
//!
//! [`Constraint::holds`] evaluates the template semantics directly,
//! [`mine`] enumerates candidates at a support threshold, and [`soft`]
//! relaxes a subset of templates into differentiable penalties over
//! probability matrices.

mod check;
mod io;
mod mine;
pub mod soft;

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::event_log::{ActivityId, Trace, Vocabulary};

pub use check::check;
pub use io::{read_constraint_set, write_constraint_set};
pub use mine::{derive_tdc_ldc, mine, mine_over, DEFAULT_MAX_CARD};
pub use soft::{soft_violation, soft_violation_grad, soft_violation_total, soft_violation_total_grad, SoftTotal};

/// Declare template, in catalogue order (unary, unordered, simple ordered,
/// ordered). The derived `Ord` is the canonical sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Template {
    Existence(u32),
    Absence(u32),
    Exactly(u32),
    Init,
    Last,
    CoExistence,
    Response,
    Precedence,
    Succession,
    NotSuccession,
    AlternateResponse,
    AlternatePrecedence,
    AlternateSuccession,
    ChainResponse,
    ChainPrecedence,
    ChainSuccession,
}

impl Template {
    pub const BINARY: [Template; 11] = [
        Template::CoExistence,
        Template::Response,
        Template::Precedence,
        Template::Succession,
        Template::NotSuccession,
        Template::AlternateResponse,
        Template::AlternatePrecedence,
        Template::AlternateSuccession,
        Template::ChainResponse,
        Template::ChainPrecedence,
        Template::ChainSuccession,
    ];

    pub fn is_binary(self) -> bool {
        !matches!(
            self,
            Template::Existence(_) | Template::Absence(_) | Template::Exactly(_) | Template::Init | Template::Last
        )
    }

    pub fn cardinality(self) -> Option<u32> {
        match self {
            Template::Existence(n) | Template::Absence(n) | Template::Exactly(n) => Some(n),
            _ => None,
        }
    }

    /// Whether a differentiable relaxation exists (see [`soft`]).
    pub fn is_soft_supported(self) -> bool {
        !matches!(
            self,
            Template::AlternateResponse
                | Template::AlternatePrecedence
                | Template::AlternateSuccession
                | Template::ChainResponse
                | Template::ChainPrecedence
                | Template::ChainSuccession
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Template::Existence(_) => "Existence",
            Template::Absence(_) => "Absence",
            Template::Exactly(_) => "Exactly",
            Template::Init => "Init",
            Template::Last => "Last",
            Template::CoExistence => "CoExistence",
            Template::Response => "Response",
            Template::Precedence => "Precedence",
            Template::Succession => "Succession",
            Template::NotSuccession => "NotSuccession",
            Template::AlternateResponse => "AlternateResponse",
            Template::AlternatePrecedence => "AlternatePrecedence",
            Template::AlternateSuccession => "AlternateSuccession",
            Template::ChainResponse => "ChainResponse",
            Template::ChainPrecedence => "ChainPrecedence",
            Template::ChainSuccession => "ChainSuccession",
        }
    }

    pub fn from_name(name: &str, n: Option<u32>) -> Result<Self> {
        let need_n = |n: Option<u32>| {
            n.filter(|&n| n >= 1)
                .ok_or_else(|| Error::Argument(format!("template {name} needs a cardinality n >= 1")))
        };
        let t = match name {
            "Existence" => Template::Existence(need_n(n)?),
            "Absence" => Template::Absence(need_n(n)?),
            "Exactly" => Template::Exactly(need_n(n)?),
            "Init" => Template::Init,
            "Last" => Template::Last,
            "CoExistence" => Template::CoExistence,
            "Response" => Template::Response,
            "Precedence" => Template::Precedence,
            "Succession" => Template::Succession,
            "NotSuccession" => Template::NotSuccession,
            "AlternateResponse" => Template::AlternateResponse,
            "AlternatePrecedence" => Template::AlternatePrecedence,
            "AlternateSuccession" => Template::AlternateSuccession,
            "ChainResponse" => Template::ChainResponse,
            "ChainPrecedence" => Template::ChainPrecedence,
            "ChainSuccession" => Template::ChainSuccession,
            other => return Err(Error::Argument(format!("unknown template '{other}'"))),
        };
        if t.cardinality().is_none() && n.is_some() {
            return Err(Error::Argument(format!("template {name} takes no cardinality")));
        }
        Ok(t)
    }
}

/// A template instantiated over one or two activities.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub template: Template,
    pub a: ActivityId,
    pub b: Option<ActivityId>,
    pub weight: f64,
}

impl Constraint {
    pub fn unary(template: Template, a: ActivityId) -> Result<Self> {
        if template.is_binary() {
            return Err(Error::Argument(format!("{} needs two activities", template.name())));
        }
        if template.cardinality() == Some(0) {
            return Err(Error::Argument("cardinality must be at least 1".into()));
        }
        Ok(Constraint { template, a, b: None, weight: 1.0 })
    }

    pub fn binary(template: Template, a: ActivityId, b: ActivityId) -> Result<Self> {
        if !template.is_binary() {
            return Err(Error::Argument(format!("{} takes a single activity", template.name())));
        }
        if a == b {
            return Err(Error::Argument(format!("{} needs two distinct activities", template.name())));
        }
        Ok(Constraint { template, a, b: Some(b), weight: 1.0 })
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn activities(&self) -> impl Iterator<Item = ActivityId> {
        std::iter::once(self.a).chain(self.b)
    }

    /// Canonical ordering: template, then activity ids.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        (self.template, self.a, self.b).cmp(&(other.template, other.a, other.b))
    }

    /// Same template instance, ignoring the weight.
    pub fn same_instance(&self, other: &Self) -> bool {
        self.canonical_cmp(other) == Ordering::Equal
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        DisplayConstraint { c: self, vocab }
    }
}

struct DisplayConstraint<'a> {
    c: &'a Constraint,
    vocab: &'a Vocabulary,
}

impl fmt::Display for DisplayConstraint<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}", self.c.template.name(), self.vocab.name(self.c.a))?;
        if let Some(b) = self.c.b {
            write!(f, ", {}", self.vocab.name(b))?;
        }
        if let Some(n) = self.c.template.cardinality() {
            write!(f, "; n={n}")?;
        }
        write!(f, ")")
    }
}

/// Trace-level constraints (hold on every trace) and label-specific
/// constraints (hold on every desired-label trace, minus the former).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    pub tdc: Vec<Constraint>,
    pub ldc: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn all(&self) -> impl Iterator<Item = &Constraint> {
        self.tdc.iter().chain(&self.ldc)
    }
}

/// Weighted number of violations per trace: `(1/N) Σ_traces Σ_j w_j φ(trace, j)`.
pub fn violation_score(constraints: &[Constraint], traces: &[&Trace]) -> Result<f64> {
    if traces.is_empty() {
        return Err(Error::Argument("violation score needs at least one trace".into()));
    }
    let total: f64 = traces
        .iter()
        .map(|t| {
            constraints.iter().filter(|c| !c.holds(&t.activities)).map(|c| c.weight).sum::<f64>()
        })
        .sum();
    Ok(total / traces.len() as f64)
}

/// Weighted violation count of one activity sequence (hard semantics).
pub fn hard_violations(constraints: &[Constraint], activities: &[ActivityId]) -> usize {
    constraints.iter().filter(|c| !c.holds(activities)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(ids: &[u32]) -> Trace {
        Trace {
            case_id: String::new(),
            activities: ids.iter().map(|&i| ActivityId(i)).collect(),
            timestamps: vec![0; ids.len()],
            label: 0,
        }
    }

    #[test]
    fn constructor_invariants() {
        assert!(Constraint::unary(Template::Response, ActivityId(0)).is_err());
        assert!(Constraint::binary(Template::Init, ActivityId(0), ActivityId(1)).is_err());
        assert!(Constraint::binary(Template::Response, ActivityId(0), ActivityId(0)).is_err());
        assert!(Constraint::unary(Template::Existence(0), ActivityId(0)).is_err());
        assert!(Template::from_name("Existence", None).is_err());
        assert!(Template::from_name("Init", Some(2)).is_err());
        assert_eq!(Template::from_name("Exactly", Some(2)).unwrap(), Template::Exactly(2));
    }

    #[test]
    fn violation_score_examples() {
        // A=0, B=1, EoS=2
        let cs = vec![
            Constraint::unary(Template::Init, ActivityId(0)).unwrap(),
            Constraint::unary(Template::Last, ActivityId(2)).unwrap(),
        ];
        let t1 = t(&[0, 1, 2]);
        let t2 = t(&[1, 0, 2]);
        assert_eq!(violation_score(&cs, &[&t1, &t2]).unwrap(), 0.5);
        assert_eq!(violation_score(&cs, &[&t1]).unwrap(), 0.0);
        let doubled: Vec<Constraint> = cs.iter().cloned().map(|c| c.with_weight(2.0)).collect();
        assert_eq!(violation_score(&doubled, &[&t1, &t2]).unwrap(), 1.0);
        assert!(violation_score(&cs, &[]).is_err());
    }

    #[test]
    fn canonical_order_follows_catalogue() {
        let mut cs = vec![
            Constraint::binary(Template::ChainSuccession, ActivityId(0), ActivityId(1)).unwrap(),
            Constraint::unary(Template::Init, ActivityId(1)).unwrap(),
            Constraint::unary(Template::Existence(2), ActivityId(0)).unwrap(),
            Constraint::unary(Template::Existence(1), ActivityId(3)).unwrap(),
        ];
        cs.sort_by(Constraint::canonical_cmp);
        let names: Vec<_> = cs.iter().map(|c| c.template).collect();
        assert_eq!(
            names,
            [Template::Existence(1), Template::Existence(2), Template::Init, Template::ChainSuccession]
        );
    }
}
