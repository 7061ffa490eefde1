// LTL over finite traces, evaluated by recursion on trace suffixes, and the
// Declare templates written as formulas. Independent of the library checker.

use cfproc_core::declare::Template;

#[derive(Debug, Clone)]
pub enum F {
    True,
    Atom(u32),
    Not(Box<F>),
    And(Box<F>, Box<F>),
    Or(Box<F>, Box<F>),
    /// Strong next: a successor exists and satisfies the operand.
    Next(Box<F>),
    Until(Box<F>, Box<F>),
}

use F::*;

fn not(f: F) -> F {
    Not(Box::new(f))
}
fn and(a: F, b: F) -> F {
    And(Box::new(a), Box::new(b))
}
fn or(a: F, b: F) -> F {
    Or(Box::new(a), Box::new(b))
}
fn implies(a: F, b: F) -> F {
    or(not(a), b)
}
fn iff(a: F, b: F) -> F {
    and(implies(a.clone(), b.clone()), implies(b, a))
}
fn next(f: F) -> F {
    Next(Box::new(f))
}
fn weak_next(f: F) -> F {
    not(next(not(f)))
}
fn until(a: F, b: F) -> F {
    Until(Box::new(a), Box::new(b))
}
fn eventually(f: F) -> F {
    until(True, f)
}
fn globally(f: F) -> F {
    not(eventually(not(f)))
}

pub fn eval(f: &F, t: &[u32], i: usize) -> bool {
    if i >= t.len() {
        return false;
    }
    match f {
        True => true,
        Atom(a) => t[i] == *a,
        Not(g) => !eval(g, t, i),
        And(a, b) => eval(a, t, i) && eval(b, t, i),
        Or(a, b) => eval(a, t, i) || eval(b, t, i),
        Next(g) => i + 1 < t.len() && eval(g, t, i + 1),
        Until(a, b) => eval(b, t, i) || (eval(a, t, i) && i + 1 < t.len() && eval(f, t, i + 1)),
    }
}

/// Satisfaction from the first position; the empty trace satisfies only
/// formulas that hold vacuously, which no test relies on.
pub fn holds(f: &F, t: &[u32]) -> bool {
    eval(f, t, 0)
}

fn existence(n: u32, a: u32) -> F {
    if n <= 1 {
        eventually(Atom(a))
    } else {
        eventually(and(Atom(a), next(existence(n - 1, a))))
    }
}

fn response(a: u32, b: u32) -> F {
    globally(implies(Atom(a), eventually(Atom(b))))
}

fn precedence(a: u32, b: u32) -> F {
    or(until(not(Atom(b)), Atom(a)), globally(not(Atom(b))))
}

fn alt_response(a: u32, b: u32) -> F {
    globally(implies(Atom(a), next(until(not(Atom(a)), Atom(b)))))
}

fn chain_response(a: u32, b: u32) -> F {
    globally(implies(Atom(a), next(Atom(b))))
}

// The first event has no predecessor, so a leading `b` violates.
fn chain_precedence(a: u32, b: u32) -> F {
    and(not(Atom(b)), globally(implies(next(Atom(b)), Atom(a))))
}

pub fn formula(t: Template, a: u32, b: u32) -> F {
    match t {
        Template::Existence(n) => existence(n, a),
        Template::Absence(n) => not(existence(n, a)),
        Template::Exactly(n) => and(existence(n, a), not(existence(n + 1, a))),
        Template::Init => Atom(a),
        Template::Last => globally(implies(Atom(a), weak_next(Atom(a)))),
        Template::CoExistence => iff(eventually(Atom(a)), eventually(Atom(b))),
        Template::Response => response(a, b),
        Template::Precedence => precedence(a, b),
        Template::Succession => and(response(a, b), precedence(a, b)),
        Template::NotSuccession => globally(implies(Atom(a), not(eventually(Atom(b))))),
        Template::AlternateResponse => alt_response(a, b),
        Template::AlternatePrecedence => {
            and(precedence(a, b), globally(implies(Atom(b), weak_next(precedence(a, b)))))
        }
        Template::AlternateSuccession => and(alt_response(a, b), precedence(a, b)),
        Template::ChainResponse => chain_response(a, b),
        Template::ChainPrecedence => chain_precedence(a, b),
        Template::ChainSuccession => and(chain_response(a, b), chain_precedence(a, b)),
    }
}

/// All traces over `k` symbols with length in `1..=max_len`.
pub fn all_traces(k: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for t in &layer {
            for s in 0..k {
                let mut u = t.clone();
                u.push(s);
                next.push(u);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}
