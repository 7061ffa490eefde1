//! Line-oriented constraint-set files:
//! `KIND(arg[,arg])[;n=N];weight=W;set=TDC|LDC`.
//!
//! Activity names are written by name with `%`, `,`, `(`, `)`, `;` and
//! line breaks percent-encoded.

use std::io::{BufRead, Write};

use super::{Constraint, ConstraintSet, Template};
use crate::error::{Error, Result};
use crate::event_log::Vocabulary;

fn escape(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        match ch {
            '%' | ',' | '(' | ')' | ';' | '\n' | '\r' => out.push_str(&format!("%{:02X}", ch as u32)),
            _ => out.push(ch),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = s.get(i + 1..i + 3).ok_or_else(|| Error::Format(format!("bad escape in '{s}'")))?;
            let v = u8::from_str_radix(hex, 16).map_err(|_| Error::Format(format!("bad escape in '{s}'")))?;
            out.push(v);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|e| Error::Format(e.to_string()))
}

fn format_line(c: &Constraint, set: &str, vocab: &Vocabulary) -> String {
    let mut line = format!("{}({}", c.template.name(), escape(vocab.name(c.a)));
    if let Some(b) = c.b {
        line.push(',');
        line.push_str(&escape(vocab.name(b)));
    }
    line.push(')');
    if let Some(n) = c.template.cardinality() {
        line.push_str(&format!(";n={n}"));
    }
    line.push_str(&format!(";weight={};set={set}", c.weight));
    line
}

pub fn write_constraint_set<W: Write>(set: &ConstraintSet, vocab: &Vocabulary, mut out: W) -> Result<()> {
    for (name, cs) in [("TDC", &set.tdc), ("LDC", &set.ldc)] {
        let mut sorted: Vec<&Constraint> = cs.iter().collect();
        sorted.sort_by(|a, b| a.canonical_cmp(b));
        for c in sorted {
            writeln!(out, "{}", format_line(c, name, vocab))?;
        }
    }
    Ok(())
}

fn parse_line(line: &str, vocab: &Vocabulary) -> Result<(Constraint, bool)> {
    let bad = |why: &str| Error::Format(format!("{why}: '{line}'"));
    let open = line.find('(').ok_or_else(|| bad("missing '('"))?;
    let close = line.find(')').ok_or_else(|| bad("missing ')'"))?;
    if close < open {
        return Err(bad("misplaced ')'"));
    }
    let kind = &line[..open];
    let args: Vec<&str> = line[open + 1..close].split(',').collect();
    let mut n = None;
    let mut weight = None;
    let mut set = None;
    for field in line[close + 1..].split(';').filter(|f| !f.is_empty()) {
        let (k, v) = field.split_once('=').ok_or_else(|| bad("field without '='"))?;
        match k {
            "n" => n = Some(v.parse::<u32>().map_err(|_| bad("bad cardinality"))?),
            "weight" => weight = Some(v.parse::<f64>().map_err(|_| bad("bad weight"))?),
            "set" => {
                set = Some(match v {
                    "TDC" => true,
                    "LDC" => false,
                    _ => return Err(bad("set must be TDC or LDC")),
                })
            }
            _ => return Err(bad("unknown field")),
        }
    }
    let template = Template::from_name(kind, n)?;
    let lookup = |raw: &str| -> Result<_> {
        let name = unescape(raw)?;
        vocab.id(&name).ok_or_else(|| Error::ArtifactMismatch(format!("activity '{name}' not in vocabulary")))
    };
    let c = match (template.is_binary(), args.as_slice()) {
        (false, [a]) => Constraint::unary(template, lookup(a)?)?,
        (true, [a, b]) => Constraint::binary(template, lookup(a)?, lookup(b)?)?,
        _ => return Err(bad("wrong number of arguments")),
    };
    let weight = weight.ok_or_else(|| bad("missing weight"))?;
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(bad("weight must be finite and non-negative"));
    }
    Ok((c.with_weight(weight), set.ok_or_else(|| bad("missing set"))?))
}

pub fn read_constraint_set<R: BufRead>(input: R, vocab: &Vocabulary) -> Result<ConstraintSet> {
    let mut set = ConstraintSet::default();
    for line in input.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (c, is_tdc) = parse_line(line, vocab)?;
        if is_tdc {
            set.tdc.push(c);
        } else {
            set.ldc.push(c);
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::ActivityId;

    #[test]
    fn writes_expected_lines() {
        let v = Vocabulary::from_activity_names(["A", "B,(x)"]).unwrap();
        let set = ConstraintSet {
            tdc: vec![Constraint::unary(Template::Existence(2), ActivityId(0)).unwrap()],
            ldc: vec![Constraint::binary(Template::Response, ActivityId(0), ActivityId(1)).unwrap().with_weight(0.5)],
        };
        let mut buf = Vec::new();
        write_constraint_set(&set, &v, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "Existence(A);n=2;weight=1;set=TDC\nResponse(A,B%2C%28x%29);weight=0.5;set=LDC\n");
        assert_eq!(read_constraint_set(buf.as_slice(), &v).unwrap(), set);
    }

    #[test]
    fn rejects_malformed_lines() {
        let v = Vocabulary::from_activity_names(["A", "B"]).unwrap();
        for bad in [
            "Init(A);weight=1",
            "Init(A;weight=1;set=TDC",
            "Bogus(A);weight=1;set=TDC",
            "Response(A);weight=1;set=LDC",
            "Existence(A);weight=1;set=TDC",
            "Init(A);weight=-1;set=TDC",
        ] {
            assert!(read_constraint_set(bad.as_bytes(), &v).is_err(), "{bad}");
        }
        let unknown = read_constraint_set("Init(Z);weight=1;set=TDC".as_bytes(), &v).unwrap_err();
        assert!(matches!(unknown, Error::ArtifactMismatch(_)));
    }
}
