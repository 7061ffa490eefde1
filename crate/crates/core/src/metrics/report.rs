//! Tabular reports in a fixed column order.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::CandidateMetrics;

pub const REPORT_FORMAT_VERSION: u32 = 1;

pub const REPORT_COLUMNS: [&str; 13] = [
    "Algorithm",
    "Log",
    "Success Rate",
    "Plausible Rate",
    "|CF|",
    "y-NN",
    "L1",
    "L2",
    "EMD",
    "L0",
    "DL Edit",
    "LCP",
    "Diversity",
];

const AVG_LABEL: &str = "(avg.)";

/// One row per (algorithm, log). `None` marks a value that does not exist,
/// e.g. distance columns without plausible counterfactuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub algorithm: String,
    pub log: String,
    pub success_rate: Option<f64>,
    pub plausible_rate: Option<f64>,
    pub length: Option<f64>,
    pub y_nn: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub emd: Option<f64>,
    pub l0: Option<f64>,
    pub dl_edit: Option<f64>,
    pub lcp: Option<f64>,
    pub diversity: Option<f64>,
}

impl MetricRow {
    fn values(&self) -> [Option<f64>; 11] {
        [
            self.success_rate,
            self.plausible_rate,
            self.length,
            self.y_nn,
            self.l1,
            self.l2,
            self.emd,
            self.l0,
            self.dl_edit,
            self.lcp,
            self.diversity,
        ]
    }

    fn from_values(algorithm: &str, log: &str, v: [Option<f64>; 11]) -> Self {
        MetricRow {
            algorithm: algorithm.to_owned(),
            log: log.to_owned(),
            success_rate: v[0],
            plausible_rate: v[1],
            length: v[2],
            y_nn: v[3],
            l1: v[4],
            l2: v[5],
            emd: v[6],
            l0: v[7],
            dl_edit: v[8],
            lcp: v[9],
            diversity: v[10],
        }
    }
}

/// Groups rows by algorithm (first-appearance order) and appends an
/// unweighted per-column mean over logs after each group. Missing values
/// are left out of the mean.
pub fn summary_rows(rows: &[MetricRow]) -> Vec<MetricRow> {
    let mut algorithms: Vec<&str> = Vec::new();
    for r in rows {
        if !algorithms.contains(&r.algorithm.as_str()) {
            algorithms.push(&r.algorithm);
        }
    }
    let mut out = Vec::new();
    for alg in algorithms {
        let group: Vec<&MetricRow> = rows.iter().filter(|r| r.algorithm == alg).collect();
        out.extend(group.iter().map(|r| (*r).clone()));
        let mut avg = [None; 11];
        for (c, slot) in avg.iter_mut().enumerate() {
            let vals: Vec<f64> = group.iter().filter_map(|r| r.values()[c]).collect();
            if !vals.is_empty() {
                *slot = Some(vals.iter().sum::<f64>() / vals.len() as f64);
            }
        }
        out.push(MetricRow::from_values(alg, AVG_LABEL, avg));
    }
    out
}

fn cell(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => format!("{x:.decimals$}"),
        None => "/".into(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// CSV with a header row; rows are written as given.
pub fn render_csv(rows: &[MetricRow]) -> String {
    let mut s = REPORT_COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        let mut fields = vec![csv_field(&r.algorithm), csv_field(&r.log)];
        fields.extend(r.values().iter().map(|v| cell(*v, 6)));
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

/// Right-aligned plain-text table with a short legend.
pub fn render_text(rows: &[MetricRow]) -> String {
    let mut table: Vec<Vec<String>> = vec![REPORT_COLUMNS.iter().map(|c| c.to_string()).collect()];
    for r in rows {
        let mut line = vec![r.algorithm.clone(), r.log.clone()];
        line.extend(r.values().iter().map(|v| cell(*v, 2)));
        table.push(line);
    }
    let widths: Vec<usize> =
        (0..REPORT_COLUMNS.len()).map(|c| table.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for (i, line) in table.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(c, v)| if c < 2 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
            .collect();
        s.push_str(cells.join("  ").trim_end());
        s.push('\n');
        if i == 0 && rows.is_empty() {
            return s;
        }
    }
    s.push('\n');
    let _ = writeln!(s, "/ : no plausible counterfactual, value undefined.");
    let _ = writeln!(
        s,
        "Distance columns average plausible counterfactuals only. Diversity is 1 / sum of pairwise EMD \
         per factual: 0 with a single counterfactual; factuals with identical counterfactuals only are left out."
    );
    s
}

/// Per-candidate CSV (one line per counterfactual).
pub fn render_candidates_csv(metrics: &[CandidateMetrics]) -> String {
    let mut s =
        String::from("factual_id,candidate,plausible,probability,|CF|,y-NN,L1,L2,EMD,L0,DL Edit,LCP\n");
    for m in metrics {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            csv_field(&m.factual_id),
            m.candidate,
            m.plausible,
            m.probability,
            m.length,
            m.y_nn,
            m.l1,
            m.l2,
            m.emd,
            m.l0,
            m.dl_edit,
            m.lcp
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(log: &str, plausible: bool) -> MetricRow {
        let d = if plausible { Some(1.0) } else { None };
        MetricRow {
            algorithm: "REVISED+".into(),
            log: log.into(),
            success_rate: Some(10.0),
            plausible_rate: Some(if plausible { 50.0 } else { 0.0 }),
            length: d,
            y_nn: d,
            l1: d,
            l2: d,
            emd: d,
            l0: d,
            dl_edit: d,
            lcp: d,
            diversity: d,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(render_csv(&[]), format!("{}\n", REPORT_COLUMNS.join(",")));
        assert_eq!(render_text(&[]).lines().count(), 1);
    }

    #[test]
    fn two_logs_give_three_rows() {
        let rows = summary_rows(&[row("a", true), row("b", false)]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].log, "(avg.)");
        assert_eq!(rows[2].plausible_rate, Some(25.0));
        assert_eq!(rows[2].l1, Some(1.0));
    }

    #[test]
    fn missing_values_print_as_slash() {
        let csv = render_csv(&[row("b", false)]);
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(line, "REVISED+,b,10.000000,0.000000,/,/,/,/,/,/,/,/,/");
        assert!(render_text(&[row("b", false)]).contains(" /"));
    }
}
