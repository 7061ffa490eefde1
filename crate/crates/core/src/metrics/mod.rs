//! Evaluation of counterfactual results: proximity, sparsity, plausibility,
//! diversity, y-NN and success rate, plus tabular reports.

mod distance;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counterfactual::{CfCandidate, CfResult};
use crate::declare::{hard_violations, Constraint};
use crate::error::{Error, Result};
use crate::event_log::{strip_eos, ActivityId, EncodedTrace, EventLog, Vocabulary};
use crate::neural::ClassifierModel;

pub use distance::{diversity, dl_edit, emd, emd_histograms, histogram, lcp, norms, Norms};
pub use report::{render_candidates_csv, render_csv, render_text, summary_rows, MetricRow, REPORT_COLUMNS, REPORT_FORMAT_VERSION};

/// Area under the ROC curve (Mann-Whitney statistic, ties counted half).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Argument("scores and labels differ in length".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Argument("AUC needs both labels".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] == 1 {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Reference traces (events before EoS) with their predicted labels, in
/// case-id order.
#[derive(Debug, Clone)]
pub struct NeighbourIndex {
    traces: Vec<(Vec<ActivityId>, u8)>,
}

impl NeighbourIndex {
    pub fn new(reference: &EventLog, clf: &ClassifierModel) -> Result<Self> {
        let eos = reference.vocabulary.eos();
        let scores = clf.scores(reference)?;
        let mut rows: Vec<(&str, Vec<ActivityId>, u8)> = reference
            .traces
            .iter()
            .zip(scores)
            .map(|(t, s)| (t.case_id.as_str(), t.events_before(eos).to_vec(), u8::from(s > clf.threshold)))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        Ok(NeighbourIndex { traces: rows.into_iter().map(|(_, a, l)| (a, l)).collect() })
    }

    pub fn from_labelled(traces: Vec<(Vec<ActivityId>, u8)>) -> Self {
        NeighbourIndex { traces }
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Fraction of the `k` nearest references (by edit distance, ties by
    /// index order) whose predicted label equals `label`.
    pub fn y_nn(&self, cf: &[ActivityId], label: u8, k: usize) -> Result<f64> {
        if k == 0 || k > self.traces.len() {
            return Err(Error::Argument(format!("k = {k} with {} reference traces", self.traces.len())));
        }
        let mut d: Vec<(usize, usize)> =
            self.traces.iter().enumerate().map(|(i, (t, _))| (dl_edit(cf, t), i)).collect();
        d.sort_unstable();
        let same = d[..k].iter().filter(|&&(_, i)| self.traces[i].1 == label).count();
        Ok(same as f64 / k as f64)
    }
}

/// y-NN of a counterfactual against a reference log, labelling both with
/// the classifier.
pub fn y_nn(cf: &[ActivityId], reference: &EventLog, clf: &ClassifierModel, k: usize) -> Result<f64> {
    let index = NeighbourIndex::new(reference, clf)?;
    let eos = reference.vocabulary.eos();
    let events = strip_eos(cf, eos);
    let mut acts = events.to_vec();
    acts.push(eos);
    let enc = EncodedTrace::from_activities(&acts, clf.dims.vocab_size, clf.dims.max_len)?;
    let label = u8::from(clf.predict(&enc.matrix)?.1 > clf.threshold);
    index.y_nn(events, label, k)
}

/// `100 · accepted / iterations`, pooled over results.
pub fn success_rate(results: &[CfResult]) -> f64 {
    let iters: usize = results.iter().map(|r| r.iterations).sum();
    if iters == 0 {
        return 0.0;
    }
    100.0 * results.iter().map(|r| r.accepted_total).sum::<usize>() as f64 / iters as f64
}

pub fn is_plausible(c: &CfCandidate, tdc: &[Constraint], ldc: &[Constraint]) -> bool {
    hard_violations(tdc, &c.activities) == 0 && hard_violations(ldc, &c.activities) == 0
}

/// Percentage of stored candidates without any hard violation of
/// `tdc ∪ ldc`; 0 when there are no candidates.
pub fn plausible_rate(results: &[CfResult], tdc: &[Constraint], ldc: &[Constraint]) -> f64 {
    let all: Vec<&CfCandidate> = results.iter().flat_map(|r| &r.candidates).collect();
    if all.is_empty() {
        return 0.0;
    }
    100.0 * all.iter().filter(|c| is_plausible(c, tdc, ldc)).count() as f64 / all.len() as f64
}

/// Metrics of one candidate against its factual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateMetrics {
    pub factual_id: String,
    pub candidate: usize,
    pub plausible: bool,
    pub probability: f64,
    /// Events strictly before EoS.
    pub length: usize,
    pub y_nn: f64,
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub emd: f64,
    pub dl_edit: usize,
    pub lcp: usize,
}

/// Everything needed to score candidates.
pub struct EvalContext<'a> {
    pub vocabulary: &'a Vocabulary,
    pub max_len: usize,
    pub classifier: &'a ClassifierModel,
    pub neighbours: &'a NeighbourIndex,
    pub k: usize,
    pub tdc: &'a [Constraint],
    pub ldc: &'a [Constraint],
}

impl EvalContext<'_> {
    pub fn candidate_metrics(&self, r: &CfResult, i: usize) -> Result<CandidateMetrics> {
        let c = &r.candidates[i];
        let eos = self.vocabulary.eos();
        let k = self.vocabulary.len();
        let factual = EncodedTrace::from_activities(&r.factual.activities, k, self.max_len)?;
        let cf = EncodedTrace::from_activities(&c.activities, k, self.max_len)?;
        let n = norms(&factual.matrix, &cf.matrix)?;
        let f_events = r.factual.events_before(eos);
        let label = u8::from(c.probability > self.classifier.threshold);
        Ok(CandidateMetrics {
            factual_id: r.factual.case_id.clone(),
            candidate: i,
            plausible: is_plausible(c, self.tdc, self.ldc),
            probability: c.probability,
            length: c.events().len(),
            y_nn: self.neighbours.y_nn(c.events(), label, self.k)?,
            l0: n.l0,
            l1: n.l1,
            l2: n.l2,
            emd: emd(f_events, c.events()),
            dl_edit: dl_edit(f_events, c.events()),
            lcp: lcp(f_events, c.events()),
        })
    }

    /// Per-candidate metrics for all results, computed in parallel.
    pub fn all_candidate_metrics(&self, results: &[CfResult]) -> Result<Vec<CandidateMetrics>> {
        let jobs: Vec<(usize, usize)> =
            results.iter().enumerate().flat_map(|(ri, r)| (0..r.candidates.len()).map(move |ci| (ri, ci))).collect();
        jobs.par_iter().map(|&(ri, ci)| self.candidate_metrics(&results[ri], ci)).collect()
    }

    /// One report row: rates over all candidates, distances averaged over
    /// plausible ones, diversity averaged over factuals with a finite value.
    pub fn summarize(&self, algorithm: &str, log: &str, results: &[CfResult]) -> Result<MetricRow> {
        let metrics = self.all_candidate_metrics(results)?;
        let plausible: Vec<&CandidateMetrics> = metrics.iter().filter(|m| m.plausible).collect();
        let mean = |f: &dyn Fn(&CandidateMetrics) -> f64| -> Option<f64> {
            if plausible.is_empty() {
                None
            } else {
                Some(plausible.iter().map(|m| f(m)).sum::<f64>() / plausible.len() as f64)
            }
        };
        let divs: Vec<f64> = results
            .iter()
            .filter_map(|r| {
                let ps: Vec<&[ActivityId]> =
                    r.candidates.iter().filter(|c| is_plausible(c, self.tdc, self.ldc)).map(|c| c.events()).collect();
                if ps.is_empty() {
                    None
                } else {
                    Some(diversity(&ps))
                }
            })
            .filter(|d| d.is_finite())
            .collect();
        Ok(MetricRow {
            algorithm: algorithm.to_owned(),
            log: log.to_owned(),
            success_rate: Some(success_rate(results)),
            plausible_rate: Some(plausible_rate(results, self.tdc, self.ldc)),
            length: mean(&|m| m.length as f64),
            y_nn: mean(&|m| m.y_nn),
            l1: mean(&|m| m.l1),
            l2: mean(&|m| m.l2),
            emd: mean(&|m| m.emd),
            l0: mean(&|m| m.l0),
            dl_edit: mean(&|m| m.dl_edit as f64),
            lcp: mean(&|m| m.lcp as f64),
            diversity: if plausible.is_empty() || divs.is_empty() {
                None
            } else {
                Some(divs.iter().sum::<f64>() / divs.len() as f64)
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterfactual::{Algorithm, CfLoss};
    use crate::event_log::Trace;

    fn ids(v: &[u32]) -> Vec<ActivityId> {
        v.iter().map(|&i| ActivityId(i)).collect()
    }

    fn cand(acts: &[u32]) -> CfCandidate {
        CfCandidate {
            activities: ids(acts),
            terminated: true,
            soft: None,
            probability: 0.9,
            loss: CfLoss::default(),
            iteration: 0,
        }
    }

    fn result(accepted: usize, iterations: usize, cands: Vec<CfCandidate>) -> CfResult {
        CfResult {
            algorithm: Algorithm::RevisedPlus,
            factual: Trace { case_id: "f".into(), activities: ids(&[0, 2]), timestamps: vec![0, 0], label: 0 },
            candidates: cands,
            iterations,
            accepted_total: accepted,
        }
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.9], &[0, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.1], &[0, 1]).unwrap(), 0.0);
        assert_eq!(auc(&[0.5, 0.5], &[0, 1]).unwrap(), 0.5);
        assert!(auc(&[0.5], &[1]).is_err());
    }

    #[test]
    fn y_nn_examples() {
        let refs: Vec<(Vec<ActivityId>, u8)> = (0..5).map(|i| (ids(&[i % 2]), u8::from(i != 4))).collect();
        let idx = NeighbourIndex::from_labelled(refs.clone());
        assert_eq!(idx.y_nn(&ids(&[0]), 1, 5).unwrap(), 0.8);
        let all = NeighbourIndex::from_labelled(refs.into_iter().map(|(a, _)| (a, 1)).collect());
        assert_eq!(all.y_nn(&ids(&[0]), 1, 5).unwrap(), 1.0);
        assert!(all.y_nn(&ids(&[0]), 1, 6).is_err());
    }

    #[test]
    fn success_rate_examples() {
        assert_eq!(success_rate(&[result(2, 100, vec![])]), 2.0);
        assert_eq!(success_rate(&[result(0, 100, vec![])]), 0.0);
        assert_eq!(success_rate(&[result(50, 50, vec![])]), 100.0);
    }

    #[test]
    fn plausible_rate_counts_trace_constraints() {
        // Init(A) as the only trace constraint; A=0, B=1, EoS=2
        let tdc = vec![Constraint::unary(crate::declare::Template::Init, ActivityId(0)).unwrap()];
        let ok = result(2, 10, vec![cand(&[0, 2]), cand(&[0, 1, 2])]);
        assert_eq!(plausible_rate(&[ok.clone()], &tdc, &[]), 100.0);
        let bad = result(1, 10, vec![cand(&[1, 2])]);
        assert_eq!(plausible_rate(&[bad.clone()], &tdc, &[]), 0.0);
        assert_eq!(plausible_rate(&[ok.clone(), bad.clone()], &tdc, &[]), plausible_rate(&[bad, ok], &tdc, &[]));
    }
}
