//! Counterfactual search by gradient descent in the VAE latent space.
//!
//! Starting from the posterior mean of a factual trace, every iteration
//! decodes the latent point, evaluates the hinge, elastic-net and soft
//! label-constraint terms on the EoS-masked decoder distribution, and takes
//! a fixed-size gradient step. Before the step, the hard decoding of the
//! current point is harvested when the classifier assigns it the desired
//! outcome with probability above `p` and (for [`Algorithm::RevisedPlus`])
//! it violates none of the label-specific constraints.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::declare::{hard_violations, Constraint};
use crate::error::{Error, Result};
use crate::event_log::{encode_trace, ActivityId, EncodedTrace, EventLog, Trace, Vocabulary};
use crate::neural::graph::{Graph, Var};
use crate::neural::ops::{batch_steps, constraint_penalty, mask_after_eos, sum_steps, unstack};
use crate::neural::{ClassifierModel, VaeModel};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "revised+")]
    RevisedPlus,
    #[serde(rename = "revise+")]
    RevisePlus,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RevisedPlus => "revised+",
            Algorithm::RevisePlus => "revise+",
        }
    }

    /// Label used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::RevisedPlus => "REVISED+",
            Algorithm::RevisePlus => "REVISE+",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "revised+" => Ok(Algorithm::RevisedPlus),
            "revise+" => Ok(Algorithm::RevisePlus),
            _ => Err(Error::Argument(format!("unknown algorithm '{s}' (expected revised+ or revise+)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CfConfig {
    pub lambda_hinge: f64,
    pub lambda_dist: f64,
    pub lambda_dlc: f64,
    /// L1 scale of the elastic-net distance.
    pub beta: f64,
    /// Step size.
    pub alpha: f64,
    /// Acceptance threshold on the desired-outcome probability.
    pub p: f64,
    pub max_iter: usize,
    pub desired_label: u8,
}

impl Default for CfConfig {
    fn default() -> Self {
        CfConfig {
            lambda_hinge: 1.0,
            lambda_dist: 0.05,
            lambda_dlc: 1.0,
            beta: 1.0,
            alpha: 0.05,
            p: 0.5,
            max_iter: 500,
            desired_label: 1,
        }
    }
}

impl CfConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_hinge", self.lambda_hinge),
            ("lambda_dist", self.lambda_dist),
            ("lambda_dlc", self.lambda_dlc),
            ("beta", self.beta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Argument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Argument(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if self.max_iter == 0 {
            return Err(Error::Argument("max_iter must be at least 1".into()));
        }
        if self.desired_label > 1 {
            return Err(Error::Argument(format!("desired_label must be 0 or 1, got {}", self.desired_label)));
        }
        Ok(())
    }

    /// `ζ`: +1 when the desired label is 1, -1 otherwise.
    pub fn zeta(&self) -> f64 {
        if self.desired_label == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Probability of the desired outcome given the positive-class probability.
    pub fn desired_probability(&self, positive: f64) -> f64 {
        if self.desired_label == 1 {
            positive
        } else {
            1.0 - positive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CfLoss {
    pub total: f64,
    pub hinge: f64,
    pub dist: f64,
    pub dlc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfCandidate {
    /// Hard decoding, EoS included when the decoder emitted one.
    pub activities: Vec<ActivityId>,
    pub terminated: bool,
    /// EoS-masked decoder distribution the candidate was read from. Not
    /// persisted.
    pub soft: Option<Matrix>,
    /// Positive-class probability of the hard one-hot encoding.
    pub probability: f64,
    pub loss: CfLoss,
    pub iteration: usize,
}

impl CfCandidate {
    /// Activities strictly before EoS.
    pub fn events(&self) -> &[ActivityId] {
        if self.terminated {
            &self.activities[..self.activities.len() - 1]
        } else {
            &self.activities
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfResult {
    pub algorithm: Algorithm,
    pub factual: Trace,
    /// Deduplicated accepted candidates in order of first acceptance.
    pub candidates: Vec<CfCandidate>,
    pub iterations: usize,
    /// Accepted candidates before deduplication.
    pub accepted_total: usize,
}

struct Nodes {
    total: Var,
    hinge: Var,
    dist: Var,
    dlc: Var,
    logit: Var,
}

/// Builds the counterfactual objective on per-step soft rows (`1 x K`).
fn loss_nodes(
    g: &mut Graph,
    steps: &[Var],
    factual: &Matrix,
    clf: &ClassifierModel,
    ldc: &[Constraint],
    cfg: &CfConfig,
) -> Result<Nodes> {
    let pc = clf.params.bind_frozen(g);
    let logit = clf.logit_graph(g, &pc, steps);
    let zl = g.scale(logit, -cfg.zeta());
    let margin = g.offset(zl, 1.0);
    let hinge = g.relu(margin);

    let fsteps = batch_steps(g, &[factual]);
    let deltas: Vec<Var> = fsteps.iter().zip(steps).map(|(&f, &s)| g.sub(f, s)).collect();
    let l1 = sum_steps(g, &deltas, |g, d| g.abs(d));
    let l2 = sum_steps(g, &deltas, |g, d| g.square(d));
    let l1b = g.scale(l1, cfg.beta);
    let dist = g.add(l1b, l2);

    let dlc = if ldc.is_empty() || cfg.lambda_dlc == 0.0 {
        g.constant(0.0, 1, 1)
    } else {
        constraint_penalty(g, steps, ldc)?.0
    };

    let a = g.scale(hinge, cfg.lambda_hinge);
    let b = g.scale(dist, cfg.lambda_dist);
    let mut total = g.add(a, b);
    if cfg.lambda_dlc != 0.0 {
        let c = g.scale(dlc, cfg.lambda_dlc);
        total = g.add(total, c);
    }
    Ok(Nodes { total, hinge, dist, dlc, logit })
}

/// Scalar objective node on per-step soft rows, for callers that need the
/// tape itself (gradient checks, custom optimisers).
pub fn objective_graph(
    g: &mut Graph,
    steps: &[Var],
    factual: &Matrix,
    clf: &ClassifierModel,
    ldc: &[Constraint],
    cfg: &CfConfig,
) -> Result<Var> {
    Ok(loss_nodes(g, steps, factual, clf, ldc, cfg)?.total)
}

fn read_loss(g: &Graph, n: &Nodes) -> CfLoss {
    CfLoss { total: g.scalar(n.total), hinge: g.scalar(n.hinge), dist: g.scalar(n.dist), dlc: g.scalar(n.dlc) }
}

/// Counterfactual loss of a soft matrix against the factual encoding.
pub fn cf_loss(
    soft: &Matrix,
    factual: &EncodedTrace,
    clf: &ClassifierModel,
    ldc: &[Constraint],
    cfg: &CfConfig,
) -> Result<CfLoss> {
    let shape = (clf.dims.max_len, clf.dims.vocab_size);
    if soft.shape() != shape || factual.matrix.shape() != shape {
        return Err(Error::Argument(format!(
            "soft {:?} and factual {:?} must both have shape {shape:?}",
            soft.shape(),
            factual.matrix.shape()
        )));
    }
    let mut g = Graph::new();
    let steps = batch_steps(&mut g, &[soft]);
    let n = loss_nodes(&mut g, &steps, &factual.matrix, clf, ldc, cfg)?;
    Ok(read_loss(&g, &n))
}

/// One evaluation of the objective at latent point `z`.
pub struct LatentStep {
    pub loss: CfLoss,
    pub gradient: Vec<f64>,
    /// Raw decoder distribution.
    pub probs: Matrix,
    /// EoS-masked distribution the loss is evaluated on.
    pub soft: Matrix,
    pub logit: f64,
}

/// Objective and `∇_z` at `z`: decode, mask after EoS, score.
pub fn latent_step(
    z: &[f64],
    factual: &Matrix,
    vae: &VaeModel,
    clf: &ClassifierModel,
    ldc: &[Constraint],
    cfg: &CfConfig,
) -> Result<LatentStep> {
    let mut g = Graph::new();
    let pv = vae.params.bind_frozen(&mut g);
    let zv = g.leaf(Matrix::row_vector(z.to_vec()));
    let (_, probs) = vae.decode_graph(&mut g, &pv, zv);
    let masked = mask_after_eos(&mut g, &probs);
    let n = loss_nodes(&mut g, &masked, factual, clf, ldc, cfg)?;
    let grads = g.backward(n.total);
    Ok(LatentStep {
        loss: read_loss(&g, &n),
        gradient: grads.get_or_zeros(zv, (1, z.len())).into_vec(),
        probs: unstack(&g, &probs, 0),
        soft: unstack(&g, &masked, 0),
        logit: g.scalar(n.logit),
    })
}

/// Argmax decoding with ties to the lowest id, cut after the first EoS.
pub fn hard_decode(probs: &Matrix) -> (Vec<ActivityId>, bool) {
    let eos = probs.cols() - 1;
    let mut out = Vec::new();
    for r in 0..probs.rows() {
        let row = probs.row(r);
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        out.push(ActivityId::from(best));
        if best == eos {
            return (out, true);
        }
    }
    (out, false)
}

fn check_factual(
    factual: &Trace,
    vocab: &Vocabulary,
    vae: &VaeModel,
    clf: &ClassifierModel,
    cfg: &CfConfig,
) -> Result<EncodedTrace> {
    cfg.validate()?;
    if vae.dims.vocab_size != clf.dims.vocab_size || vae.dims.max_len != clf.dims.max_len {
        return Err(Error::Argument("VAE and classifier dimensions disagree".into()));
    }
    if vocab.len() != vae.dims.vocab_size {
        return Err(Error::Argument("vocabulary size does not match the models".into()));
    }
    let x = encode_trace(factual, vocab, vae.dims.max_len)?;
    let (_, prob) = clf.predict(&x.matrix)?;
    if cfg.desired_probability(prob) > cfg.p {
        return Err(Error::Precondition(format!(
            "case '{}' is already predicted with the desired outcome (p = {prob:.4})",
            factual.case_id
        )));
    }
    Ok(x)
}

fn search(
    algorithm: Algorithm,
    factual: &Trace,
    vocab: &Vocabulary,
    vae: &VaeModel,
    clf: &ClassifierModel,
    ldc: &[Constraint],
    cfg: &CfConfig,
) -> Result<CfResult> {
    let x = check_factual(factual, vocab, vae, clf, cfg)?;
    let (mut z, _) = vae.encode(&x)?;
    let k = vae.dims.vocab_size;
    let max_len = vae.dims.max_len;
    let mut candidates: Vec<CfCandidate> = Vec::new();
    let mut seen: HashMap<Vec<ActivityId>, usize> = HashMap::new();
    let mut accepted_total = 0;

    for it in 0..cfg.max_iter {
        let step = latent_step(&z, &x.matrix, vae, clf, ldc, cfg)?;
        if !step.loss.total.is_finite() || step.gradient.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite objective at iteration {it} for case '{}' ({:?})",
                factual.case_id, step.loss
            )));
        }
        let (acts, terminated) = hard_decode(&step.probs);
        let hard = EncodedTrace::from_activities(&acts, k, max_len)?;
        let (_, prob) = clf.predict(&hard.matrix)?;
        let viable = cfg.desired_probability(prob) > cfg.p
            && (algorithm == Algorithm::RevisePlus || hard_violations(ldc, &acts) == 0);
        if viable {
            accepted_total += 1;
            let cand = CfCandidate {
                activities: acts,
                terminated,
                soft: Some(step.soft),
                probability: prob,
                loss: step.loss,
                iteration: it,
            };
            match seen.get(&cand.activities) {
                Some(&i) => {
                    if cand.loss.total < candidates[i].loss.total {
                        candidates[i] = cand;
                    }
                }
                None => {
                    seen.insert(cand.activities.clone(), candidates.len());
                    candidates.push(cand);
                }
            }
        }
        for (zi, gi) in z.iter_mut().zip(&step.gradient) {
            *zi -= cfg.alpha * gi;
        }
    }
    Ok(CfResult { algorithm, factual: factual.clone(), candidates, iterations: cfg.max_iter, accepted_total })
}

/// REVISED+: constraint-aware objective and acceptance.
pub fn generate(
    factual: &Trace,
    vocab: &Vocabulary,
    vae: &VaeModel,
    clf: &ClassifierModel,
    ldc: &[Constraint],
    cfg: &CfConfig,
) -> Result<CfResult> {
    search(Algorithm::RevisedPlus, factual, vocab, vae, clf, ldc, cfg)
}

/// REVISE+: the same loop with the constraint term removed and acceptance
/// on probability alone. Intended for a VAE trained without the
/// trace-constraint penalty.
pub fn generate_revise_plus(
    factual: &Trace,
    vocab: &Vocabulary,
    vae_plain: &VaeModel,
    clf: &ClassifierModel,
    cfg: &CfConfig,
) -> Result<CfResult> {
    let cfg = CfConfig { lambda_dlc: 0.0, ..cfg.clone() };
    search(Algorithm::RevisePlus, factual, vocab, vae_plain, clf, &[], &cfg)
}

/// Traces of `log` whose prediction is not the desired outcome.
pub fn select_factuals<'a>(log: &'a EventLog, clf: &ClassifierModel, cfg: &CfConfig) -> Result<Vec<&'a Trace>> {
    let scores = clf.scores(log)?;
    Ok(log.traces.iter().zip(scores).filter(|(_, s)| cfg.desired_probability(*s) <= cfg.p).map(|(t, _)| t).collect())
}

/// Runs `algorithm` for every factual in parallel, preserving input order.
pub fn generate_all(
    algorithm: Algorithm,
    factuals: &[&Trace],
    vocab: &Vocabulary,
    vae: &VaeModel,
    clf: &ClassifierModel,
    ldc: &[Constraint],
    cfg: &CfConfig,
) -> Result<Vec<CfResult>> {
    factuals
        .par_iter()
        .map(|t| match algorithm {
            Algorithm::RevisedPlus => generate(t, vocab, vae, clf, ldc, cfg),
            Algorithm::RevisePlus => generate_revise_plus(t, vocab, vae, clf, cfg),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CandidateRecord {
    activities: Vec<String>,
    terminated: bool,
    probability: f64,
    iteration: usize,
    loss: CfLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResultRecord {
    algorithm: Algorithm,
    factual_id: String,
    label: u8,
    factual: Vec<String>,
    iterations: usize,
    accepted_total: usize,
    candidates: Vec<CandidateRecord>,
}

fn names(acts: &[ActivityId], vocab: &Vocabulary) -> Vec<String> {
    acts.iter().map(|&a| vocab.name(a).to_owned()).collect()
}

fn ids(names: &[String], vocab: &Vocabulary, line: usize) -> Result<Vec<ActivityId>> {
    names
        .iter()
        .map(|n| {
            vocab.id(n).ok_or_else(|| Error::ArtifactMismatch(format!("line {line}: activity '{n}' not in vocabulary")))
        })
        .collect()
}

/// One JSON object per factual and line.
pub fn write_results<W: Write>(mut w: W, results: &[CfResult], vocab: &Vocabulary) -> Result<()> {
    for r in results {
        let rec = ResultRecord {
            algorithm: r.algorithm,
            factual_id: r.factual.case_id.clone(),
            label: r.factual.label,
            factual: names(&r.factual.activities, vocab),
            iterations: r.iterations,
            accepted_total: r.accepted_total,
            candidates: r
                .candidates
                .iter()
                .map(|c| CandidateRecord {
                    activities: names(&c.activities, vocab),
                    terminated: c.terminated,
                    probability: c.probability,
                    iteration: c.iteration,
                    loss: c.loss,
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads results written by [`write_results`]. Factual timestamps are not
/// stored and come back as zeros.
pub fn read_results<R: BufRead>(r: R, vocab: &Vocabulary) -> Result<Vec<CfResult>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ResultRecord =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("results line {}: {e}", i + 1)))?;
        let factual = ids(&rec.factual, vocab, i + 1)?;
        let mut candidates = Vec::with_capacity(rec.candidates.len());
        for c in rec.candidates {
            candidates.push(CfCandidate {
                activities: ids(&c.activities, vocab, i + 1)?,
                terminated: c.terminated,
                soft: None,
                probability: c.probability,
                loss: c.loss,
                iteration: c.iteration,
            });
        }
        out.push(CfResult {
            algorithm: rec.algorithm,
            factual: Trace {
                case_id: rec.factual_id,
                timestamps: vec![0; factual.len()],
                activities: factual,
                label: rec.label,
            },
            candidates,
            iterations: rec.iterations,
            accepted_total: rec.accepted_total,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{ClassifierDims, LossWeights, VaeDims};

    fn models() -> (VaeModel, ClassifierModel) {
        let vae = VaeModel::new(VaeDims { vocab_size: 3, max_len: 4, hidden: 4, latent: 2 }, LossWeights::default(), "h", 5)
            .unwrap();
        let clf = ClassifierModel::new(ClassifierDims { vocab_size: 3, max_len: 4, hidden: 3 }, "h", 6).unwrap();
        (vae, clf)
    }

    fn grid(acts: &[u32]) -> EncodedTrace {
        let a: Vec<ActivityId> = acts.iter().map(|&i| ActivityId(i)).collect();
        EncodedTrace::from_activities(&a, 3, 4).unwrap()
    }

    #[test]
    fn hinge_examples() {
        let cfg = CfConfig::default();
        let relu = |l: f64| (1.0 - cfg.zeta() * l).max(0.0);
        assert_eq!(relu(2.0), 0.0);
        assert_eq!(relu(0.5), 0.5);
        // the graph form agrees with a zero-readout classifier (logit 0)
        let (_, clf) = models();
        let clf = clf.with_zero_readout();
        let x = grid(&[0, 2]);
        let l = cf_loss(&x.matrix, &x, &clf, &[], &cfg).unwrap();
        assert_eq!(l, CfLoss { total: 1.0, hinge: 1.0, dist: 0.0, dlc: 0.0 });
    }

    #[test]
    fn elastic_net_example() {
        let (_, clf) = models();
        let cfg = CfConfig { lambda_hinge: 0.0, lambda_dist: 1.0, ..CfConfig::default() };
        // rows [A],[B] vs [B],[B]: δ has one +1 and one -1 entry
        let x = grid(&[0, 1, 2]);
        let y = grid(&[1, 1, 2]);
        let l = cf_loss(&y.matrix, &x, &clf, &[], &cfg).unwrap();
        assert_eq!(l.dist, 4.0);
        assert_eq!(l.total, 4.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (_, clf) = models();
        let x = grid(&[0, 2]);
        assert!(cf_loss(&Matrix::zeros(3, 3), &x, &clf, &[], &CfConfig::default()).is_err());
    }

    #[test]
    fn hard_decode_cuts_after_eos() {
        let m = Matrix::from_rows(&[vec![0.6, 0.3, 0.1], vec![0.1, 0.1, 0.8], vec![0.9, 0.05, 0.05]]);
        assert_eq!(hard_decode(&m), (vec![ActivityId(0), ActivityId(2)], true));
        let tie = Matrix::from_rows(&[vec![0.4, 0.4, 0.2]]);
        assert_eq!(hard_decode(&tie), (vec![ActivityId(0)], false));
    }

    #[test]
    fn config_validation() {
        assert!(CfConfig::default().validate().is_ok());
        assert!(CfConfig { p: 1.0, ..CfConfig::default() }.validate().is_err());
        assert!(CfConfig { max_iter: 0, ..CfConfig::default() }.validate().is_err());
        assert!(CfConfig { lambda_dist: -1.0, ..CfConfig::default() }.validate().is_err());
        assert_eq!("REVISE+".parse::<Algorithm>().unwrap(), Algorithm::RevisePlus);
    }
}
