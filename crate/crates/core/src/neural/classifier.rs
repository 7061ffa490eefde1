//! Recurrent binary outcome classifier: an LSTM over the (possibly soft)
//! step rows followed by a one-logit readout of the final hidden state.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::layers::{Linear, LstmCell};
use super::ops::batch_steps;
use super::optim::Adam;
use super::params::ParamStore;
use super::{rngs, TrainConfig};
use crate::error::{Error, Result};
use crate::event_log::EventLog;
use crate::metrics::auc;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierDims {
    pub vocab_size: usize,
    pub max_len: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub dims: ClassifierDims,
    pub threshold: f64,
    pub vocabulary_hash: String,
    pub params: ParamStore,
    cell: LstmCell,
    readout: Linear,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ClassifierModel {
    pub fn new(dims: ClassifierDims, vocabulary_hash: impl Into<String>, seed: u64) -> Result<Self> {
        if dims.vocab_size == 0 || dims.max_len == 0 || dims.hidden == 0 {
            return Err(Error::Argument(format!("degenerate classifier dimensions {dims:?}")));
        }
        let (mut rng, _) = rngs(seed);
        let mut store = ParamStore::new(seed);
        let cell = LstmCell::init(&mut store, "clf.lstm", dims.vocab_size, dims.hidden, &mut rng)?;
        let readout = Linear::init(&mut store, "clf.out", dims.hidden, 1, &mut rng)?;
        Ok(ClassifierModel { dims, threshold: 0.5, vocabulary_hash: vocabulary_hash.into(), params: store, cell, readout })
    }

    pub fn from_params(
        dims: ClassifierDims,
        threshold: f64,
        vocabulary_hash: impl Into<String>,
        params: ParamStore,
    ) -> Result<Self> {
        Ok(ClassifierModel {
            cell: LstmCell::attach(&params, "clf.lstm", dims.vocab_size, dims.hidden)?,
            readout: Linear::attach(&params, "clf.out", dims.hidden, 1)?,
            dims,
            threshold,
            vocabulary_hash: vocabulary_hash.into(),
            params,
        })
    }

    /// Same model with the readout weights and bias zeroed.
    pub fn with_zero_readout(&self) -> Self {
        let mut m = self.clone();
        for name in ["clf.out.w", "clf.out.b"] {
            let i = m.params.index_of(name).expect("readout parameter");
            let t = m.params.tensor_mut(i);
            *t = Matrix::zeros(t.rows(), t.cols());
        }
        m
    }

    /// Logits (`batch x 1`) for per-step inputs.
    pub fn logit_graph(&self, g: &mut Graph, p: &[Var], steps: &[Var]) -> Var {
        let batch = g.value(steps[0]).rows();
        let h = self.cell.run(g, p, steps, batch);
        self.readout.forward(g, p, h)
    }

    /// `(logit, sigmoid(logit))` for a padded one-hot or soft matrix.
    pub fn predict(&self, m: &Matrix) -> Result<(f64, f64)> {
        if m.shape() != (self.dims.max_len, self.dims.vocab_size) {
            return Err(Error::Argument(format!(
                "input of shape {:?} does not match classifier ({}, {})",
                m.shape(),
                self.dims.max_len,
                self.dims.vocab_size
            )));
        }
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let steps = batch_steps(&mut g, &[m]);
        let logit = self.logit_graph(&mut g, &p, &steps);
        let l = g.scalar(logit);
        Ok((l, sigmoid(l)))
    }

    pub fn predict_label(&self, m: &Matrix) -> Result<u8> {
        Ok(u8::from(self.predict(m)?.1 > self.threshold))
    }

    /// Positive-class probabilities for every trace of `log`.
    pub fn scores(&self, log: &EventLog) -> Result<Vec<f64>> {
        log.encode_all()?.iter().map(|e| self.predict(&e.matrix).map(|(_, p)| p)).collect()
    }

    pub fn auc(&self, log: &EventLog) -> Result<f64> {
        let scores = self.scores(log)?;
        let labels: Vec<u8> = log.traces.iter().map(|t| t.label).collect();
        auc(&scores, &labels)
    }

    pub fn accuracy(&self, log: &EventLog) -> Result<f64> {
        if log.traces.is_empty() {
            return Err(Error::Argument("accuracy of an empty log".into()));
        }
        let scores = self.scores(log)?;
        let hits = scores.iter().zip(&log.traces).filter(|(&s, t)| u8::from(s > self.threshold) == t.label).count();
        Ok(hits as f64 / scores.len() as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    /// Per-epoch mean binary cross-entropy.
    pub epoch_losses: Vec<f64>,
    pub train_auc: f64,
}

/// Minibatch training on binary cross-entropy with logits.
pub fn train_classifier(log: &EventLog, hidden: usize, cfg: &TrainConfig) -> Result<(ClassifierModel, ClassifierReport)> {
    cfg.validate()?;
    let positives = log.traces.iter().filter(|t| t.label == 1).count();
    if positives == 0 || positives == log.traces.len() {
        return Err(Error::data("classifier training needs both outcome labels"));
    }
    let data = log.encode_all()?;
    let labels: Vec<f64> = log.traces.iter().map(|t| f64::from(t.label)).collect();
    let dims = ClassifierDims { vocab_size: log.vocabulary.len(), max_len: log.max_len, hidden };
    let mut model = ClassifierModel::new(dims, log.vocabulary.content_hash(), cfg.seed)?;
    let (_, mut rng) = rngs(cfg.seed);
    let mut opt = Adam::new(&model.params, cfg.learning_rate, Some(cfg.clip_norm));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = ClassifierReport::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mats: Vec<&Matrix> = chunk.iter().map(|&i| &data[i].matrix).collect();
            let y = Matrix::from_vec(chunk.len(), 1, chunk.iter().map(|&i| labels[i]).collect());
            let mut g = Graph::new();
            let p = model.params.bind(&mut g);
            let steps = batch_steps(&mut g, &mats);
            let logit = model.logit_graph(&mut g, &p, &steps);
            // softplus(l) - y l
            let sp = g.softplus(logit);
            let yv = g.leaf(y);
            let yl = g.mul(yv, logit);
            let per = g.sub(sp, yl);
            let s = g.sum(per);
            let loss = g.scale(s, 1.0 / chunk.len() as f64);
            let lv = g.scalar(loss);
            if !lv.is_finite() {
                return Err(Error::Numeric(format!("non-finite classifier loss in epoch {epoch}")));
            }
            sum += lv;
            batches += 1;
            let grads = g.backward(loss);
            let gs: Vec<Matrix> = p
                .iter()
                .enumerate()
                .map(|(i, &v)| grads.get_or_zeros(v, model.params.tensor(i).shape()))
                .collect();
            opt.step(&mut model.params, &gs);
        }
        report.epoch_losses.push(sum / batches as f64);
    }
    report.train_auc = model.auc(log)?;
    Ok((model, report))
}
