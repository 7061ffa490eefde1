//! Recurrent variational autoencoder over padded one-hot traces.
//!
//! The encoder runs an LSTM over all `max_len` rows and maps its final
//! state to `(mu, logvar)`. The decoder starts from `tanh(W z + b)` and at
//! every step reads its own previous output distribution concatenated with
//! `z`, emitting a softmax over the vocabulary.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::layers::{Linear, LstmCell};
use super::ops::{batch_steps, constraint_penalty, mask_after_eos, sum_of_products, unstack};
use super::optim::Adam;
use super::params::ParamStore;
use super::{rngs, TrainConfig};
use crate::declare::Constraint;
use crate::error::{Error, Result};
use crate::event_log::{EncodedTrace, EventLog};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeDims {
    pub vocab_size: usize,
    pub max_len: usize,
    pub hidden: usize,
    pub latent: usize,
}

impl VaeDims {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 || self.max_len == 0 || self.hidden == 0 {
            return Err(Error::Argument(format!("degenerate VAE dimensions {self:?}")));
        }
        if self.latent == 0 || self.latent > self.vocab_size * self.max_len {
            return Err(Error::Argument(format!(
                "latent size {} must lie in [1, {}]",
                self.latent,
                self.vocab_size * self.max_len
            )));
        }
        Ok(())
    }
}

/// Weights of the reconstruction, KL and trace-constraint terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub nll: f64,
    pub kl: f64,
    pub dtc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { nll: 1.0, kl: 1.0, dtc: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.nll, self.kl, self.dtc].iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Argument(format!("loss weights must be finite and non-negative: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VaeLoss {
    pub total: f64,
    pub nll: f64,
    pub kl: f64,
    pub dtc: f64,
}

#[derive(Debug, Clone)]
pub struct VaeModel {
    pub dims: VaeDims,
    pub weights: LossWeights,
    pub vocabulary_hash: String,
    pub params: ParamStore,
    encoder: LstmCell,
    mu: Linear,
    logvar: Linear,
    dec_init: Linear,
    decoder: LstmCell,
    readout: Linear,
}

/// Scalar loss nodes of one batch.
pub struct LossNodes {
    pub total: Var,
    pub nll: Var,
    pub kl: Var,
    pub dtc: Var,
}

/// `z = mu + exp(logvar / 2) ⊙ noise`
pub fn reparameterize(mu: &[f64], logvar: &[f64], noise: &[f64]) -> Vec<f64> {
    mu.iter().zip(logvar).zip(noise).map(|((m, lv), n)| m + (0.5 * lv).exp() * n).collect()
}

impl VaeModel {
    pub fn new(dims: VaeDims, weights: LossWeights, vocabulary_hash: impl Into<String>, seed: u64) -> Result<Self> {
        dims.validate()?;
        weights.validate()?;
        let (mut rng, _) = rngs(seed);
        let mut store = ParamStore::new(seed);
        let (k, h, r) = (dims.vocab_size, dims.hidden, dims.latent);
        let encoder = LstmCell::init(&mut store, "enc.lstm", k, h, &mut rng)?;
        let mu = Linear::init(&mut store, "enc.mu", h, r, &mut rng)?;
        let logvar = Linear::init(&mut store, "enc.logvar", h, r, &mut rng)?;
        let dec_init = Linear::init(&mut store, "dec.init", r, h, &mut rng)?;
        let decoder = LstmCell::init(&mut store, "dec.lstm", k + r, h, &mut rng)?;
        let readout = Linear::init(&mut store, "dec.out", h, k, &mut rng)?;
        Ok(VaeModel {
            dims,
            weights,
            vocabulary_hash: vocabulary_hash.into(),
            params: store,
            encoder,
            mu,
            logvar,
            dec_init,
            decoder,
            readout,
        })
    }

    /// Rebuilds a model around existing parameters, validating names and shapes.
    pub fn from_params(
        dims: VaeDims,
        weights: LossWeights,
        vocabulary_hash: impl Into<String>,
        params: ParamStore,
    ) -> Result<Self> {
        dims.validate()?;
        let (k, h, r) = (dims.vocab_size, dims.hidden, dims.latent);
        Ok(VaeModel {
            encoder: LstmCell::attach(&params, "enc.lstm", k, h)?,
            mu: Linear::attach(&params, "enc.mu", h, r)?,
            logvar: Linear::attach(&params, "enc.logvar", h, r)?,
            dec_init: Linear::attach(&params, "dec.init", r, h)?,
            decoder: LstmCell::attach(&params, "dec.lstm", k + r, h)?,
            readout: Linear::attach(&params, "dec.out", h, k)?,
            dims,
            weights,
            vocabulary_hash: vocabulary_hash.into(),
            params,
        })
    }

    /// Same architecture with every parameter set to zero.
    pub fn zeroed(&self) -> Self {
        let mut m = self.clone();
        m.params = self.params.zeroed();
        m
    }

    /// Encoder on per-step inputs; returns `(mu, logvar)` nodes.
    pub fn encode_graph(&self, g: &mut Graph, p: &[Var], xs: &[Var]) -> (Var, Var) {
        let batch = g.value(xs[0]).rows();
        let h = self.encoder.run(g, p, xs, batch);
        (self.mu.forward(g, p, h), self.logvar.forward(g, p, h))
    }

    /// Per-step `(log-probabilities, probabilities)`.
    pub fn decode_graph(&self, g: &mut Graph, p: &[Var], z: Var) -> (Vec<Var>, Vec<Var>) {
        let batch = g.value(z).rows();
        let init = self.dec_init.forward(g, p, z);
        let mut h = g.tanh(init);
        let mut c = g.constant(0.0, batch, self.dims.hidden);
        let mut prev = g.constant(0.0, batch, self.dims.vocab_size);
        let mut logps = Vec::with_capacity(self.dims.max_len);
        let mut probs = Vec::with_capacity(self.dims.max_len);
        for _ in 0..self.dims.max_len {
            let input = g.concat_cols(&[prev, z]);
            (h, c) = self.decoder.step(g, p, input, h, c);
            let logits = self.readout.forward(g, p, h);
            let lp = g.log_softmax(logits);
            let pr = g.exp(lp);
            logps.push(lp);
            probs.push(pr);
            prev = pr;
        }
        (logps, probs)
    }

    fn check_input(&self, x: &EncodedTrace) -> Result<()> {
        if x.matrix.shape() != (self.dims.max_len, self.dims.vocab_size) {
            return Err(Error::Argument(format!(
                "input of shape {:?} does not match model ({}, {})",
                x.matrix.shape(),
                self.dims.max_len,
                self.dims.vocab_size
            )));
        }
        Ok(())
    }

    /// Posterior mean and log-variance.
    pub fn encode(&self, x: &EncodedTrace) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let xs = batch_steps(&mut g, &[&x.matrix]);
        let (mu, lv) = self.encode_graph(&mut g, &p, &xs);
        Ok((g.value(mu).as_slice().to_vec(), g.value(lv).as_slice().to_vec()))
    }

    /// Decoder distribution, one simplex row per step.
    pub fn decode(&self, z: &[f64]) -> Result<Matrix> {
        if z.len() != self.dims.latent {
            return Err(Error::Argument(format!("latent of size {} expected, got {}", self.dims.latent, z.len())));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("latent vector is not finite".into()));
        }
        let mut g = Graph::new();
        let p = self.params.bind_frozen(&mut g);
        let zv = g.leaf(Matrix::row_vector(z.to_vec()));
        let (_, probs) = self.decode_graph(&mut g, &p, zv);
        Ok(unstack(&g, &probs, 0))
    }

    /// Loss of a single reconstruction `recon` (rows on the simplex) of `x`.
    pub fn loss(
        &self,
        x: &EncodedTrace,
        recon: &Matrix,
        mu: &[f64],
        logvar: &[f64],
        tdc: &[Constraint],
    ) -> Result<VaeLoss> {
        self.check_input(x)?;
        if recon.shape() != x.matrix.shape() {
            return Err(Error::Argument("reconstruction shape mismatch".into()));
        }
        if mu.len() != self.dims.latent || logvar.len() != self.dims.latent {
            return Err(Error::Argument("latent statistics have the wrong size".into()));
        }
        for r in 0..recon.rows() {
            let row = recon.row(r);
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 || row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::Numeric(format!("reconstruction row {r} is not a distribution")));
            }
        }
        let mut g = Graph::new();
        let xs = batch_steps(&mut g, &[&x.matrix]);
        let probs = batch_steps(&mut g, &[recon]);
        let logps: Vec<Var> = probs.iter().map(|&p| g.log(p)).collect();
        let mu_v = g.leaf(Matrix::row_vector(mu.to_vec()));
        let lv_v = g.leaf(Matrix::row_vector(logvar.to_vec()));
        let n = loss_graph(&mut g, &xs, &logps, &probs, mu_v, lv_v, tdc, &self.weights)?;
        Ok(VaeLoss { total: g.scalar(n.total), nll: g.scalar(n.nll), kl: g.scalar(n.kl), dtc: g.scalar(n.dtc) })
    }
}

/// Batch-mean VAE objective: weighted masked NLL, closed-form Gaussian KL and
/// the soft trace-constraint penalty on the EoS-masked reconstruction.
#[allow(clippy::too_many_arguments)]
pub fn loss_graph(
    g: &mut Graph,
    xs: &[Var],
    logps: &[Var],
    probs: &[Var],
    mu: Var,
    logvar: Var,
    tdc: &[Constraint],
    w: &LossWeights,
) -> Result<LossNodes> {
    let batch = g.value(mu).rows() as f64;
    // one-hot rows are zero past the effective length, masking the NLL
    let ll = sum_of_products(g, xs, logps);
    let nll = g.scale(ll, -1.0 / batch);

    let mu2 = g.square(mu);
    let var = g.exp(logvar);
    let s = g.add(mu2, var);
    let s = g.sub(s, logvar);
    let s = g.offset(s, -1.0);
    let kl_sum = g.sum(s);
    let kl = g.scale(kl_sum, 0.5 / batch);

    let dtc = if tdc.is_empty() {
        g.constant(0.0, 1, 1)
    } else {
        let masked = mask_after_eos(g, probs);
        let (pen, _) = constraint_penalty(g, &masked, tdc)?;
        g.scale(pen, 1.0 / batch)
    };

    let a = g.scale(nll, w.nll);
    let b = g.scale(kl, w.kl);
    let mut total = g.add(a, b);
    if w.dtc != 0.0 {
        let c = g.scale(dtc, w.dtc);
        total = g.add(total, c);
    }
    Ok(LossNodes { total, nll, kl, dtc })
}

/// Per-epoch mean of the minibatch losses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VaeReport {
    pub epochs: Vec<VaeLoss>,
}

/// Trains a VAE on the encoded traces of `log`, penalising soft violations
/// of `tdc` with weight `cfg.weights.dtc`.
pub fn train_vae(
    log: &EventLog,
    tdc: &[Constraint],
    hidden: usize,
    latent: usize,
    cfg: &TrainConfig,
) -> Result<(VaeModel, VaeReport)> {
    cfg.validate()?;
    if log.traces.is_empty() {
        return Err(Error::Argument("cannot train on an empty log".into()));
    }
    let data = log.encode_all()?;
    let dims = VaeDims { vocab_size: log.vocabulary.len(), max_len: log.max_len, hidden, latent };
    let mut model = VaeModel::new(dims, cfg.weights, log.vocabulary.content_hash(), cfg.seed)?;
    let (_, mut rng) = rngs(cfg.seed);
    let mut opt = Adam::new(&model.params, cfg.learning_rate, Some(cfg.clip_norm));
    let mut report = VaeReport::default();
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = VaeLoss::default();
        let mut batches = 0usize;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mats: Vec<&Matrix> = chunk.iter().map(|&i| &data[i].matrix).collect();
            let mut g = Graph::new();
            let p = model.params.bind(&mut g);
            let xs = batch_steps(&mut g, &mats);
            let (mu, lv) = model.encode_graph(&mut g, &p, &xs);
            let noise: Vec<f64> = (0..chunk.len() * latent).map(|_| StandardNormal.sample(&mut rng)).collect();
            let eps = g.leaf(Matrix::from_vec(chunk.len(), latent, noise));
            let half = g.scale(lv, 0.5);
            let std = g.exp(half);
            let spread = g.mul(std, eps);
            let z = g.add(mu, spread);
            let (logps, probs) = model.decode_graph(&mut g, &p, z);
            let n = loss_graph(&mut g, &xs, &logps, &probs, mu, lv, tdc, &cfg.weights)?;
            let total = g.scalar(n.total);
            if !total.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite VAE loss at epoch {epoch}, batch {bi} (nll {}, kl {}, dtc {})",
                    g.scalar(n.nll),
                    g.scalar(n.kl),
                    g.scalar(n.dtc)
                )));
            }
            sums.total += total;
            sums.nll += g.scalar(n.nll);
            sums.kl += g.scalar(n.kl);
            sums.dtc += g.scalar(n.dtc);
            batches += 1;
            let grads = g.backward(n.total);
            let gs: Vec<Matrix> = p
                .iter()
                .enumerate()
                .map(|(i, &v)| grads.get_or_zeros(v, model.params.tensor(i).shape()))
                .collect();
            opt.step(&mut model.params, &gs);
        }
        let nb = batches as f64;
        report.epochs.push(VaeLoss {
            total: sums.total / nb,
            nll: sums.nll / nb,
            kl: sums.kl / nb,
            dtc: sums.dtc / nb,
        });
        if !model.params.is_finite() {
            return Err(Error::Numeric(format!("parameters diverged in epoch {epoch}")));
        }
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::ActivityId;

    fn model() -> VaeModel {
        VaeModel::new(VaeDims { vocab_size: 3, max_len: 4, hidden: 5, latent: 2 }, LossWeights::default(), "h", 7)
            .unwrap()
    }

    fn x() -> EncodedTrace {
        EncodedTrace::from_activities(&[ActivityId(0), ActivityId(1), ActivityId(2)], 3, 4).unwrap()
    }

    #[test]
    fn zero_model_encodes_to_zero_mean() {
        let m = model().zeroed();
        let (mu, lv) = m.encode(&x()).unwrap();
        assert_eq!(mu, vec![0.0, 0.0]);
        assert_eq!(lv, vec![0.0, 0.0]);
    }

    #[test]
    fn encode_is_deterministic_and_checks_shape() {
        let m = model();
        assert_eq!(m.encode(&x()).unwrap(), m.encode(&x()).unwrap());
        let wrong = EncodedTrace::from_activities(&[ActivityId(0), ActivityId(3)], 4, 4).unwrap();
        assert!(matches!(m.encode(&wrong), Err(Error::Argument(_))));
    }

    #[test]
    fn reparameterize_examples() {
        assert_eq!(reparameterize(&[1.0, -2.0], &[0.3, 0.1], &[0.0, 0.0]), vec![1.0, -2.0]);
        assert_eq!(reparameterize(&[1.0], &[0.0], &[0.5]), vec![1.5]);
        assert_eq!(reparameterize(&[0.0], &[2.0 * 2f64.ln()], &[1.0]), vec![2.0]);
    }

    #[test]
    fn decode_rows_are_distributions() {
        let m = model();
        let p = m.decode(&[0.3, -1.2]).unwrap();
        for r in 0..p.rows() {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(p, m.decode(&[0.3, -1.2]).unwrap());
        assert!(m.decode(&[f64::NAN, 0.0]).is_err());
        assert!(m.decode(&[0.0]).is_err());
    }

    #[test]
    fn kl_examples() {
        let m = model();
        let recon = Matrix::filled(4, 3, 1.0 / 3.0);
        let l = m.loss(&x(), &recon, &[0.0, 0.0], &[0.0, 0.0], &[]).unwrap();
        assert_eq!(l.kl, 0.0);
        let m1 = VaeModel::new(VaeDims { vocab_size: 3, max_len: 4, hidden: 5, latent: 1 }, LossWeights::default(), "h", 7)
            .unwrap();
        let l = m1.loss(&x(), &recon, &[1.0], &[0.0], &[]).unwrap();
        assert!((l.kl - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nll_counts_only_effective_steps() {
        let m = model();
        let x = EncodedTrace::from_activities(&[ActivityId(0), ActivityId(2)], 3, 4).unwrap();
        let recon = Matrix::from_rows(&[
            vec![0.5, 0.25, 0.25],
            vec![0.25, 0.25, 0.5],
            vec![0.9, 0.05, 0.05],
            vec![0.9, 0.05, 0.05],
        ]);
        let l = m.loss(&x, &recon, &[0.0, 0.0], &[0.0, 0.0], &[]).unwrap();
        assert!((l.nll - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert_eq!(l.total, l.nll);
    }

    #[test]
    fn loss_rejects_non_distributions() {
        let m = model();
        let recon = Matrix::filled(4, 3, 0.5);
        assert!(matches!(m.loss(&x(), &recon, &[0.0, 0.0], &[0.0, 0.0], &[]), Err(Error::Numeric(_))));
    }

    #[test]
    fn dims_are_validated() {
        let bad = VaeDims { vocab_size: 3, max_len: 2, hidden: 4, latent: 7 };
        assert!(bad.validate().is_err());
        let ok = VaeDims { vocab_size: 3, max_len: 2, hidden: 4, latent: 6 };
        assert!(ok.validate().is_ok());
    }
}
