use super::{ActivityId, Trace, Vocabulary};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Padded one-hot matrix (`max_len x |A|`); rows after the first EoS are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTrace {
    pub matrix: Matrix,
    /// Number of rows up to and including the first EoS.
    pub effective_length: usize,
}

impl EncodedTrace {
    /// One-hot encodes an activity sequence that either ends with its only
    /// EoS or carries no EoS at all (an unterminated decoder output).
    pub fn from_activities(activities: &[ActivityId], vocab_size: usize, max_len: usize) -> Result<Self> {
        if activities.len() > max_len {
            return Err(Error::Argument(format!(
                "trace of length {} exceeds max_len {max_len}",
                activities.len()
            )));
        }
        let eos = ActivityId::from(vocab_size - 1);
        if let Some(p) = activities.iter().position(|&a| a == eos) {
            if p + 1 != activities.len() {
                return Err(Error::Argument("EoS must be the final activity".into()));
            }
        }
        let mut matrix = Matrix::zeros(max_len, vocab_size);
        for (i, &a) in activities.iter().enumerate() {
            if a.index() >= vocab_size {
                return Err(Error::Argument(format!("activity id {} outside vocabulary", a.0)));
            }
            matrix.set(i, a.index(), 1.0);
        }
        Ok(EncodedTrace { matrix, effective_length: activities.len() })
    }

    pub fn steps(&self) -> usize {
        self.matrix.rows()
    }

    pub fn width(&self) -> usize {
        self.matrix.cols()
    }
}

/// One-hot encodes a preprocessed trace (EoS present exactly once, last).
pub fn encode_trace(trace: &Trace, vocab: &Vocabulary, max_len: usize) -> Result<EncodedTrace> {
    let eos = vocab.eos();
    let n_eos = trace.activities.iter().filter(|&&a| a == eos).count();
    if n_eos != 1 {
        return Err(Error::Argument(format!(
            "trace '{}' must contain EoS exactly once (found {n_eos})",
            trace.case_id
        )));
    }
    EncodedTrace::from_activities(&trace.activities, vocab.len(), max_len)
}

/// Hard decoding of a (soft or one-hot) matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub activities: Vec<ActivityId>,
    /// False when no row decoded to EoS and the full length was retained.
    pub terminated: bool,
}

/// Row-wise argmax (ties to the lowest id), truncated at and including the
/// first EoS.
pub fn decode_matrix(matrix: &Matrix, vocab: &Vocabulary) -> Result<Decoded> {
    if matrix.cols() == 0 {
        return Err(Error::Argument("cannot decode a zero-width matrix".into()));
    }
    if matrix.cols() != vocab.len() {
        return Err(Error::Argument(format!(
            "matrix width {} does not match vocabulary size {}",
            matrix.cols(),
            vocab.len()
        )));
    }
    let eos = vocab.eos();
    let mut activities = Vec::with_capacity(matrix.rows());
    for r in 0..matrix.rows() {
        let id = ActivityId::from(argmax(matrix.row(r)));
        activities.push(id);
        if id == eos {
            return Ok(Decoded { activities, terminated: true });
        }
    }
    Ok(Decoded { activities, terminated: false })
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
