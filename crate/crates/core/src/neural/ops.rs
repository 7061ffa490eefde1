//! Composite graph operations shared by the VAE, the classifier and the
//! counterfactual search.

use super::graph::{Graph, Var};
use crate::declare::{soft_violation_total_grad, Constraint};
use crate::error::Result;
use crate::tensor::Matrix;

/// Stacks `mats` (each `steps x width`) into per-step `batch x width`
/// untracked inputs.
pub fn batch_steps(g: &mut Graph, mats: &[&Matrix]) -> Vec<Var> {
    let steps = mats[0].rows();
    let width = mats[0].cols();
    (0..steps)
        .map(|t| {
            let mut m = Matrix::zeros(mats.len(), width);
            for (b, x) in mats.iter().enumerate() {
                m.row_mut(b).copy_from_slice(x.row(t));
            }
            g.input(m)
        })
        .collect()
}

/// Reassembles batch element `b` from per-step values.
pub fn unstack(g: &Graph, steps: &[Var], b: usize) -> Matrix {
    let width = g.value(steps[0]).cols();
    let mut m = Matrix::zeros(steps.len(), width);
    for (t, &s) in steps.iter().enumerate() {
        m.row_mut(t).copy_from_slice(g.value(s).row(b));
    }
    m
}

/// Soft analogue of EoS masking: row `t` is scaled by the probability that
/// no EoS was emitted before it. EoS is the last column.
pub fn mask_after_eos(g: &mut Graph, probs: &[Var]) -> Vec<Var> {
    let (batch, width) = g.value(probs[0]).shape();
    let mut alive = g.constant(1.0, batch, 1);
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        out.push(g.mul_col(p, alive));
        let eos = g.slice_cols(p, width - 1, 1);
        let neg = g.scale(eos, -1.0);
        let stay = g.offset(neg, 1.0);
        alive = g.mul(alive, stay);
    }
    out
}

/// Sum over the batch of the weighted soft violation of `cs`. Returns the
/// scalar node and the number of constraints without a relaxation.
pub fn constraint_penalty(g: &mut Graph, steps: &[Var], cs: &[Constraint]) -> Result<(Var, usize)> {
    let (batch, width) = g.value(steps[0]).shape();
    let mut partials: Vec<Matrix> = steps.iter().map(|_| Matrix::zeros(batch, width)).collect();
    let mut value = 0.0;
    let mut skipped = 0;
    for b in 0..batch {
        let p = unstack(g, steps, b);
        let (total, grad) = soft_violation_total_grad(cs, &p)?;
        value += total.value;
        skipped = total.skipped;
        for (t, part) in partials.iter_mut().enumerate() {
            part.row_mut(b).copy_from_slice(grad.row(t));
        }
    }
    let node = g.custom_scalar(value, steps.iter().copied().zip(partials).collect());
    Ok((node, skipped))
}

/// `Σ` over steps of `sum(x_t ⊙ y_t)`.
pub fn sum_of_products(g: &mut Graph, xs: &[Var], ys: &[Var]) -> Var {
    let mut acc: Option<Var> = None;
    for (&x, &y) in xs.iter().zip(ys) {
        let prod = g.mul(x, y);
        let s = g.sum(prod);
        acc = Some(match acc {
            Some(a) => g.add(a, s),
            None => s,
        });
    }
    acc.unwrap_or_else(|| g.constant(0.0, 1, 1))
}

/// `Σ` over steps of `f(step)` summed to a scalar.
pub fn sum_steps(g: &mut Graph, xs: &[Var], mut f: impl FnMut(&mut Graph, Var) -> Var) -> Var {
    let mut acc: Option<Var> = None;
    for &x in xs {
        let y = f(g, x);
        let s = g.sum(y);
        acc = Some(match acc {
            Some(a) => g.add(a, s),
            None => s,
        });
    }
    acc.unwrap_or_else(|| g.constant(0.0, 1, 1))
}
