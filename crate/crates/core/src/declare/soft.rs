//! Differentiable relaxation of Declare templates.
//!
//! Entry `p[i, x]` of a `steps x |A|` matrix is read as the (expected)
//! occurrence of activity `x` at step `i`; rows past the end of a trace are
//! zero, EoS is the last column. Every penalty is a non-negative hinge over
//! expected counts that vanishes on a one-hot matrix exactly when the
//! decoded trace satisfies the constraint. Alternate and chain templates
//! have no relaxation and report [`Error::Capability`].

use super::{Constraint, Template};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

type Grad<'a> = Option<(&'a mut Matrix, f64)>;

fn column(p: &Matrix, a: usize) -> Vec<f64> {
    (0..p.rows()).map(|i| p.get(i, a)).collect()
}

fn add_col(grad: &mut Grad<'_>, i: usize, a: usize, v: f64) {
    if let Some((g, s)) = grad.as_mut() {
        g.add_at(i, a, *s * v);
    }
}

fn lower_bound(p: &Matrix, a: usize, n: f64, grad: &mut Grad<'_>) -> f64 {
    let gap = n - column(p, a).iter().sum::<f64>();
    if gap > 0.0 {
        for i in 0..p.rows() {
            add_col(grad, i, a, -1.0);
        }
        gap
    } else {
        0.0
    }
}

fn upper_bound(p: &Matrix, a: usize, n: f64, grad: &mut Grad<'_>) -> f64 {
    let over = column(p, a).iter().sum::<f64>() - n;
    if over > 0.0 {
        for i in 0..p.rows() {
            add_col(grad, i, a, 1.0);
        }
        over
    } else {
        0.0
    }
}

// Σ_i q_a(i) · max(0, 1 − Σ_{j>i} q_b(j))
fn response(p: &Matrix, a: usize, b: usize, grad: &mut Grad<'_>) -> f64 {
    let (qa, qb) = (column(p, a), column(p, b));
    let l = qa.len();
    let mut after = vec![0.0; l];
    let mut acc = 0.0;
    for i in (0..l).rev() {
        after[i] = acc;
        acc += qb[i];
    }
    let mut value = 0.0;
    let mut active_mass = 0.0;
    for j in 0..l {
        add_col(grad, j, b, -active_mass);
        let slack = 1.0 - after[j];
        if slack > 0.0 {
            value += qa[j] * slack;
            add_col(grad, j, a, slack);
            active_mass += qa[j];
        }
    }
    value
}

// Σ_j q_b(j) · max(0, 1 − Σ_{i<j} q_a(i))
fn precedence(p: &Matrix, a: usize, b: usize, grad: &mut Grad<'_>) -> f64 {
    let (qa, qb) = (column(p, a), column(p, b));
    let l = qa.len();
    let mut before = vec![0.0; l];
    let mut acc = 0.0;
    for i in 0..l {
        before[i] = acc;
        acc += qa[i];
    }
    let mut value = 0.0;
    let mut active_mass = 0.0;
    for i in (0..l).rev() {
        add_col(grad, i, a, -active_mass);
        let slack = 1.0 - before[i];
        if slack > 0.0 {
            value += qb[i] * slack;
            add_col(grad, i, b, slack);
            active_mass += qb[i];
        }
    }
    value
}

// Σ_i q_a(i) · Σ_{j>i} q_b(j)
fn not_succession(p: &Matrix, a: usize, b: usize, grad: &mut Grad<'_>) -> f64 {
    let (qa, qb) = (column(p, a), column(p, b));
    let l = qa.len();
    let total_b: f64 = qb.iter().sum();
    let mut value = 0.0;
    let mut before_a = 0.0;
    let mut upto_b = 0.0;
    for i in 0..l {
        upto_b += qb[i];
        let after_b = total_b - upto_b;
        value += qa[i] * after_b;
        add_col(grad, i, a, after_b);
        add_col(grad, i, b, before_a);
        before_a += qa[i];
    }
    value
}

// 1 − Π_i (1 − q(i)), with d/dq(i) = Π_{j≠i} (1 − q(j))
fn presence(q: &[f64]) -> (f64, Vec<f64>) {
    let l = q.len();
    let mut prefix = vec![1.0; l + 1];
    for i in 0..l {
        prefix[i + 1] = prefix[i] * (1.0 - q[i]);
    }
    let mut d = vec![0.0; l];
    let mut suffix = 1.0;
    for i in (0..l).rev() {
        d[i] = prefix[i] * suffix;
        suffix *= 1.0 - q[i];
    }
    (1.0 - prefix[l], d)
}

fn co_existence(p: &Matrix, a: usize, b: usize, grad: &mut Grad<'_>) -> f64 {
    let (pa, da) = presence(&column(p, a));
    let (pb, db) = presence(&column(p, b));
    for i in 0..p.rows() {
        add_col(grad, i, a, (1.0 - 2.0 * pb) * da[i]);
        add_col(grad, i, b, (1.0 - 2.0 * pa) * db[i]);
    }
    pa + pb - 2.0 * pa * pb
}

// Σ_{i<L-1} q_a(i) · (rowsum(i+1) − q_a(i+1)); EoS always closes the trace.
fn last(p: &Matrix, a: usize, grad: &mut Grad<'_>) -> f64 {
    if a + 1 == p.cols() {
        return 0.0;
    }
    let mut value = 0.0;
    for i in 0..p.rows().saturating_sub(1) {
        let qa = p.get(i, a);
        let next = p.row(i + 1);
        let other: f64 = next.iter().enumerate().filter(|&(x, _)| x != a).map(|(_, v)| v).sum();
        value += qa * other;
        add_col(grad, i, a, other);
        for x in (0..p.cols()).filter(|&x| x != a) {
            add_col(grad, i + 1, x, qa);
        }
    }
    value
}

fn eval(c: &Constraint, p: &Matrix, mut grad: Grad<'_>) -> Result<f64> {
    if !c.template.is_soft_supported() {
        return Err(Error::Capability(format!("{} has no soft relaxation", c.template.name())));
    }
    let width = p.cols();
    if let Some(bad) = c.activities().find(|x| x.index() >= width) {
        return Err(Error::Argument(format!("activity id {} outside matrix width {width}", bad.0)));
    }
    let a = c.a.index();
    let b = || {
        c.b.map(|b| b.index())
            .ok_or_else(|| Error::Argument(format!("{} constraint lacks its second activity", c.template.name())))
    };
    let v = match c.template {
        Template::Existence(n) => lower_bound(p, a, n as f64, &mut grad),
        Template::Absence(n) => upper_bound(p, a, n as f64 - 1.0, &mut grad),
        Template::Exactly(n) => lower_bound(p, a, n as f64, &mut grad) + upper_bound(p, a, n as f64, &mut grad),
        Template::Init => {
            if p.rows() == 0 {
                1.0
            } else {
                add_col(&mut grad, 0, a, -1.0);
                1.0 - p.get(0, a)
            }
        }
        Template::Last => last(p, a, &mut grad),
        Template::CoExistence => co_existence(p, a, b()?, &mut grad),
        Template::Response => response(p, a, b()?, &mut grad),
        Template::Precedence => precedence(p, a, b()?, &mut grad),
        Template::Succession => {
            let b = b()?;
            response(p, a, b, &mut grad) + precedence(p, a, b, &mut grad)
        }
        Template::NotSuccession => not_succession(p, a, b()?, &mut grad),
        _ => unreachable!("filtered by is_soft_supported"),
    };
    Ok(v)
}

/// Unweighted soft penalty of one constraint.
pub fn soft_violation(c: &Constraint, p: &Matrix) -> Result<f64> {
    eval(c, p, None)
}

/// Soft penalty together with its gradient with respect to `p`.
pub fn soft_violation_grad(c: &Constraint, p: &Matrix) -> Result<(f64, Matrix)> {
    let mut g = Matrix::zeros(p.rows(), p.cols());
    let v = eval(c, p, Some((&mut g, 1.0)))?;
    Ok((v, g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftTotal {
    pub value: f64,
    /// Constraints without a relaxation, left to hard checking.
    pub skipped: usize,
}

/// `Σ_j w_j · soft_violation(c_j, p)` over the relaxable constraints.
pub fn soft_violation_total(cs: &[Constraint], p: &Matrix) -> Result<SoftTotal> {
    let mut total = SoftTotal { value: 0.0, skipped: 0 };
    for c in cs {
        match eval(c, p, None) {
            Ok(v) => total.value += c.weight * v,
            Err(Error::Capability(_)) => total.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(total)
}

/// [`soft_violation_total`] plus its gradient with respect to `p`.
pub fn soft_violation_total_grad(cs: &[Constraint], p: &Matrix) -> Result<(SoftTotal, Matrix)> {
    let mut g = Matrix::zeros(p.rows(), p.cols());
    let mut total = SoftTotal { value: 0.0, skipped: 0 };
    for c in cs {
        if !c.template.is_soft_supported() {
            total.skipped += 1;
            continue;
        }
        total.value += c.weight * eval(c, p, Some((&mut g, c.weight)))?;
    }
    Ok((total, g))
}
