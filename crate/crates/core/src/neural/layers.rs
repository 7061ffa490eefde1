//! Linear and LSTM building blocks over a [`ParamStore`].

use rand::Rng;

use super::graph::{Graph, Var};
use super::params::ParamStore;
use crate::error::Result;

/// `y = x W + b`
#[derive(Debug, Clone)]
pub struct Linear {
    w: usize,
    b: usize,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn init<R: Rng>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Self> {
        let scale = 1.0 / (in_dim as f64).sqrt();
        let w = store.insert_uniform(&format!("{name}.w"), in_dim, out_dim, scale, rng)?;
        let b = store.insert_uniform(&format!("{name}.b"), 1, out_dim, scale, rng)?;
        Ok(Linear { w, b, in_dim, out_dim })
    }

    pub fn attach(store: &ParamStore, name: &str, in_dim: usize, out_dim: usize) -> Result<Self> {
        Ok(Linear {
            w: store.expect(&format!("{name}.w"), in_dim, out_dim)?,
            b: store.expect(&format!("{name}.b"), 1, out_dim)?,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(&self, g: &mut Graph, params: &[Var], x: Var) -> Var {
        let xw = g.matmul(x, params[self.w]);
        g.add_row(xw, params[self.b])
    }
}

/// Single-layer LSTM cell. Gate blocks are laid out `[input, forget, cell, output]`.
#[derive(Debug, Clone)]
pub struct LstmCell {
    w_x: usize,
    w_h: usize,
    b: usize,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn init<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let scale = 1.0 / (hidden as f64).sqrt();
        let w_x = store.insert_uniform(&format!("{name}.w_x"), input, 4 * hidden, scale, rng)?;
        let w_h = store.insert_uniform(&format!("{name}.w_h"), hidden, 4 * hidden, scale, rng)?;
        let b = store.insert_uniform(&format!("{name}.b"), 1, 4 * hidden, scale, rng)?;
        // forget-gate bias starts at one
        let bias = store.tensor_mut(b);
        for j in hidden..2 * hidden {
            bias.set(0, j, 1.0);
        }
        Ok(LstmCell { w_x, w_h, b, input, hidden })
    }

    pub fn attach(store: &ParamStore, name: &str, input: usize, hidden: usize) -> Result<Self> {
        Ok(LstmCell {
            w_x: store.expect(&format!("{name}.w_x"), input, 4 * hidden)?,
            w_h: store.expect(&format!("{name}.w_h"), hidden, 4 * hidden)?,
            b: store.expect(&format!("{name}.b"), 1, 4 * hidden)?,
            input,
            hidden,
        })
    }

    /// One step: returns the next `(h, c)`.
    pub fn step(&self, g: &mut Graph, params: &[Var], x: Var, h: Var, c: Var) -> (Var, Var) {
        let hd = self.hidden;
        let xw = g.matmul(x, params[self.w_x]);
        let hw = g.matmul(h, params[self.w_h]);
        let pre = g.add(xw, hw);
        let gates = g.add_row(pre, params[self.b]);
        let i_pre = g.slice_cols(gates, 0, hd);
        let f_pre = g.slice_cols(gates, hd, hd);
        let c_pre = g.slice_cols(gates, 2 * hd, hd);
        let o_pre = g.slice_cols(gates, 3 * hd, hd);
        let i = g.sigmoid(i_pre);
        let f = g.sigmoid(f_pre);
        let cand = g.tanh(c_pre);
        let o = g.sigmoid(o_pre);
        let keep = g.mul(f, c);
        let write = g.mul(i, cand);
        let c_next = g.add(keep, write);
        let c_act = g.tanh(c_next);
        let h_next = g.mul(o, c_act);
        (h_next, c_next)
    }

    /// Runs the cell over `steps` from a zero state and returns the final `h`.
    pub fn run(&self, g: &mut Graph, params: &[Var], steps: &[Var], batch: usize) -> Var {
        let mut h = g.constant(0.0, batch, self.hidden);
        let mut c = g.constant(0.0, batch, self.hidden);
        for &x in steps {
            (h, c) = self.step(g, params, x, h, c);
        }
        h
    }
}
