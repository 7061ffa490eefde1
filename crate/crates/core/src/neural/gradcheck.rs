//! Central finite-difference checks for anything built on [`Graph`].

use super::graph::{Graph, Var};
use crate::tensor::Matrix;

pub const STEP: f64 = 1e-5;

/// Maximum relative error between the tape gradient of a scalar function
/// and central differences, over every entry of every input.
///
/// `f` receives leaves bound to `inputs` (in order) and must return a
/// `1 x 1` node. The relative error of an entry is
/// `|a - n| / max(|a| + |n|, floor)` with a floor of `1e-8` so entries with
/// vanishing gradient do not blow up.
pub fn grad_check<F>(inputs: &[Matrix], f: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let eval = |xs: &[Matrix]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.leaf(x.clone())).collect();
        let out = f(&mut g, &vars);
        g.scalar(out)
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let out = f(&mut g, &vars);
    let grads = g.backward(out);

    let mut worst: f64 = 0.0;
    let mut probe = inputs.to_vec();
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(*v, inputs[k].shape());
        for i in 0..inputs[k].len() {
            let orig = inputs[k].as_slice()[i];
            probe[k].as_mut_slice()[i] = orig + STEP;
            let up = eval(&probe);
            probe[k].as_mut_slice()[i] = orig - STEP;
            let down = eval(&probe);
            probe[k].as_mut_slice()[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic.as_slice()[i];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    worst
}
