//! Named parameter tensors.

use rand::Rng;

use super::graph::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Ordered collection of uniquely named `f64` tensors plus the seed they
/// were initialised from.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Matrix>,
    pub seed: u64,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        ParamStore { names: Vec::new(), tensors: Vec::new(), seed }
    }

    pub fn insert(&mut self, name: &str, value: Matrix) -> Result<usize> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::Argument(format!("duplicate parameter '{name}'")));
        }
        if !value.is_finite() {
            return Err(Error::Numeric(format!("parameter '{name}' is not finite")));
        }
        self.names.push(name.to_owned());
        self.tensors.push(value);
        Ok(self.names.len() - 1)
    }

    /// Inserts a tensor drawn uniformly from `[-scale, scale]`.
    pub fn insert_uniform<R: Rng>(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<usize> {
        let data = (0..rows * cols).map(|_| rng.random_range(-scale..=scale)).collect();
        self.insert(name, Matrix::from_vec(rows, cols, data))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Index of `name`, checking its shape.
    pub fn expect(&self, name: &str, rows: usize, cols: usize) -> Result<usize> {
        let i = self.index_of(name).ok_or_else(|| Error::Format(format!("missing parameter '{name}'")))?;
        if self.tensors[i].shape() != (rows, cols) {
            return Err(Error::Format(format!(
                "parameter '{name}' has shape {:?}, expected {:?}",
                self.tensors[i].shape(),
                (rows, cols)
            )));
        }
        Ok(i)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn tensor(&self, i: usize) -> &Matrix {
        &self.tensors[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.tensors[i]
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::is_finite)
    }

    /// Copy with every entry set to zero.
    pub fn zeroed(&self) -> Self {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect(),
            seed: self.seed,
        }
    }

    /// Adds every tensor to `g` as a leaf; the returned vars follow store order.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.tensors.iter().map(|t| g.leaf(t.clone())).collect()
    }

    /// Like [`ParamStore::bind`] but without gradient tracking.
    pub fn bind_frozen(&self, g: &mut Graph) -> Vec<Var> {
        self.tensors.iter().map(|t| g.input(t.clone())).collect()
    }
}
