use std::collections::BTreeMap;

use crate::autodiff::tape::Var;
use crate::autodiff::tensor::Tensor;
use crate::error::{contract, Result};
use crate::scalar::Scalar;

/// Named trainable tensors, iterated in sorted name order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamSet<S> {
    params: BTreeMap<String, Tensor<S>>,
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        ParamSet {
            params: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<S>) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return contract(format!("parameter name {name:?} must be nonempty without whitespace"));
        }
        if self.params.contains_key(&name) {
            return contract(format!("duplicate parameter {name}"));
        }
        self.params.insert(name, t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<S>> {
        self.params.get_mut(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor<S>> {
        match self.params.get(name) {
            Some(t) => Ok(t),
            None => contract(format!("missing parameter {name}")),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<S>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Drops every gradient buffer.
    pub fn clear_grads(&mut self) {
        for t in self.params.values_mut() {
            t.grad = None;
        }
    }

    pub fn zero_grads(&mut self) {
        for t in self.params.values_mut() {
            t.zero_grad();
        }
    }

    /// Global L2 norm over all present gradient buffers.
    pub fn grad_norm(&self) -> S {
        self.params
            .values()
            .filter_map(|t| t.grad.as_ref())
            .flat_map(|g| g.iter())
            .map(|&v| v * v)
            .sum::<S>()
            .sqrt()
    }

    /// True when every value of every parameter matches `other` exactly.
    pub fn values_eq(&self, other: &ParamSet<S>) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|((ka, a), (kb, b))| ka == kb && a.shape() == b.shape() && a.data() == b.data())
    }
}

/// Tape handles for the parameters of one [`ParamSet`].
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    vars: BTreeMap<String, Var>,
}

impl Bindings {
    pub(crate) fn insert(&mut self, name: String, v: Var) {
        self.vars.insert(name, v);
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        match self.vars.get(name) {
            Some(&v) => Ok(v),
            None => contract(format!("parameter {name} is not bound on this tape")),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), v))
    }
}
