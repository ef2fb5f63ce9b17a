//! Named trainable parameters and their binding onto a tape.

use std::collections::BTreeMap;

use rand::Rng;

use super::array::Array;
use super::tape::{Tape, Var};
use crate::error::{contract, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Array,
    pub grad: Option<Array>,
}

/// Ordered `name → parameter` map plus the seed used to initialize it.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    entries: BTreeMap<String, Param>,
    seed: u64,
}

/// Tape handles for every entry of a [`ParamSet`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Contract(format!("no bound parameter named {name:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }
}

impl ParamSet {
    pub fn new(seed: u64) -> Self {
        ParamSet {
            entries: BTreeMap::new(),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn insert(&mut self, name: &str, value: Array) -> Result<()> {
        contract!(
            !self.entries.contains_key(name),
            "duplicate parameter name {name:?}"
        );
        contract!(value.is_finite(), "parameter {name:?} is not finite");
        self.entries
            .insert(name.to_string(), Param { value, grad: None });
        Ok(())
    }

    /// Adds a Glorot-uniform matrix with the given fan-in/fan-out.
    pub fn add_glorot(
        &mut self,
        name: &str,
        dims: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut impl Rng,
    ) -> Result<()> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut a = Array::zeros(dims)?;
        for v in a.data_mut() {
            *v = rng.random_range(-limit..limit);
        }
        self.insert(name, a)
    }

    pub fn add_zeros(&mut self, name: &str, dims: &[usize]) -> Result<()> {
        self.insert(name, Array::zeros(dims)?)
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.entries.get(name)
    }

    pub fn value(&self, name: &str) -> Result<&Array> {
        self.entries
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::Contract(format!("no parameter named {name:?}")))
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut Array> {
        self.entries
            .get_mut(name)
            .map(|p| &mut p.value)
            .ok_or_else(|| Error::Contract(format!("no parameter named {name:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.entries.iter()
    }

    pub(crate) fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param)> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count across entries.
    pub fn numel(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.values().all(|p| p.value.is_finite())
    }

    /// Records every entry as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        self.bind_with(tape, true)
    }

    /// Records every entry as a constant; no gradients flow into them.
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        self.bind_with(tape, false)
    }

    fn bind_with(&self, tape: &mut Tape, trainable: bool) -> Bound {
        let vars = self
            .entries
            .iter()
            .map(|(k, p)| {
                let v = if trainable {
                    tape.param(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                };
                (k.clone(), v)
            })
            .collect();
        Bound { vars }
    }

    /// Copies gradients from `tape` into the entries. Entries the loss did
    /// not reach are left without a gradient.
    pub fn pull_grads(&mut self, tape: &Tape, bound: &Bound) {
        for (name, p) in self.entries.iter_mut() {
            p.grad = bound
                .vars
                .get(name)
                .and_then(|&v| tape.grad(v))
                .cloned();
        }
    }

    pub fn clear_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad = None;
        }
    }

    /// Copy of the parameter values without gradients.
    pub fn snapshot(&self) -> ParamSet {
        let mut out = self.clone();
        out.clear_grads();
        out
    }
}
