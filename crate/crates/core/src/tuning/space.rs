//! Hyperparameter search spaces and their mapping to the unit cube.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point in a search space, keyed by dimension name.
pub type Assignment = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dim {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub scale: Scale,
    pub integer: bool,
}

impl Dim {
    pub fn linear(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
            scale: Scale::Linear,
            integer: false,
        }
    }

    pub fn log(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            scale: Scale::Log,
            ..Self::linear(name, lo, hi)
        }
    }

    pub fn integer(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            integer: true,
            ..Self::linear(name, lo, hi)
        }
    }

    /// Maps `u` in `[0, 1]` to a value, rounding integer dimensions.
    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = match self.scale {
            Scale::Linear => self.lo + u * (self.hi - self.lo),
            Scale::Log => {
                let (a, b) = (self.lo.log10(), self.hi.log10());
                10f64.powf(a + u * (b - a))
            }
        };
        let v = if self.integer { v.round() } else { v };
        v.clamp(self.lo, self.hi)
    }

    pub fn to_unit(&self, v: f64) -> f64 {
        let u = match self.scale {
            Scale::Linear => (v - self.lo) / (self.hi - self.lo),
            Scale::Log => {
                let (a, b) = (self.lo.log10(), self.hi.log10());
                (v.log10() - a) / (b - a)
            }
        };
        u.clamp(0.0, 1.0)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi && (!self.integer || v.fract() == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dim>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dim>) -> Result<Self> {
        for d in &dims {
            let ok = d.lo.is_finite() && d.hi.is_finite() && d.lo < d.hi && (d.scale == Scale::Linear || d.lo > 0.0);
            if !ok {
                return Err(Error::config(format!("invalid search dimension {d:?}")));
            }
        }
        Ok(Self { dims })
    }

    /// The boosted-tree search space, including the feature count and the
    /// minimum-starts filter.
    pub fn cycle_model() -> Self {
        Self {
            dims: vec![
                Dim::integer("n_estimators", 100.0, 2000.0),
                Dim::log("learning_rate", 1e-4, 1.0),
                Dim::integer("max_depth", 2.0, 20.0),
                Dim::log("gamma", 1e-5, 1.0),
                Dim::linear("min_child_weight", 1.0, 10.0),
                Dim::linear("subsample", 0.5, 1.0),
                Dim::linear("colsample_by_tree", 0.5, 1.0),
                Dim::integer("n_fourier", 2.0, 30.0),
                Dim::integer("min_starts", 2.0, 250.0),
            ],
        }
    }

    pub fn without(&self, name: &str) -> Self {
        Self {
            dims: self.dims.iter().filter(|d| d.name != name).cloned().collect(),
        }
    }

    pub fn dim(&self, name: &str) -> Option<&Dim> {
        self.dims.iter().find(|d| d.name == name)
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn from_unit(&self, u: &[f64]) -> Assignment {
        self.dims
            .iter()
            .zip(u)
            .map(|(d, &x)| (d.name.clone(), d.from_unit(x)))
            .collect()
    }

    pub fn to_unit(&self, a: &Assignment) -> Result<Vec<f64>> {
        self.dims
            .iter()
            .map(|d| {
                a.get(&d.name)
                    .map(|&v| d.to_unit(v))
                    .ok_or_else(|| Error::config(format!("assignment lacks `{}`", d.name)))
            })
            .collect()
    }

    pub fn contains(&self, a: &Assignment) -> bool {
        self.dims.iter().all(|d| a.get(&d.name).is_some_and(|&v| d.contains(v)))
    }
}
