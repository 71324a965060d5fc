//! Uniform periodic trapezoid rule on [0, 2π).
//!
//! For analytic periodic integrands the error decays geometrically in the
//! number of nodes, which is what makes the closed-form anchors reachable at
//! round-off level with a few dozen nodes.

use std::f64::consts::TAU;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    n_nodes: usize,
}

impl QuadratureSpec {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 4 {
            return Err(Error::Invalid(format!(
                "quadrature needs at least 4 nodes, got {n_nodes}"
            )));
        }
        Ok(Self { n_nodes })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Node angles θ_j = 2πj/n.
    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_nodes as f64;
        (0..self.n_nodes).map(move |j| TAU * j as f64 / n)
    }

    /// (cos θ_j, sin θ_j) for every node.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        self.angles().map(|t| (t.cos(), t.sin())).collect()
    }

    pub fn weight(&self) -> f64 {
        TAU / self.n_nodes as f64
    }

    /// ∫₀^{2π} g(cos θ, sin θ) dθ, with the integrand receiving the node angle's
    /// cosine and sine. Summation runs in node order so results are reproducible.
    pub fn integrate<T, F>(&self, mut g: F) -> Result<T>
    where
        T: Add<Output = T> + Mul<f64, Output = T> + Default,
        F: FnMut(f64, f64) -> Result<T>,
    {
        let mut acc = T::default();
        for (c, s) in self.nodes() {
            acc = acc + g(c, s)?;
        }
        Ok(acc * self.weight())
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { n_nodes: DEFAULT_NODES }
    }
}
