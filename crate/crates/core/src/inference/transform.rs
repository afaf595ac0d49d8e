//! Bijection between the compact parameter space `H` and `R^p`.
//!
//! Free weights use stick-breaking logits with total budget `1 - delta_A`,
//! so `a_p = 1 - sum a_i >= delta_A`. The concentration uses a logit scaled
//! onto the family's compact interval.

use serde::{Deserialize, Serialize};

use crate::circular::Family;
use crate::error::{Error, Result};

/// Margin `delta_{A_1} = delta_{A_2}` of the weight space.
pub const WEIGHT_MARGIN: f64 = 1e-4;

/// Free parameters `(a_1, ..., a_{p-1}, concentration)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub free_weights: Vec<f64>,
    pub concentration: f64,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(s: f64) -> f64 {
    (s / (1.0 - s)).ln()
}

impl ParamVector {
    pub fn order(&self) -> usize {
        self.free_weights.len() + 1
    }

    /// All `p` weights, the last implied.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = self.free_weights.clone();
        w.push(1.0 - self.free_weights.iter().sum::<f64>());
        w
    }

    /// Whether the point lies in `H` (closed constraints).
    pub fn in_space(&self, family: Family) -> bool {
        let (lo, hi) = family.concentration_bounds();
        let total: f64 = self.free_weights.iter().sum();
        self.free_weights
            .iter()
            .all(|&a| (0.0..=1.0 - WEIGHT_MARGIN).contains(&a))
            && total <= 1.0 - WEIGHT_MARGIN + 1e-15
            && (lo..=hi).contains(&self.concentration)
    }

    /// Maps an unconstrained vector into the interior of `H`.
    pub fn from_unconstrained(u: &[f64], family: Family) -> Self {
        let p = u.len();
        let mut remaining = 1.0 - WEIGHT_MARGIN;
        let mut free = Vec::with_capacity(p - 1);
        for &ui in &u[..p - 1] {
            let a = sigmoid(ui) * remaining;
            remaining -= a;
            free.push(a);
        }
        let (lo, hi) = family.concentration_bounds();
        Self {
            free_weights: free,
            concentration: lo + (hi - lo) * sigmoid(u[p - 1]),
        }
    }

    /// Inverse of [`ParamVector::from_unconstrained`]. Points on the
    /// boundary of `H` have no preimage and give an error.
    pub fn to_unconstrained(&self, family: Family) -> Result<Vec<f64>> {
        let mut remaining = 1.0 - WEIGHT_MARGIN;
        let mut u = Vec::with_capacity(self.order());
        for &a in &self.free_weights {
            let s = a / remaining;
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::Domain(format!("weight {a} on or outside the boundary")));
            }
            u.push(logit(s));
            remaining -= a;
        }
        let (lo, hi) = family.concentration_bounds();
        let s = (self.concentration - lo) / (hi - lo);
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!(
                "concentration {} on or outside the boundary",
                self.concentration
            )));
        }
        u.push(logit(s));
        Ok(u)
    }

    /// Jacobian `d eta / d u` (rows: natural parameters, columns: `u`).
    pub(crate) fn jacobian(u: &[f64], family: Family) -> Vec<Vec<f64>> {
        let p = u.len();
        let eta = Self::from_unconstrained(u, family);
        let s: Vec<f64> = u[..p - 1].iter().map(|&x| sigmoid(x)).collect();
        let mut jac = vec![vec![0.0; p]; p];
        for i in 0..p - 1 {
            let a = eta.free_weights[i];
            jac[i][i] = a * (1.0 - s[i]);
            for k in 0..i {
                jac[i][k] = -a * s[k];
            }
        }
        let (lo, hi) = family.concentration_bounds();
        let sc = sigmoid(u[p - 1]);
        jac[p - 1][p - 1] = (hi - lo) * sc * (1.0 - sc);
        jac
    }
}
