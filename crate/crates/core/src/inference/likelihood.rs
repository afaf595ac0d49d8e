//! Conditional log-likelihood `l_n = sum_{t>p} ln sum_i a_i g(theta_t - q_i theta_{t-i})`
//! with its analytic gradient and per-observation scores.

use std::f64::consts::TAU;

use crate::circular::{bessel, AngleSeries, Family};
use crate::error::{Error, Result};
use crate::model::Sign;

/// Cosines `cos(theta_t - q_i theta_{t-i} - mu)` for `t = p+1..n`, stored
/// row-major by observation.
#[derive(Clone, Debug)]
pub(crate) struct Likelihood {
    p: usize,
    family: Family,
    cos: Vec<f64>,
}

/// Log-likelihood, gradient in `(a_1..a_{p-1}, concentration)` and
/// optionally the per-observation scores (row-major, `n_eff x p`).
#[derive(Clone, Debug)]
pub(crate) struct Evaluation {
    pub loglik: f64,
    pub gradient: Vec<f64>,
    pub scores: Option<Vec<f64>>,
}

impl Likelihood {
    pub fn new(series: &AngleSeries, signs: &[Sign], family: Family, mu: f64) -> Result<Self> {
        let p = signs.len();
        let x = series.radians();
        if p == 0 || x.len() <= p {
            return Err(Error::Contract(format!(
                "log-likelihood needs more than p = {p} observations, got {}",
                x.len()
            )));
        }
        let mut cos = Vec::with_capacity((x.len() - p) * p);
        for t in p..x.len() {
            for (i, q) in signs.iter().enumerate() {
                cos.push((x[t] - q.value() * x[t - 1 - i] - mu).cos());
            }
        }
        Ok(Self { p, family, cos })
    }

    pub fn n_eff(&self) -> usize {
        self.cos.len() / self.p
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// `l_n` at full weights `a_1..a_p`.
    pub fn value(&self, weights: &[f64], conc: f64) -> f64 {
        self.run(weights, conc, false, false).loglik
    }

    /// `l_n`, its gradient in the free parameters and optionally the scores.
    pub fn evaluate(&self, weights: &[f64], conc: f64, scores: bool) -> Evaluation {
        self.run(weights, conc, true, scores)
    }

    fn run(&self, a: &[f64], conc: f64, grad: bool, keep_scores: bool) -> Evaluation {
        let p = self.p;
        let mut loglik = 0.0;
        let mut gradient = vec![0.0; p];
        let mut scores = keep_scores.then(|| Vec::with_capacity(self.cos.len()));
        let mut g = vec![0.0; p];
        let mut dg = vec![0.0; p];
        let mut s = vec![0.0; p];
        match self.family {
            Family::WrappedCauchy => {
                let r = conc;
                let num = (1.0 - r * r) / TAU;
                for row in self.cos.chunks_exact(p) {
                    let mut f = 0.0;
                    for i in 0..p {
                        let d = 1.0 + r * r - 2.0 * r * row[i];
                        g[i] = num / d;
                        f += a[i] * g[i];
                        if grad {
                            dg[i] = (-2.0 * r * d - (1.0 - r * r) * (2.0 * r - 2.0 * row[i]))
                                / (TAU * d * d);
                        }
                    }
                    loglik += f.ln();
                    if grad {
                        score_row(a, &g, &dg, f, &mut s);
                        accumulate(&mut gradient, &s, scores.as_mut());
                    }
                }
            }
            Family::VonMises => {
                // scaled by exp(k (c_max - 1)) / (2 pi I0_scaled(k)), which
                // cancels in every score
                let k = conc;
                let log_norm = -(TAU * bessel::i0_scaled(k)).ln();
                let mean_res = if grad { bessel::a1(k) } else { 0.0 };
                for row in self.cos.chunks_exact(p) {
                    let cmax = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut f = 0.0;
                    for i in 0..p {
                        g[i] = (k * (row[i] - cmax)).exp();
                        f += a[i] * g[i];
                        if grad {
                            dg[i] = g[i] * (row[i] - mean_res);
                        }
                    }
                    loglik += f.ln() + k * (cmax - 1.0) + log_norm;
                    if grad {
                        score_row(a, &g, &dg, f, &mut s);
                        accumulate(&mut gradient, &s, scores.as_mut());
                    }
                }
            }
        }
        if !loglik.is_finite() {
            loglik = f64::NEG_INFINITY;
        }
        Evaluation {
            loglik,
            gradient,
            scores,
        }
    }
}

fn score_row(a: &[f64], g: &[f64], dg: &[f64], f: f64, s: &mut [f64]) {
    let p = a.len();
    for j in 0..p - 1 {
        s[j] = (g[j] - g[p - 1]) / f;
    }
    s[p - 1] = a.iter().zip(dg).map(|(ai, d)| ai * d).sum::<f64>() / f;
}

fn accumulate(gradient: &mut [f64], s: &[f64], scores: Option<&mut Vec<f64>>) {
    for (acc, v) in gradient.iter_mut().zip(s) {
        *acc += v;
    }
    if let Some(out) = scores {
        out.extend_from_slice(s);
    }
}
