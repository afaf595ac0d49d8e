//! Maximum-likelihood estimation for a fixed sign vector, exhaustive search
//! over sign vectors, information criteria, order selection and sandwich
//! covariance.
//!
//! The likelihood is maximized in an unconstrained reparametrization of the
//! compact space `H` (see [`transform`]): a multistart simplex search
//! followed by a damped Newton polish on the analytic gradient.

mod likelihood;
pub mod nelder_mead;
pub mod transform;

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::{bessel, AngleSeries, BindingDensity, Family};
use crate::correlation;
use crate::error::{Error, Result};
use crate::model::{MtdArModel, Sign};

use likelihood::Likelihood;
use nelder_mead::NelderMeadOptions;
pub use transform::{ParamVector, WEIGHT_MARGIN};

/// Largest order accepted by [`fit`] (2^p sign vectors are enumerated).
pub const MAX_ENUMERATED_ORDER: usize = 12;

/// Minimum series length per unit of order.
pub const MIN_OBS_PER_ORDER: usize = 10;

/// Information criterion used for order selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            other => Err(Error::Domain(format!("unknown criterion `{other}`"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Seeds the random starting points.
    pub seed: u64,
    /// Total number of starts, the moment-matched one included.
    pub starts: usize,
    pub nelder_mead: NelderMeadOptions,
    /// Convergence when `||grad_u l_n||_inf / n_eff` falls below this.
    pub gradient_tol: f64,
    pub max_newton_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 5,
            nelder_mead: NelderMeadOptions {
                max_evals: 3000,
                f_tol: 1e-8,
                x_tol: 1e-4,
                initial_step: 0.5,
            },
            gradient_tol: 1e-6,
            max_newton_iterations: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub loglik: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub starts: Vec<StartSummary>,
    pub newton_iterations: usize,
    /// `||grad_u l_n||_inf / n_eff` at the returned point.
    pub gradient_norm: f64,
}

/// Log-likelihood of one sign vector examined by [`fit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub signs: Vec<Sign>,
    pub loglik: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub order: usize,
    pub params: ParamVector,
    /// `a_1..a_p`.
    pub weights: Vec<f64>,
    pub signs: Vec<Sign>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    /// Criteria with the `p` signs counted as parameters too; reported only.
    pub aic_counting_signs: f64,
    pub bic_counting_signs: f64,
    /// Sandwich covariance `I^{-1} J I^{-1} / n_eff` of
    /// `(a_1..a_{p-1}, concentration)`, row-major. Absent when the observed
    /// information is not positive definite.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub std_errors: Option<Vec<f64>>,
    pub covariance_reliable: bool,
    pub converged: bool,
    pub n: usize,
    pub n_eff: usize,
    pub trace: OptimizerTrace,
    /// Filled by [`fit`]: every sign vector in enumeration order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Candidate>,
}

impl FitResult {
    pub fn concentration(&self) -> f64 {
        self.params.concentration
    }

    /// First mean resultant length of the fitted binding density (`rho`
    /// for the wrapped Cauchy, `I_1(kappa)/I_0(kappa)` for the von Mises).
    pub fn mean_resultant_length(&self) -> f64 {
        match self.family {
            Family::WrappedCauchy => self.params.concentration,
            Family::VonMises => bessel::a1(self.params.concentration),
        }
    }

    pub fn criterion(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic,
        }
    }

    pub fn model(&self) -> Result<MtdArModel> {
        MtdArModel::new(
            self.weights.clone(),
            self.signs.clone(),
            BindingDensity::new(self.family, self.params.concentration)?,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Turns a non-convergence error carrying a best point into that point
/// (with `converged = false`); other outcomes pass through.
pub fn best_effort(r: Result<FitResult>) -> Result<FitResult> {
    match r {
        Err(Error::Optimization { best: Some(b), .. }) => Ok(*b),
        other => other,
    }
}

/// `l_n` summed over `t = p+1..n`; the first `p` observations only condition.
pub fn log_likelihood(series: &AngleSeries, model: &MtdArModel) -> Result<f64> {
    let b = model.binding();
    let lik = Likelihood::new(series, model.signs(), b.family(), b.mean_direction())?;
    Ok(lik.value(model.weights(), b.concentration()))
}

fn check_length(series: &AngleSeries, p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::Contract("order p must be >= 1".into()));
    }
    if series.len() < MIN_OBS_PER_ORDER * p {
        return Err(Error::Contract(format!(
            "fitting order {p} needs at least {} observations, got {}",
            MIN_OBS_PER_ORDER * p,
            series.len()
        )));
    }
    Ok(())
}

fn sign_index(signs: &[Sign]) -> u64 {
    signs
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == Sign::Minus)
        .map(|(i, _)| 1u64 << i)
        .sum()
}

/// MLE of `(a_1..a_{p-1}, concentration)` for the given signs with default
/// options.
pub fn fit_given_q(
    series: &AngleSeries,
    p: usize,
    signs: &[Sign],
    family: Family,
) -> Result<FitResult> {
    fit_given_q_with(series, p, signs, family, &FitOptions::default())
}

pub fn fit_given_q_with(
    series: &AngleSeries,
    p: usize,
    signs: &[Sign],
    family: Family,
    opts: &FitOptions,
) -> Result<FitResult> {
    if signs.len() != p {
        return Err(Error::Contract(format!("{} signs given for order {p}", signs.len())));
    }
    check_length(series, p)?;
    let lik = Likelihood::new(series, signs, family, 0.0)?;
    let n_eff = lik.n_eff() as f64;
    let objective = |u: &[f64]| {
        let eta = ParamVector::from_unconstrained(u, family);
        -lik.value(&eta.weights(), eta.concentration) / n_eff
    };

    let mut starts = Vec::with_capacity(opts.starts.max(1));
    starts.push(moment_start(series, p, family)?);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(sign_index(signs));
    while starts.len() < opts.starts.max(1) {
        starts.push(random_start(&mut rng, p, family)?);
    }

    let mut summaries = Vec::with_capacity(starts.len());
    let mut best: Option<(Vec<f64>, f64)> = None;
    for u0 in &starts {
        let r = nelder_mead::minimize(objective, u0, opts.nelder_mead);
        summaries.push(StartSummary {
            loglik: -r.f * n_eff,
            evaluations: r.evals,
            converged: r.converged,
        });
        if r.f.is_finite() && best.as_ref().is_none_or(|(_, f)| r.f < *f) {
            best = Some((r.x, r.f));
        }
    }
    let signs_i8: Vec<i8> = signs.iter().map(|s| s.as_i8()).collect();
    let Some((u, _)) = best else {
        return Err(Error::Optimization {
            signs: signs_i8,
            best_loglik: f64::NEG_INFINITY,
            best: None,
        });
    };

    let (u, iterations, grad_norm) = newton_polish(&lik, u, opts);
    let converged = grad_norm < opts.gradient_tol;
    let params = ParamVector::from_unconstrained(&u, family);
    let result = assemble(
        &lik,
        series.len(),
        signs,
        params,
        converged,
        OptimizerTrace {
            starts: summaries,
            newton_iterations: iterations,
            gradient_norm: grad_norm,
        },
    );
    if converged {
        Ok(result)
    } else {
        Err(Error::Optimization {
            signs: signs_i8,
            best_loglik: result.loglik,
            best: Some(Box::new(result)),
        })
    }
}

fn moment_start(series: &AngleSeries, p: usize, family: Family) -> Result<Vec<f64>> {
    let r1 = correlation::sample_cacf(series, 1).map(|r| r[1]).unwrap_or(0.0);
    let rho = r1.abs().sqrt().clamp(0.05, 0.95);
    let conc = match family {
        Family::WrappedCauchy => rho,
        Family::VonMises => bessel::a1_inverse(rho).clamp(0.05, 300.0),
    };
    ParamVector {
        free_weights: vec![1.0 / p as f64; p - 1],
        concentration: conc,
    }
    .to_unconstrained(family)
}

fn random_start(rng: &mut ChaCha8Rng, p: usize, family: Family) -> Result<Vec<f64>> {
    let e: Vec<f64> = (0..p).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    let w: Vec<f64> = e.iter().map(|x| 0.9 * x / total + 0.1 / p as f64).collect();
    let conc = match family {
        Family::WrappedCauchy => rng.random_range(0.05..0.95),
        Family::VonMises => rng.random_range(0.05f64.ln()..50f64.ln()).exp(),
    };
    ParamVector {
        free_weights: w[..p - 1].to_vec(),
        concentration: conc,
    }
    .to_unconstrained(family)
}

/// `grad_u l_n = J^T grad_eta l_n`, with `l_n` at `u`.
fn gradient_u(lik: &Likelihood, u: &[f64]) -> (f64, Vec<f64>) {
    let family = lik.family();
    let eta = ParamVector::from_unconstrained(u, family);
    let ev = lik.evaluate(&eta.weights(), eta.concentration, false);
    let jac = ParamVector::jacobian(u, family);
    let p = u.len();
    let g = (0..p)
        .map(|k| (0..p).map(|i| jac[i][k] * ev.gradient[i]).sum())
        .collect();
    (ev.loglik, g)
}

fn fd_hessian(p: usize, x: &[f64], step: impl Fn(f64) -> f64, grad: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(p, p);
    for k in 0..p {
        let hk = step(x[k]);
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[k] += hk;
        dn[k] -= hk;
        let (gu, gd) = (grad(&up), grad(&dn));
        for i in 0..p {
            h[(i, k)] = (gu[i] - gd[i]) / (2.0 * hk);
        }
    }
    (&h + h.transpose()) * 0.5
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton ascent in `u` until the scaled gradient is below
/// tolerance. Returns the point, iteration count and final scaled norm.
fn newton_polish(lik: &Likelihood, mut u: Vec<f64>, opts: &FitOptions) -> (Vec<f64>, usize, f64) {
    let p = u.len();
    let n_eff = lik.n_eff() as f64;
    let (mut ll, mut g) = gradient_u(lik, &u);
    let mut iterations = 0;
    while iterations < opts.max_newton_iterations && sup_norm(&g) / n_eff >= opts.gradient_tol {
        iterations += 1;
        let h = fd_hessian(p, &u, |x| 1e-5 * x.abs().max(1.0), |x| gradient_u(lik, x).1);
        let neg = -h;
        let gv = DVector::from_column_slice(&g);
        let scale = neg.diagonal().abs().max().max(1e-12);
        let mut lambda = 0.0;
        let dir = loop {
            let m = &neg + DMatrix::identity(p, p) * lambda;
            if let Some(ch) = Cholesky::new(m) {
                break ch.solve(&gv);
            }
            lambda = if lambda == 0.0 { 1e-8 * scale } else { lambda * 10.0 };
        };
        let cap = sup_norm(dir.as_slice()).max(1e-300);
        let mut t = (5.0 / cap).min(1.0);
        let mut moved = false;
        while t > 1e-10 {
            let cand: Vec<f64> = u.iter().zip(dir.iter()).map(|(a, d)| a + t * d).collect();
            let (lc, gc) = gradient_u(lik, &cand);
            if lc.is_finite() && lc >= ll - 1e-12 * ll.abs() {
                moved = lc > ll || sup_norm(&gc) < sup_norm(&g);
                if moved {
                    u = cand;
                    ll = lc;
                    g = gc;
                }
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let norm = sup_norm(&g) / n_eff;
    (u, iterations, norm)
}

fn assemble(
    lik: &Likelihood,
    n: usize,
    signs: &[Sign],
    params: ParamVector,
    converged: bool,
    trace: OptimizerTrace,
) -> FitResult {
    let p = lik.order();
    let family = lik.family();
    let weights = params.weights();
    let ev = lik.evaluate(&weights, params.concentration, true);
    let loglik = ev.loglik;
    let (covariance, std_errors) = match sandwich(lik, &params, ev.scores.as_deref().unwrap_or(&[])) {
        Some(c) => {
            let se = (0..p).map(|i| c[(i, i)].max(0.0).sqrt()).collect();
            let rows = (0..p).map(|i| (0..p).map(|j| c[(i, j)]).collect()).collect();
            (Some(rows), Some(se))
        }
        None => (None, None),
    };
    let pf = p as f64;
    let ln_n = (n as f64).ln();
    FitResult {
        family,
        order: p,
        params,
        weights,
        signs: signs.to_vec(),
        loglik,
        aic: -2.0 * loglik + 2.0 * pf,
        bic: -2.0 * loglik + pf * ln_n,
        aic_counting_signs: -2.0 * loglik + 4.0 * pf,
        bic_counting_signs: -2.0 * loglik + 2.0 * pf * ln_n,
        covariance_reliable: covariance.is_some(),
        covariance,
        std_errors,
        converged,
        n,
        n_eff: lik.n_eff(),
        trace,
        candidates: Vec::new(),
    }
}

/// `I^{-1} J I^{-1} / n_eff` with `I` the negative Hessian of `l_n / n_eff`
/// (differences of the analytic gradient) and `J` the mean outer product
/// of the scores. `None` when `I` is not positive definite.
fn sandwich(lik: &Likelihood, params: &ParamVector, scores: &[f64]) -> Option<DMatrix<f64>> {
    let p = lik.order();
    let n_eff = lik.n_eff() as f64;
    let mut eta = params.free_weights.clone();
    eta.push(params.concentration);
    let grad = |x: &[f64]| {
        let mut w = x[..p - 1].to_vec();
        w.push(1.0 - w.iter().sum::<f64>());
        lik.evaluate(&w, x[p - 1], false).gradient
    };
    let h = fd_hessian(p, &eta, |x| 1e-5 * x.abs().max(1e-2), grad);
    let info = -h / n_eff;
    if !info.iter().all(|v| v.is_finite()) {
        return None;
    }
    let mut j = DMatrix::zeros(p, p);
    for row in scores.chunks_exact(p) {
        let s = DVector::from_column_slice(row);
        j += &s * s.transpose();
    }
    j /= n_eff;
    let inv = Cholesky::new(info)?.inverse();
    let c = &inv * j * &inv / n_eff;
    Some((&c + c.transpose()) * 0.5)
}

/// MLE over all `2^p` sign vectors with default options.
pub fn fit(series: &AngleSeries, p: usize, family: Family) -> Result<FitResult> {
    fit_with(series, p, family, &FitOptions::default())
}

/// Fits every sign vector (in parallel, merged in enumeration order) and
/// returns the one with the highest log-likelihood; ties keep the earlier
/// vector.
pub fn fit_with(series: &AngleSeries, p: usize, family: Family, opts: &FitOptions) -> Result<FitResult> {
    if p > MAX_ENUMERATED_ORDER {
        return Err(Error::Contract(format!(
            "order {p} exceeds the enumeration limit {MAX_ENUMERATED_ORDER}"
        )));
    }
    check_length(series, p)?;
    let outcomes: Vec<Result<FitResult>> = (0..1usize << p)
        .into_par_iter()
        .map(|idx| best_effort(fit_given_q_with(series, p, &Sign::enumerate(p, idx), family, opts)))
        .collect();
    let mut candidates = Vec::with_capacity(outcomes.len());
    let mut best: Option<FitResult> = None;
    let mut first_err = None;
    for (idx, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(fr) => {
                candidates.push(Candidate {
                    signs: fr.signs.clone(),
                    loglik: fr.loglik,
                    converged: fr.converged,
                });
                if best.as_ref().is_none_or(|b| fr.loglik > b.loglik) {
                    best = Some(fr);
                }
            }
            Err(e) => {
                candidates.push(Candidate {
                    signs: Sign::enumerate(p, idx),
                    loglik: f64::NEG_INFINITY,
                    converged: false,
                });
                first_err.get_or_insert(e);
            }
        }
    }
    let Some(mut best) = best else {
        return Err(first_err.expect("at least one sign vector"));
    };
    best.candidates = candidates;
    if best.converged {
        Ok(best)
    } else {
        Err(Error::Optimization {
            signs: best.signs.iter().map(|s| s.as_i8()).collect(),
            best_loglik: best.loglik,
            best: Some(Box::new(best)),
        })
    }
}

/// Fits for each order `1..=p_max` and the selected order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrderSelection {
    pub criterion: Criterion,
    pub selected: usize,
    /// One entry per order, `table[p - 1]`.
    pub table: Vec<FitResult>,
}

impl OrderSelection {
    pub fn selected_fit(&self) -> &FitResult {
        &self.table[self.selected - 1]
    }
}

/// Index of the minimum criterion value; ties go to the smaller order.
pub fn argmin_order(table: &[FitResult], criterion: Criterion) -> usize {
    let mut best = 0;
    for (i, f) in table.iter().enumerate() {
        if f.criterion(criterion) < table[best].criterion(criterion) {
            best = i;
        }
    }
    best + 1
}

pub fn select_order(
    series: &AngleSeries,
    p_max: usize,
    family: Family,
    criterion: Criterion,
) -> Result<OrderSelection> {
    select_order_with(series, p_max, family, criterion, &FitOptions::default())
}

pub fn select_order_with(
    series: &AngleSeries,
    p_max: usize,
    family: Family,
    criterion: Criterion,
    opts: &FitOptions,
) -> Result<OrderSelection> {
    check_length(series, p_max)?;
    let table = (1..=p_max)
        .map(|p| fit_with(series, p, family, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderSelection {
        criterion,
        selected: argmin_order(&table, criterion),
        table,
    })
}
