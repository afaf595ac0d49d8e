//! Monte Carlo replication harness for estimation and order-selection
//! studies.
//!
//! Replication `r` of cell `c` draws from a ChaCha8 generator seeded with
//! the master seed on stream `c << 32 | r`, so results do not depend on the
//! number of workers or on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::{Family, AngleSeries};
use crate::error::{Error, Result};
use crate::inference::{self, argmin_order, best_effort, Criterion, FitOptions, FitResult};
use crate::model::{MtdArModel, DEFAULT_BURN_IN};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "CIRCMTD_WORKERS";

/// Generator for replication `rep` of cell `cell`.
pub fn replication_rng(master: u64, cell: u32, rep: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((cell as u64) << 32) | rep as u64);
    rng
}

/// Runs `f` on a pool sized by [`WORKERS_ENV`] when set, otherwise on the
/// global pool.
pub fn with_workers<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Numeric(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

/// Simulated series and fit seed for one replication.
fn replicate(truth: &MtdArModel, n: usize, master: u64, cell: u32, rep: u32) -> Result<(AngleSeries, u64)> {
    let mut rng = replication_rng(master, cell, rep);
    let s = truth.simulate_with(n, DEFAULT_BURN_IN, &mut rng)?;
    Ok((s, rng.random()))
}

/// Mean and root-mean-square error of estimates around a true value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRmse {
    pub mean: f64,
    pub rmse: f64,
}

impl MeanRmse {
    pub fn of(values: &[f64], truth: f64) -> Self {
        let k = values.len() as f64;
        Self {
            mean: values.iter().sum::<f64>() / k,
            rmse: (values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / k).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationSummary {
    pub n: usize,
    pub signs: Vec<i8>,
    pub fit_family: Family,
    pub replications: usize,
    pub a1: MeanRmse,
    /// First mean resultant length of the fitted binding density.
    pub rho: MeanRmse,
    /// Share of replications whose 95% sandwich interval for `a_1` covers
    /// the truth (among those with a usable covariance).
    pub a1_coverage: f64,
    pub nonconverged: usize,
    pub failed: usize,
}

/// Fits the true sign vector in each replication and summarizes `a_1` and
/// the mean resultant length against the truth. The truth must have
/// `p >= 2`.
pub fn estimation_cell(
    truth: &MtdArModel,
    fit_family: Family,
    n: usize,
    reps: usize,
    seed: u64,
    cell: u32,
) -> Result<EstimationSummary> {
    let p = truth.order();
    if p < 2 || reps == 0 {
        return Err(Error::Contract("estimation study needs p >= 2 and reps >= 1".into()));
    }
    let fits: Vec<Result<FitResult>> = (0..reps as u32)
        .into_par_iter()
        .map(|rep| {
            let (s, fit_seed) = replicate(truth, n, seed, cell, rep)?;
            let opts = FitOptions {
                seed: fit_seed,
                ..FitOptions::default()
            };
            best_effort(inference::fit_given_q_with(&s, p, truth.signs(), fit_family, &opts))
        })
        .collect();
    let a1_true = truth.weights()[0];
    let rho_true = truth.binding().resultant_length(1);
    let (mut a1, mut rho, mut covered, mut with_se) = (vec![], vec![], 0usize, 0usize);
    let (mut nonconverged, mut failed) = (0, 0);
    for f in &fits {
        match f {
            Ok(f) => {
                a1.push(f.weights[0]);
                rho.push(f.mean_resultant_length());
                nonconverged += usize::from(!f.converged);
                if let Some(se) = &f.std_errors {
                    with_se += 1;
                    covered += usize::from((f.weights[0] - a1_true).abs() <= 1.959964 * se[0]);
                }
            }
            Err(_) => failed += 1,
        }
    }
    if a1.is_empty() {
        return Err(fits.into_iter().find_map(|f| f.err()).expect("some failure"));
    }
    Ok(EstimationSummary {
        n,
        signs: truth.signs().iter().map(|s| s.as_i8()).collect(),
        fit_family,
        replications: reps,
        a1: MeanRmse::of(&a1, a1_true),
        rho: MeanRmse::of(&rho, rho_true),
        a1_coverage: covered as f64 / with_se.max(1) as f64,
        nonconverged,
        failed,
    })
}

/// Estimation study with a deliberately wrong binding family; the fitted
/// concentration is reported through its mean resultant length.
pub fn misspecified_fit_study(
    truth: &MtdArModel,
    fit_family: Family,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<EstimationSummary> {
    if truth.binding().family() == fit_family {
        return Err(Error::Contract("fit family equals the true family".into()));
    }
    estimation_cell(truth, fit_family, n, reps, seed, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub n: usize,
    pub signs: Vec<i8>,
    pub replications: usize,
    /// `counts[p - 1]` replications selecting order `p`.
    pub aic_counts: Vec<usize>,
    pub bic_counts: Vec<usize>,
    pub failed: usize,
}

impl SelectionSummary {
    pub fn counts(&self, c: Criterion) -> &[usize] {
        match c {
            Criterion::Aic => &self.aic_counts,
            Criterion::Bic => &self.bic_counts,
        }
    }
}

/// Fits orders `1..=p_max` (all sign vectors each) per replication and
/// counts the orders chosen by AIC and BIC.
pub fn selection_cell(
    truth: &MtdArModel,
    family: Family,
    n: usize,
    reps: usize,
    p_max: usize,
    seed: u64,
    cell: u32,
) -> Result<SelectionSummary> {
    if p_max == 0 || reps == 0 {
        return Err(Error::Contract("selection study needs p_max >= 1 and reps >= 1".into()));
    }
    let picks: Vec<Result<(usize, usize)>> = (0..reps as u32)
        .into_par_iter()
        .map(|rep| {
            let (s, fit_seed) = replicate(truth, n, seed, cell, rep)?;
            let opts = FitOptions {
                seed: fit_seed,
                ..FitOptions::default()
            };
            let table = (1..=p_max)
                .map(|p| best_effort(inference::fit_with(&s, p, family, &opts)))
                .collect::<Result<Vec<_>>>()?;
            Ok((argmin_order(&table, Criterion::Aic), argmin_order(&table, Criterion::Bic)))
        })
        .collect();
    let mut aic_counts = vec![0; p_max];
    let mut bic_counts = vec![0; p_max];
    let mut failed = 0;
    for r in &picks {
        match r {
            Ok((a, b)) => {
                aic_counts[a - 1] += 1;
                bic_counts[b - 1] += 1;
            }
            Err(_) => failed += 1,
        }
    }
    Ok(SelectionSummary {
        n,
        signs: truth.signs().iter().map(|s| s.as_i8()).collect(),
        replications: reps,
        aic_counts,
        bic_counts,
        failed,
    })
}
