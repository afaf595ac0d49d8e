//! Circular partial autocorrelation function (CPACF).
//!
//! Under a zero binding mean direction every `Gamma_k` is diagonal, so the
//! block-Toeplitz determinant ratio defining the CPACF factors into the
//! product of the ordinary partial autocorrelations of the cosine and sine
//! component processes.

use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;

use crate::circular::AngleSeries;
use crate::correlation::{self, require_zero_mean, SequenceKind};
use crate::error::{Error, Result};
use crate::model::MtdArModel;

/// Prediction-error variance ratio below which a Toeplitz system is treated
/// as singular.
const SINGULAR_TOL: f64 = 1e-14;

/// `psi_1..psi_K`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CpacfResult {
    pub values: Vec<f64>,
    pub kind: SequenceKind,
}

/// Partial autocorrelations `phi_{11}, ..., phi_{KK}` from autocorrelations
/// `rho_0 = 1, rho_1, ..., rho_K` (Durbin–Levinson).
pub fn durbin_levinson(acf: &[f64]) -> Result<Vec<f64>> {
    let k_max = acf.len().saturating_sub(1);
    let mut out = Vec::with_capacity(k_max);
    let mut phi: Vec<f64> = Vec::new();
    let mut v = acf[0];
    for k in 1..=k_max {
        if v <= SINGULAR_TOL * acf[0].abs() {
            return Err(Error::Numeric(format!(
                "near-singular Toeplitz system at lag {k}"
            )));
        }
        let num = acf[k] - phi.iter().enumerate().map(|(j, p)| p * acf[k - 1 - j]).sum::<f64>();
        let pkk = num / v;
        let mut next = Vec::with_capacity(k);
        for j in 0..phi.len() {
            next.push(phi[j] - pkk * phi[phi.len() - 1 - j]);
        }
        next.push(pkk);
        phi = next;
        v *= 1.0 - pkk * pkk;
        out.push(pkk);
    }
    Ok(out)
}

/// Scalar partial autocorrelations of the cosine and sine components.
pub fn component_pacfs(model: &MtdArModel, max_lag: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (g11, g22) = correlation::component_autocovariances(model, max_lag)?;
    let norm = |g: &[f64]| g.iter().map(|x| x / g[0]).collect::<Vec<f64>>();
    Ok((durbin_levinson(&norm(&g11))?, durbin_levinson(&norm(&g22))?))
}

/// Theoretical CPACF `psi_1..psi_K` as the product of the component partial
/// autocorrelations. Requires a zero binding mean direction.
pub fn cpacf(model: &MtdArModel, max_lag: usize) -> Result<CpacfResult> {
    require_zero_mean(model)?;
    if max_lag == 0 {
        return Err(Error::Contract("maximum lag must be >= 1".into()));
    }
    let (pc, ps) = component_pacfs(model, max_lag)?;
    Ok(CpacfResult {
        values: pc.iter().zip(&ps).map(|(a, b)| a * b).collect(),
        kind: SequenceKind::Theoretical,
    })
}

/// Block matrix with `(i, j)` block `Gamma_{j-i}` above the diagonal and
/// `Gamma_{i-j}^T` below it; when `numerator` is set the last block column
/// is replaced by `Gamma_1, ..., Gamma_s`.
fn block_matrix(gammas: &[Matrix2<f64>], s: usize, numerator: bool) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * s, 2 * s);
    for i in 0..s {
        for j in 0..s {
            let b = if numerator && j == s - 1 {
                gammas[i + 1]
            } else if j >= i {
                gammas[j - i]
            } else {
                gammas[i - j].transpose()
            };
            m.view_mut((2 * i, 2 * j), (2, 2)).copy_from(&b);
        }
    }
    m
}

/// Lag-`s` CPACF as the literal ratio of `2s x 2s` block determinants.
pub fn determinant_ratio(gammas: &[Matrix2<f64>], s: usize) -> Result<f64> {
    if s == 0 || gammas.len() <= s {
        return Err(Error::Contract(format!(
            "need Gamma_0..Gamma_{s} for the lag-{s} ratio"
        )));
    }
    let den = block_matrix(gammas, s, false).determinant();
    let scale = gammas[0].determinant().abs().powi(s as i32);
    if !den.is_finite() || den.abs() <= SINGULAR_TOL * scale {
        return Err(Error::Numeric(format!(
            "singular block-Toeplitz denominator at lag {s}"
        )));
    }
    Ok(block_matrix(gammas, s, true).determinant() / den)
}

/// Theoretical CPACF through the block-determinant ratio. Used as a cross
/// check; it loses accuracy past roughly ten lags.
pub fn cpacf_determinant(model: &MtdArModel, max_lag: usize) -> Result<CpacfResult> {
    require_zero_mean(model)?;
    let seq = correlation::gamma_sequence(model, max_lag)?;
    let values = (1..=max_lag)
        .map(|s| determinant_ratio(&seq.matrices, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(CpacfResult {
        values,
        kind: SequenceKind::Theoretical,
    })
}

/// Sample CPACF: the determinant ratio evaluated on the sample lag
/// covariances, with transposed blocks below the diagonal.
pub fn sample_cpacf(series: &AngleSeries, max_lag: usize) -> Result<CpacfResult> {
    if max_lag == 0 || 2 * max_lag >= series.len() {
        return Err(Error::Contract(format!(
            "maximum lag must satisfy 1 <= K < n/2 (K = {max_lag}, n = {})",
            series.len()
        )));
    }
    let seq = correlation::sample_gamma(series, max_lag)?;
    let values = (1..=max_lag)
        .map(|s| determinant_ratio(&seq.matrices, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(CpacfResult {
        values,
        kind: SequenceKind::Sample,
    })
}
