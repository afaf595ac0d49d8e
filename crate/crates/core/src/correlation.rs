//! Lag covariance matrices `Gamma_k = E(U_{t+k} U_t^T)` of the embedded
//! planar process `U_t = (cos theta_t, sin theta_t)`, the circular
//! autocorrelation function `r_k = det Gamma_k / det Gamma_0`, its sample
//! counterpart, and the root-based closed form.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::circular::AngleSeries;
use crate::error::{Error, Result};
use crate::model::{MtdArModel, RotationKernel};
use crate::poly::{self, Root};

/// Roots closer than this are treated as one multiple root.
pub const ROOT_CLUSTER_TOL: f64 = 1e-7;

/// Work threshold (`n * K`) above which sample covariances use the FFT.
const DIRECT_WORK_LIMIT: usize = 20_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Theoretical,
    Sample,
}

/// `Gamma_0, ..., Gamma_K`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagCovSequence {
    pub matrices: Vec<Matrix2<f64>>,
    pub kind: SequenceKind,
}

impl LagCovSequence {
    pub fn max_lag(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn get(&self, k: usize) -> Option<&Matrix2<f64>> {
        self.matrices.get(k)
    }

    pub fn determinants(&self) -> Vec<f64> {
        self.matrices.iter().map(|m| m.determinant()).collect()
    }

    /// `det Gamma_k / det Gamma_0` for `k = 0..=K`.
    pub fn cacf(&self) -> Vec<f64> {
        let d0 = self.matrices[0].determinant();
        self.matrices.iter().map(|m| m.determinant() / d0).collect()
    }
}

fn half_identity() -> Matrix2<f64> {
    Matrix2::identity() * 0.5
}

/// `Gamma_j` for any integer `j`, using `Gamma_{-j} = Gamma_j^T`.
fn gamma_at(known: &[Matrix2<f64>], j: isize) -> Matrix2<f64> {
    if j >= 0 {
        known[j as usize]
    } else {
        known[(-j) as usize].transpose()
    }
}

/// Theoretical `Gamma_0..Gamma_K`. `Gamma_1..Gamma_{p-1}` solve the stacked
/// recursions for `k < p`; later lags follow by direct recursion.
pub fn gamma_sequence(model: &MtdArModel, max_lag: usize) -> Result<LagCovSequence> {
    let p = model.order();
    let d1 = RotationKernel::d(model.binding(), 1)?;
    let blocks: Vec<Matrix2<f64>> = model
        .weights()
        .iter()
        .zip(model.signs())
        .map(|(a, q)| *a * d1 * RotationKernel::q(*q))
        .collect();
    let mut gammas = vec![half_identity()];
    if p > 1 {
        let initial = solve_initial_block(&blocks)
            .map_err(|e| Error::Numeric(format!("{e} for model {}", describe(model))))?;
        gammas.extend(initial);
    }
    while gammas.len() <= max_lag.max(p - 1) {
        let k = gammas.len() as isize;
        let mut next = Matrix2::zeros();
        for (i, b) in blocks.iter().enumerate() {
            next += b * gamma_at(&gammas, k - 1 - i as isize);
        }
        gammas.push(next);
    }
    gammas.truncate(max_lag + 1);
    Ok(LagCovSequence {
        matrices: gammas,
        kind: SequenceKind::Theoretical,
    })
}

fn describe(model: &MtdArModel) -> String {
    model.to_json().unwrap_or_else(|_| format!("{model:?}")).replace('\n', "")
}

/// Solves for `Gamma_1..Gamma_{p-1}` from
/// `Gamma_k = sum_i B_i Gamma_{k-i}`, `k = 1..p-1`.
fn solve_initial_block(blocks: &[Matrix2<f64>]) -> Result<Vec<Matrix2<f64>>> {
    let p = blocks.len();
    let n = 4 * (p - 1);
    let unpack = |x: &DVector<f64>| -> Vec<Matrix2<f64>> {
        let mut g = vec![half_identity()];
        for k in 0..p - 1 {
            g.push(Matrix2::new(x[4 * k], x[4 * k + 1], x[4 * k + 2], x[4 * k + 3]));
        }
        g
    };
    // residual r(x) = x - F(x) is affine in x; recover it from unit probes
    let residual = |x: &DVector<f64>| -> DVector<f64> {
        let g = unpack(x);
        let mut r = DVector::zeros(n);
        for k in 1..p {
            let mut rhs = Matrix2::zeros();
            for (i, b) in blocks.iter().enumerate() {
                rhs += b * gamma_at(&g, k as isize - 1 - i as isize);
            }
            let diff = g[k] - rhs;
            r[4 * (k - 1)] = diff[(0, 0)];
            r[4 * (k - 1) + 1] = diff[(0, 1)];
            r[4 * (k - 1) + 2] = diff[(1, 0)];
            r[4 * (k - 1) + 3] = diff[(1, 1)];
        }
        r
    };
    let zero = DVector::zeros(n);
    let r0 = residual(&zero);
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        m.set_column(j, &(residual(&e) - &r0));
    }
    let x = m
        .lu()
        .solve(&(-r0))
        .ok_or_else(|| Error::Numeric("singular initial covariance system".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("singular initial covariance system".into()));
    }
    Ok(unpack(&x).into_iter().skip(1).collect())
}

/// Autocovariances `gamma_0..gamma_K` of a scalar process satisfying
/// `gamma_k = sum_i c_i gamma_{|k-i|}` for `k >= 1`, with `gamma_0 = 1/2`.
pub fn scalar_autocovariances(c: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let p = c.len();
    let mut g = vec![0.5];
    if p > 1 {
        // unknowns gamma_1..gamma_{p-1}
        let n = p - 1;
        let mut m = DMatrix::<f64>::identity(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for k in 1..p {
            for (i, &ci) in c.iter().enumerate() {
                let lag = (k as isize - 1 - i as isize).unsigned_abs();
                if lag == 0 {
                    rhs[k - 1] += 0.5 * ci;
                } else {
                    m[(k - 1, lag - 1)] -= ci;
                }
            }
        }
        let x = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numeric("singular Yule-Walker system".into()))?;
        g.extend(x.iter());
    }
    while g.len() <= max_lag.max(p - 1) {
        let k = g.len();
        let v: f64 = c
            .iter()
            .enumerate()
            .map(|(i, ci)| ci * g[(k as isize - 1 - i as isize).unsigned_abs()])
            .sum();
        g.push(v);
    }
    g.truncate(max_lag + 1);
    Ok(g)
}

/// Diagonals `(gamma_{k,11}, gamma_{k,22})` of `Gamma_k` under a zero mean
/// direction, from the two decoupled scalar systems.
pub fn component_autocovariances(
    model: &MtdArModel,
    max_lag: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    require_zero_mean(model)?;
    let (c1, c2) = model.component_coefficients();
    Ok((
        scalar_autocovariances(&c1, max_lag)?,
        scalar_autocovariances(&c2, max_lag)?,
    ))
}

pub(crate) fn require_zero_mean(model: &MtdArModel) -> Result<()> {
    if model.zero_mean_direction() {
        Ok(())
    } else {
        Err(Error::Unsupported(
            "requires a binding density with zero mean direction".into(),
        ))
    }
}

/// Theoretical CACF `r_0..r_K`.
pub fn cacf(model: &MtdArModel, max_lag: usize) -> Result<Vec<f64>> {
    let seq = gamma_sequence(model, max_lag)?;
    let mut r: Vec<f64> = seq.matrices.iter().map(|m| 4.0 * m.determinant()).collect();
    r[0] = 1.0;
    Ok(r)
}

/// Closed-form CACF `r_k = S_1(k) S_2(k)` where
/// `S_j(k) = sum_i G_{j,i}^k sum_l A_{j,il} k^l` and `G_{j,i}` are the roots of
/// the component characteristic polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct CacfClosedForm {
    pub roots_cos: Vec<Root>,
    pub roots_sin: Vec<Root>,
    /// `coef_cos[i][l]` multiplies `k^l G_{1,i}^k`.
    pub coef_cos: Vec<Vec<Complex64>>,
    pub coef_sin: Vec<Vec<Complex64>>,
    /// True when some roots were merged into a multiple root.
    pub confluent: bool,
}

impl CacfClosedForm {
    fn component(roots: &[Root], coef: &[Vec<Complex64>], k: usize) -> Complex64 {
        let kf = k as f64;
        roots
            .iter()
            .zip(coef)
            .map(|(r, a)| {
                let poly: Complex64 = a
                    .iter()
                    .enumerate()
                    .map(|(l, c)| c * kf.powi(l as i32))
                    .sum();
                r.value.powu(k as u32) * poly
            })
            .sum()
    }

    /// `2 gamma_{k,11}` as a complex number (imaginary part is rounding).
    pub fn cos_part(&self, k: usize) -> Complex64 {
        Self::component(&self.roots_cos, &self.coef_cos, k)
    }

    pub fn sin_part(&self, k: usize) -> Complex64 {
        Self::component(&self.roots_sin, &self.coef_sin, k)
    }

    pub fn evaluate(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        self.cos_part(k).re * self.sin_part(k).re
    }
}

/// Builds the closed form from the polynomial roots, fitting the
/// coefficients on lags `1..p`.
pub fn cacf_closed_form(model: &MtdArModel) -> Result<CacfClosedForm> {
    require_zero_mean(model)?;
    if model.binding().resultant_length(1) == 0.0 {
        return Err(Error::Domain(
            "closed form undefined for a uniform binding density".into(),
        ));
    }
    let p = model.order();
    let (c1, c2) = model.component_coefficients();
    let (g1, g2) = component_autocovariances(model, p)?;
    let (roots_cos, coef_cos, conf1) = fit_component(&c1, &g1)?;
    let (roots_sin, coef_sin, conf2) = fit_component(&c2, &g2)?;
    Ok(CacfClosedForm {
        roots_cos,
        roots_sin,
        coef_cos,
        coef_sin,
        confluent: conf1 || conf2,
    })
}

type ComponentFit = (Vec<Root>, Vec<Vec<Complex64>>, bool);

fn fit_component(c: &[f64], gamma: &[f64]) -> Result<ComponentFit> {
    let p = c.len();
    let roots = poly::cluster(&poly::ar_roots(c)?, ROOT_CLUSTER_TOL);
    let confluent = roots.iter().any(|r| r.multiplicity > 1);
    // confluent Vandermonde: column (i, l) holds k^l G_i^k for k = 1..p
    let mut v = DMatrix::<Complex64>::zeros(p, p);
    let mut col = 0;
    for r in &roots {
        for l in 0..r.multiplicity {
            for k in 1..=p {
                v[(k - 1, col)] = r.value.powu(k as u32) * (k as f64).powi(l as i32);
            }
            col += 1;
        }
    }
    let rhs = DVector::<Complex64>::from_iterator(p, (1..=p).map(|k| Complex64::new(2.0 * gamma[k], 0.0)));
    let x = v
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular Vandermonde system".into()))?;
    let mut coef = Vec::with_capacity(roots.len());
    let mut idx = 0;
    for r in &roots {
        coef.push(x.rows(idx, r.multiplicity).iter().copied().collect());
        idx += r.multiplicity;
    }
    Ok((roots, coef, confluent))
}

/// Sample lag covariances
/// `hat Gamma_k = (n-k)^{-1} sum_{t>k} U_t U_{t-k}^T`, `k = 0..=K`, without
/// centering.
pub fn sample_gamma(series: &AngleSeries, max_lag: usize) -> Result<LagCovSequence> {
    let n = series.len();
    if max_lag >= n {
        return Err(Error::Contract(format!(
            "maximum lag {max_lag} must be below the series length {n}"
        )));
    }
    let (c, s): (Vec<f64>, Vec<f64>) = series.radians().iter().map(|x| (x.cos(), x.sin())).unzip();
    let sums = if n.saturating_mul(max_lag + 1) <= DIRECT_WORK_LIMIT {
        lagged_sums_direct(&c, &s, max_lag)
    } else {
        lagged_sums_fft(&c, &s, max_lag)
    };
    let matrices = sums
        .into_iter()
        .enumerate()
        .map(|(k, m)| m / (n - k) as f64)
        .collect();
    Ok(LagCovSequence {
        matrices,
        kind: SequenceKind::Sample,
    })
}

fn lagged_sums_direct(c: &[f64], s: &[f64], max_lag: usize) -> Vec<Matrix2<f64>> {
    let n = c.len();
    (0..=max_lag)
        .map(|k| {
            let (mut cc, mut cs, mut sc, mut ss) = (0.0, 0.0, 0.0, 0.0);
            for t in k..n {
                cc += c[t] * c[t - k];
                cs += c[t] * s[t - k];
                sc += s[t] * c[t - k];
                ss += s[t] * s[t - k];
            }
            Matrix2::new(cc, cs, sc, ss)
        })
        .collect()
}

fn lagged_sums_fft(c: &[f64], s: &[f64], max_lag: usize) -> Vec<Matrix2<f64>> {
    let n = c.len();
    let m = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let spectrum = |x: &[f64]| {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(m, Complex64::new(0.0, 0.0));
        fwd.process(&mut buf);
        buf
    };
    let fc = spectrum(c);
    let fs = spectrum(s);
    // sum_t x_t y_{t-k} = IFFT(X conj(Y))[k]
    let corr = |x: &[Complex64], y: &[Complex64]| {
        let mut buf: Vec<Complex64> = x.iter().zip(y).map(|(a, b)| a * b.conj()).collect();
        inv.process(&mut buf);
        buf.into_iter()
            .take(max_lag + 1)
            .map(|z| z.re / m as f64)
            .collect::<Vec<f64>>()
    };
    let cc = corr(&fc, &fc);
    let cs = corr(&fc, &fs);
    let sc = corr(&fs, &fc);
    let ss = corr(&fs, &fs);
    (0..=max_lag)
        .map(|k| Matrix2::new(cc[k], cs[k], sc[k], ss[k]))
        .collect()
}

/// Sample CACF `det hat Gamma_k / det hat Gamma_0`.
pub fn sample_cacf(series: &AngleSeries, max_lag: usize) -> Result<Vec<f64>> {
    let seq = sample_gamma(series, max_lag)?;
    let d0 = seq.matrices[0].determinant();
    if d0 == 0.0 {
        return Err(Error::Numeric(
            "sample lag-0 covariance is singular (degenerate series)".into(),
        ));
    }
    Ok(seq.matrices.iter().map(|m| m.determinant() / d0).collect())
}
