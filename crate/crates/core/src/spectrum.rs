//! Spectral density `f(omega) = (2 pi)^{-1} sum_k e^{-i omega k} det Gamma_k`
//! of the circular process under a zero binding mean direction.
//!
//! Two independent routes are provided. The convolution route integrates
//! the product of the cosine and sine component AR spectra numerically. The
//! residue route evaluates the same integral as a contour integral over the
//! unit circle and sums residues at the poles inside it, using a
//! log-derivative recursion for poles of higher order.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::circular::{wrap_radians, AngleSeries};
use crate::correlation::{self, require_zero_mean};
use crate::error::{Error, Result};
use crate::model::MtdArModel;
use crate::poly::{self, Root};
use crate::quad;

/// Absolute tolerance of the convolution quadrature.
pub const CONVOLUTION_ABS_TOL: f64 = 1e-10;
/// Relative tolerance of the convolution quadrature.
pub const CONVOLUTION_REL_TOL: f64 = 1e-8;
/// Poles closer than this are merged into one pole of higher order.
pub const POLE_MERGE_TOL: f64 = 1e-7;

/// Innovation variances and AR coefficients of the cosine and sine
/// component processes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentSpectra {
    /// `(1 - 2 rho_1 sum a_i gamma_{i,11}) / 2` and
    /// `(1 - 2 rho_1 sum q_i a_i gamma_{i,22}) / 2`.
    pub variance_factors: [f64; 2],
    pub poly_coeffs_cos: Vec<f64>,
    pub poly_coeffs_sin: Vec<f64>,
}

impl ComponentSpectra {
    pub fn new(model: &MtdArModel) -> Result<Self> {
        require_zero_mean(model)?;
        let p = model.order();
        let (c1, c2) = model.component_coefficients();
        let (g11, g22) = correlation::component_autocovariances(model, p)?;
        let v1 = 0.5 - (1..=p).map(|i| c1[i - 1] * g11[i]).sum::<f64>();
        let v2 = 0.5 - (1..=p).map(|i| c2[i - 1] * g22[i]).sum::<f64>();
        Ok(Self {
            variance_factors: [v1, v2],
            poly_coeffs_cos: c1,
            poly_coeffs_sin: c2,
        })
    }

    fn ar_spectrum(v: f64, c: &[f64], omega: f64) -> f64 {
        // |1 - sum c_i e^{-i omega i}|^2
        let (mut re, mut im) = (1.0, 0.0);
        for (i, ci) in c.iter().enumerate() {
            let (s, co) = (omega * (i + 1) as f64).sin_cos();
            re -= ci * co;
            im += ci * s;
        }
        v / (TAU * (re * re + im * im))
    }

    /// Spectral density of `cos theta_t`.
    pub fn cos_density(&self, omega: f64) -> f64 {
        Self::ar_spectrum(self.variance_factors[0], &self.poly_coeffs_cos, omega)
    }

    /// Spectral density of `sin theta_t`.
    pub fn sin_density(&self, omega: f64) -> f64 {
        Self::ar_spectrum(self.variance_factors[1], &self.poly_coeffs_sin, omega)
    }

    /// Peak locations of the component spectra, used as quadrature breaks.
    fn peak_angles(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let angles = |c: &[f64]| -> Result<Vec<f64>> {
            Ok(poly::ar_roots(c)?
                .iter()
                .filter(|z| z.norm() > 0.5)
                .map(|z| z.arg())
                .collect())
        };
        Ok((angles(&self.poly_coeffs_cos)?, angles(&self.poly_coeffs_sin)?))
    }
}

/// Spectral density by numerical convolution of the component spectra,
/// `f(omega) = int f_cos(lambda) f_sin(omega - lambda) d lambda`.
pub fn spectral_density_convolution(model: &MtdArModel, omega: f64) -> Result<f64> {
    ConvolutionSpectrum::new(model)?.density(omega)
}

/// Reusable convolution evaluator.
#[derive(Clone, Debug)]
pub struct ConvolutionSpectrum {
    components: ComponentSpectra,
    peaks_cos: Vec<f64>,
    peaks_sin: Vec<f64>,
}

impl ConvolutionSpectrum {
    pub fn new(model: &MtdArModel) -> Result<Self> {
        let components = ComponentSpectra::new(model)?;
        let (peaks_cos, peaks_sin) = components.peak_angles()?;
        Ok(Self {
            components,
            peaks_cos,
            peaks_sin,
        })
    }

    pub fn components(&self) -> &ComponentSpectra {
        &self.components
    }

    pub fn density(&self, omega: f64) -> Result<f64> {
        let mut breaks = vec![-PI, PI];
        breaks.extend(self.peaks_cos.iter().map(|&a| wrap_radians(a)));
        breaks.extend(self.peaks_sin.iter().map(|&b| wrap_radians(omega - b)));
        breaks.retain(|x| x.is_finite());
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if breaks[0] > -PI {
            breaks.insert(0, -PI);
        }
        let c = &self.components;
        let mut f = |l: f64| c.cos_density(l) * c.sin_density(omega - l);
        quad::integrate_with_breaks(&mut f, &breaks, CONVOLUTION_ABS_TOL, CONVOLUTION_REL_TOL)
    }
}

/// Which factor of the integrand a pole comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleOrigin {
    /// A root `G` of the cosine polynomial.
    Cos,
    /// `H e^{i omega}` for a root `H` of the sine polynomial.
    Sin,
    /// Poles from both families that coincide at this frequency.
    Merged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pole {
    #[serde(serialize_with = "ser_complex")]
    pub location: Complex64,
    pub order: usize,
    pub origin: PoleOrigin,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

/// Poles of the contour integrand at one frequency.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoleSet {
    pub omega: f64,
    /// Poles inside the unit circle, after merging.
    pub inside: Vec<Pole>,
    /// Poles outside the unit circle, after merging.
    pub outside: Vec<Pole>,
    /// Smallest distance between a cosine-family and a sine-family pole
    /// inside the circle, before merging.
    pub min_cross_distance: f64,
    /// True when poles of the two families were merged.
    pub merged: bool,
}

/// Residue-route evaluator with the polynomial roots precomputed.
#[derive(Clone, Debug)]
pub struct ResidueSpectrum {
    p: usize,
    variance_factors: [f64; 2],
    roots_cos: Vec<Root>,
    roots_sin: Vec<Root>,
    flat: bool,
}

/// One evaluation of the residue route.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidueValue {
    pub density: f64,
    /// Imaginary part left over after summing the residues.
    pub imaginary: f64,
    pub merged: bool,
}

impl ResidueSpectrum {
    pub fn new(model: &MtdArModel) -> Result<Self> {
        let comps = ComponentSpectra::new(model)?;
        let flat = model.binding().resultant_length(1) == 0.0;
        let (roots_cos, roots_sin) = if flat {
            (Vec::new(), Vec::new())
        } else {
            (
                poly::cluster(&poly::ar_roots(&comps.poly_coeffs_cos)?, POLE_MERGE_TOL),
                poly::cluster(&poly::ar_roots(&comps.poly_coeffs_sin)?, POLE_MERGE_TOL),
            )
        };
        if roots_cos.iter().chain(&roots_sin).any(|r| r.value.norm() >= 1.0) {
            return Err(Error::InvalidModel("model is not first-order stationary".into()));
        }
        Ok(Self {
            p: model.order(),
            variance_factors: comps.variance_factors,
            roots_cos,
            roots_sin,
            flat,
        })
    }

    pub fn roots_cos(&self) -> &[Root] {
        &self.roots_cos
    }

    pub fn roots_sin(&self) -> &[Root] {
        &self.roots_sin
    }

    /// Poles of `z^{2p-1} / (prod (z - G)(1 - G z) prod (e^{i w} - H z)(z e^{-i w} - H))`.
    pub fn poles(&self, omega: f64) -> PoleSet {
        let rot = Complex64::from_polar(1.0, omega);
        let mut inside: Vec<Pole> = Vec::new();
        let mut outside: Vec<Pole> = Vec::new();
        for r in &self.roots_cos {
            inside.push(Pole {
                location: r.value,
                order: r.multiplicity,
                origin: PoleOrigin::Cos,
            });
            outside.push(Pole {
                location: 1.0 / r.value,
                order: r.multiplicity,
                origin: PoleOrigin::Cos,
            });
        }
        for r in &self.roots_sin {
            inside.push(Pole {
                location: r.value * rot,
                order: r.multiplicity,
                origin: PoleOrigin::Sin,
            });
            outside.push(Pole {
                location: rot / r.value,
                order: r.multiplicity,
                origin: PoleOrigin::Sin,
            });
        }
        let mut min_cross = f64::INFINITY;
        for a in inside.iter().filter(|p| p.origin == PoleOrigin::Cos) {
            for b in inside.iter().filter(|p| p.origin == PoleOrigin::Sin) {
                min_cross = min_cross.min((a.location - b.location).norm());
            }
        }
        let (inside, m1) = merge_poles(inside);
        let (outside, m2) = merge_poles(outside);
        PoleSet {
            omega,
            inside,
            outside,
            min_cross_distance: min_cross,
            merged: m1 || m2,
        }
    }

    pub fn evaluate(&self, omega: f64) -> ResidueValue {
        let [v1, v2] = self.variance_factors;
        if self.flat {
            return ResidueValue {
                density: 1.0 / (8.0 * PI),
                imaginary: 0.0,
                merged: false,
            };
        }
        let poles = self.poles(omega);
        let e_minus = Complex64::from_polar(1.0, -omega);
        // leading constant of the denominator once written as prod (z - pole)
        let mut lead = Complex64::new(1.0, 0.0);
        for r in &self.roots_cos {
            lead *= (-r.value).powu(r.multiplicity as u32);
        }
        for r in &self.roots_sin {
            lead *= (-r.value * e_minus).powu(r.multiplicity as u32);
        }
        let all: Vec<Pole> = poles.inside.iter().chain(&poles.outside).copied().collect();
        let num_power = 2 * self.p - 1;
        let mut total = Complex64::new(0.0, 0.0);
        for (idx, pole) in poles.inside.iter().enumerate() {
            let others: Vec<Pole> = all
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != idx)
                .map(|(_, p)| *p)
                .collect();
            total += residue(pole, &others, num_power);
        }
        let value = total / lead * (v1 * v2 / TAU);
        ResidueValue {
            density: value.re,
            imaginary: value.im,
            merged: poles.merged,
        }
    }

    pub fn density(&self, omega: f64) -> f64 {
        self.evaluate(omega).density
    }
}

fn merge_poles(poles: Vec<Pole>) -> (Vec<Pole>, bool) {
    let mut out: Vec<(Pole, Complex64, usize)> = Vec::new();
    let mut merged = false;
    for p in poles {
        if let Some(slot) = out
            .iter_mut()
            .find(|(q, _, _)| (q.location - p.location).norm() < POLE_MERGE_TOL)
        {
            let (q, sum, count) = slot;
            if q.origin != p.origin {
                q.origin = PoleOrigin::Merged;
                merged = true;
            }
            q.order += p.order;
            *sum += p.location;
            *count += 1;
            q.location = *sum / *count as f64;
        } else {
            out.push((p, p.location, 1));
        }
    }
    (out.into_iter().map(|(p, _, _)| p).collect(), merged)
}

/// Residue of `z^m / prod_k (z - z_k)^{d_k}` at `pole`, where `others` are
/// the remaining poles.
fn residue(pole: &Pole, others: &[Pole], m: usize) -> Complex64 {
    let z0 = pole.location;
    // v(z) = z^m / prod_{others} (z - z_k)^{d_k}
    let mut v0 = z0.powu(m as u32);
    for o in others {
        v0 /= (z0 - o.location).powu(o.order as u32);
    }
    let d = pole.order;
    if d == 1 {
        return v0;
    }
    // w = v'/v = m/z - sum d_k/(z - z_k);
    // w^{(k)} = (-1)^k k! [m z^{-(k+1)} - sum d_k (z - z_k)^{-(k+1)}]
    let n = d - 1;
    let mut w = Vec::with_capacity(n);
    let mut fact = 1.0;
    for k in 0..n {
        if k > 0 {
            fact *= k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut s = m as f64 * z0.powi(-(k as i32 + 1));
        for o in others {
            s -= o.order as f64 * (z0 - o.location).powi(-(k as i32 + 1));
        }
        w.push(s * sign * fact);
    }
    // v^{(j)} = sum_{k<j} C(j-1, k) v^{(j-1-k)} w^{(k)}
    let mut v = vec![v0];
    for j in 1..=n {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut binom = 1.0;
        for k in 0..j {
            if k > 0 {
                binom = binom * (j - k) as f64 / k as f64;
            }
            acc += binom * v[j - 1 - k] * w[k];
        }
        v.push(acc);
    }
    let n_fact: f64 = (1..=n).map(|x| x as f64).product();
    v[n] / n_fact
}

/// Spectral density at `omega` by the residue theorem.
pub fn spectral_density_residue(model: &MtdArModel, omega: f64) -> Result<ResidueValue> {
    Ok(ResidueSpectrum::new(model)?.evaluate(omega))
}

/// `int_{-pi}^{pi} e^{i k omega} f(omega) d omega` for `k = 0..=K`, computed
/// from the residue route by adaptive quadrature; these should reproduce
/// `det Gamma_k`.
pub fn spectral_autocov_roundtrip(model: &MtdArModel, max_lag: usize) -> Result<Vec<f64>> {
    let spec = ResidueSpectrum::new(model)?;
    (0..=max_lag)
        .map(|k| {
            // f is even, so the sine part vanishes
            quad::integrate(
                |w| (k as f64 * w).cos() * spec.density(w),
                -PI,
                PI,
                1e-13,
                1e-11,
            )
        })
        .collect()
}

/// The Fourier grid `omega_j = 2 pi j / N - pi`, `j = 0..N`.
pub fn frequency_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64 - PI).collect()
}

/// Lag window for the periodogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LagWindow {
    /// All lags `|k| <= n - 1` with unit weight.
    None,
    /// Weights `1 - |k| / K` for `|k| < K`.
    Bartlett(usize),
}

/// `(2 pi)^{-1} sum_{|k| <= K} w_k x_k e^{-i omega_j k}` on the Fourier grid,
/// for an even sequence `x_{-k} = x_k`.
fn lag_window_transform(x: &[f64], weights: &[f64], grid_size: usize) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); grid_size];
    // e^{-i omega_j k} = (-1)^k e^{-2 pi i j k / N}
    for (k, (xk, wk)) in x.iter().zip(weights).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * xk * wk;
        if k == 0 {
            buf[0] += term;
        } else {
            buf[k % grid_size] += term;
            buf[(grid_size - k % grid_size) % grid_size] += term;
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(grid_size).process(&mut buf);
    buf.iter().map(|z| z.re / TAU).collect()
}

fn window_weights(window: LagWindow, n: usize) -> Result<Vec<f64>> {
    match window {
        LagWindow::None => Ok(vec![1.0; n]),
        LagWindow::Bartlett(k) => {
            if k == 0 || k >= n {
                return Err(Error::Contract(format!(
                    "Bartlett truncation must satisfy 1 <= K < n (K = {k}, n = {n})"
                )));
            }
            Ok((0..k).map(|j| 1.0 - j as f64 / k as f64).collect())
        }
    }
}

/// Circular periodogram: the lag-window Fourier transform of the sample
/// circular autocovariances `det hat Gamma_k`, returned as `(omega, value)`
/// pairs on the Fourier grid.
pub fn periodogram(
    series: &AngleSeries,
    grid_size: usize,
    window: LagWindow,
) -> Result<Vec<(f64, f64)>> {
    if grid_size < 8 {
        return Err(Error::Contract("periodogram grid needs at least 8 points".into()));
    }
    let n = series.len();
    if n < 2 {
        return Err(Error::Contract("series too short for a periodogram".into()));
    }
    let weights = window_weights(window, n)?;
    let seq = correlation::sample_gamma(series, weights.len() - 1)?;
    let dets = seq.determinants();
    let values = lag_window_transform(&dets, &weights, grid_size);
    Ok(frequency_grid(grid_size).into_iter().zip(values).collect())
}

/// Cross-check estimator: the circular convolution of the lag-window
/// periodograms of `cos theta_t` and `sin theta_t`. `grid_size` must be even.
pub fn component_periodogram_convolution(
    series: &AngleSeries,
    grid_size: usize,
    window: LagWindow,
) -> Result<Vec<(f64, f64)>> {
    if grid_size < 8 || !grid_size.is_multiple_of(2) {
        return Err(Error::Contract("grid size must be even and at least 8".into()));
    }
    let weights = window_weights(window, series.len())?;
    let seq = correlation::sample_gamma(series, weights.len() - 1)?;
    let g11: Vec<f64> = seq.matrices.iter().map(|m| m[(0, 0)]).collect();
    let g22: Vec<f64> = seq.matrices.iter().map(|m| m[(1, 1)]).collect();
    let i1 = lag_window_transform(&g11, &weights, grid_size);
    let i2 = lag_window_transform(&g22, &weights, grid_size);
    let h = TAU / grid_size as f64;
    let half = grid_size / 2;
    // omega_j - lambda_l = 2 pi (j - l) / N sits at grid index j - l + N/2
    let values: Vec<f64> = (0..grid_size)
        .map(|j| {
            (0..grid_size)
                .map(|l| i1[l] * i2[(j + half + grid_size - l) % grid_size])
                .sum::<f64>()
                * h
        })
        .collect();
    Ok(frequency_grid(grid_size).into_iter().zip(values).collect())
}
