//! The MTD-AR(p) process: a mixture of lag-shifted binding densities,
//!
//! ```text
//! f(theta_t | theta_{t-1}, ..., theta_{t-p}) = sum_i a_i g(theta_t - q_i theta_{t-i})
//! ```
//!
//! with circular-uniform marginal.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circular::{wrap, wrap_radians, Angle, AngleSeries, BindingDensity};
use crate::error::{Error, Result};

/// Default number of discarded warm-up draws in [`MtdArModel::simulate`].
pub const DEFAULT_BURN_IN: usize = 200;

/// Margin used for the strict stationarity inequalities.
pub const STATIONARITY_MARGIN: f64 = 1e-12;

/// Direction of dependence at one lag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    /// Sign vector number `index` in the fixed enumeration order: bit `i`
    /// set means `q_{i+1} = -1`.
    pub fn enumerate(p: usize, index: usize) -> Vec<Sign> {
        (0..p)
            .map(|i| if index >> i & 1 == 1 { Sign::Minus } else { Sign::Plus })
            .collect()
    }
}

impl TryFrom<i8> for Sign {
    type Error = Error;
    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(Error::InvalidModel(format!("sign must be +1 or -1, got {other}"))),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        s.as_i8()
    }
}

/// Parses signs given as integers.
pub fn signs_from_ints(values: &[i64]) -> Result<Vec<Sign>> {
    values
        .iter()
        .map(|&v| match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(Error::InvalidModel(format!("sign must be +1 or -1, got {other}"))),
        })
        .collect()
}

/// The matrices `D_m = rho_m R(mu_m)` and `Q_i = diag(1, q_i)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationKernel;

impl RotationKernel {
    /// `D_m` for binding density `g`.
    pub fn d(g: &BindingDensity, m: u32) -> Result<Matrix2<f64>> {
        let tm = g.trig_moment(m)?;
        let (s, c) = tm.direction.sin_cos();
        let r = tm.resultant_length;
        Ok(Matrix2::new(r * c, -r * s, r * s, r * c))
    }

    pub fn q(sign: Sign) -> Matrix2<f64> {
        Matrix2::new(1.0, 0.0, 0.0, sign.value())
    }
}

/// Result of a stationarity check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stationarity {
    pub stationary: bool,
    pub spectral_radius: f64,
}

/// Second-order stationarity, decided by the exact moment recursion, with
/// the factorized Kronecker radius reported alongside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecondOrderStationarity {
    pub stationary: bool,
    /// Spectral radius of the `4p x 4p` companion of
    /// `vec V_t = sum_i a_i (Q_i kron D_2 Q_i) vec V_{t-i} + c`.
    pub spectral_radius: f64,
    /// `max |lambda_i nu_j|` over the eigenvalues of the block companions
    /// with blocks `sqrt(a_i) Q_i` and `sqrt(a_i) D_2 Q_i`.
    pub kronecker_radius: f64,
}

/// An MTD-AR(p) model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct MtdArModel {
    weights: Vec<f64>,
    signs: Vec<Sign>,
    binding: BindingDensity,
}

#[derive(Serialize, Deserialize)]
struct ModelSpec {
    p: usize,
    weights: Vec<f64>,
    signs: Vec<Sign>,
    binding: BindingDensity,
}

impl TryFrom<ModelSpec> for MtdArModel {
    type Error = Error;
    fn try_from(s: ModelSpec) -> Result<Self> {
        if s.p != s.weights.len() {
            return Err(Error::InvalidModel(format!(
                "p = {} but {} weights given",
                s.p,
                s.weights.len()
            )));
        }
        MtdArModel::new(s.weights, s.signs, s.binding)
    }
}

impl From<MtdArModel> for ModelSpec {
    fn from(m: MtdArModel) -> Self {
        ModelSpec {
            p: m.order(),
            weights: m.weights,
            signs: m.signs,
            binding: m.binding,
        }
    }
}

impl MtdArModel {
    /// Validates and builds a model. Weights must be nonnegative with a
    /// positive last entry and sum to one within `1e-9`; they are then
    /// renormalized exactly.
    pub fn new(weights: Vec<f64>, signs: Vec<Sign>, binding: BindingDensity) -> Result<Self> {
        let p = weights.len();
        if p == 0 {
            return Err(Error::InvalidModel("order p must be >= 1".into()));
        }
        if signs.len() != p {
            return Err(Error::InvalidModel(format!(
                "{} signs given for order {p}",
                signs.len()
            )));
        }
        if weights.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidModel("weights must be finite and nonnegative".into()));
        }
        if weights[p - 1] <= 0.0 {
            return Err(Error::InvalidModel("last weight a_p must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!("weights sum to {total}, not 1")));
        }
        let weights = weights.into_iter().map(|a| a / total).collect();
        Ok(Self {
            weights,
            signs,
            binding,
        })
    }

    pub fn order(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn sign_values(&self) -> Vec<f64> {
        self.signs.iter().map(|s| s.value()).collect()
    }

    pub fn binding(&self) -> &BindingDensity {
        &self.binding
    }

    /// Whether the binding density has zero mean direction, the setting in
    /// which the correlation, partial correlation and spectral results hold
    /// in closed form.
    pub fn zero_mean_direction(&self) -> bool {
        self.binding.mean_direction() == 0.0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn check_history(&self, history: &[Angle]) -> Result<()> {
        if history.len() != self.order() {
            return Err(Error::Contract(format!(
                "history has {} angles, model order is {}",
                history.len(),
                self.order()
            )));
        }
        Ok(())
    }

    /// Conditional density of `theta_t` given the `p` most recent angles
    /// (most recent first).
    pub fn transition_density(&self, theta: Angle, history: &[Angle]) -> Result<f64> {
        self.check_history(history)?;
        Ok(self.transition_density_raw(theta.radians(), history.iter().map(|h| h.radians())))
    }

    pub(crate) fn transition_density_raw(
        &self,
        theta: f64,
        history: impl Iterator<Item = f64>,
    ) -> f64 {
        self.weights
            .iter()
            .zip(&self.signs)
            .zip(history)
            .filter(|((a, _), _)| **a > 0.0)
            .map(|((a, q), h)| a * self.binding.density_at(theta - q.value() * h))
            .sum()
    }

    /// `E[(cos m theta_t, sin m theta_t) | history] = sum_i a_i D_m Q_i u_m(theta_{t-i})`.
    pub fn conditional_trig_moment(&self, m: u32, history: &[Angle]) -> Result<Vector2<f64>> {
        self.check_history(history)?;
        let d = RotationKernel::d(&self.binding, m)?;
        let mf = m as f64;
        let mut out = Vector2::zeros();
        for ((a, q), h) in self.weights.iter().zip(&self.signs).zip(history) {
            let (s, c) = (mf * h.radians()).sin_cos();
            out += *a * d * RotationKernel::q(*q) * Vector2::new(c, s);
        }
        Ok(out)
    }

    /// Simulates `n` observations after discarding `burn_in` draws. The
    /// first `p` angles are i.i.d. circular uniform.
    pub fn simulate(&self, n: usize, burn_in: usize, seed: u64) -> Result<AngleSeries> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.simulate_with(n, burn_in, &mut rng)
    }

    pub fn simulate_with<R: Rng + ?Sized>(
        &self,
        n: usize,
        burn_in: usize,
        rng: &mut R,
    ) -> Result<AngleSeries> {
        if n == 0 {
            return Err(Error::Contract("series length must be >= 1".into()));
        }
        let p = self.order();
        let total = p + burn_in + n;
        let mut x = Vec::with_capacity(total);
        for _ in 0..p {
            x.push(PI * (2.0 * rng.random::<f64>() - 1.0));
        }
        let mut cumulative = Vec::with_capacity(p);
        let mut acc = 0.0;
        for a in &self.weights {
            acc += a;
            cumulative.push(acc);
        }
        for t in p..total {
            let u: f64 = rng.random();
            let i = cumulative.iter().position(|&c| u < c).unwrap_or_else(|| {
                // u landed in the rounding gap above the last cumulative sum
                self.weights.iter().rposition(|&a| a > 0.0).unwrap_or(p - 1)
            });
            let eps = self.binding.draw(rng);
            x.push(wrap_radians(self.signs[i].value() * x[t - 1 - i] + eps));
        }
        AngleSeries::from_radians(x.into_iter().skip(p + burn_in))
    }

    /// `2p x 2p` companion matrix with first block row `a_i D_1 Q_i`.
    pub fn first_order_companion(&self) -> Result<DMatrix<f64>> {
        let d1 = RotationKernel::d(&self.binding, 1)?;
        let blocks: Vec<Matrix2<f64>> = self
            .weights
            .iter()
            .zip(&self.signs)
            .map(|(a, q)| *a * d1 * RotationKernel::q(*q))
            .collect();
        Ok(block_companion(&blocks))
    }

    /// First-order stationarity through the eigenvalues of the companion
    /// matrix of the mean recursion.
    pub fn first_order_stationary(&self) -> Result<Stationarity> {
        let r = spectral_radius(&self.first_order_companion()?)?;
        Ok(Stationarity {
            stationary: r < 1.0 - STATIONARITY_MARGIN,
            spectral_radius: r,
        })
    }

    /// Second-order stationarity. The decision uses the exact recursion of
    /// `vec V_t` (blocks `a_i Q_i kron D_2 Q_i`); the product radius of the
    /// two factor companions is reported as well.
    pub fn second_order_stationary(&self) -> Result<SecondOrderStationarity> {
        let d2 = RotationKernel::d(&self.binding, 2)?;
        let p = self.order();
        let mut exact = Vec::with_capacity(p);
        let mut q_blocks = Vec::with_capacity(p);
        let mut dq_blocks = Vec::with_capacity(p);
        for (a, s) in self.weights.iter().zip(&self.signs) {
            let q = RotationKernel::q(*s);
            let dq = d2 * q;
            exact.push(kron(&DMatrix::from_column_slice(2, 2, q.as_slice()), &DMatrix::from_column_slice(2, 2, dq.as_slice())) * *a);
            q_blocks.push(a.sqrt() * q);
            dq_blocks.push(a.sqrt() * dq);
        }
        let exact_radius = spectral_radius(&block_companion_dyn(&exact, 4))?;
        let lambda = spectral_radius(&block_companion(&q_blocks))?;
        let nu = spectral_radius(&block_companion(&dq_blocks))?;
        Ok(SecondOrderStationarity {
            stationary: exact_radius < 1.0 - STATIONARITY_MARGIN,
            spectral_radius: exact_radius,
            kronecker_radius: lambda * nu,
        })
    }

    /// The factor companions `(Q, DQ)` whose Kronecker product governs the
    /// stacked second-moment recursion.
    pub fn second_order_factors(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let d2 = RotationKernel::d(&self.binding, 2)?;
        let mut q_blocks = Vec::new();
        let mut dq_blocks = Vec::new();
        for (a, s) in self.weights.iter().zip(&self.signs) {
            let q = RotationKernel::q(*s);
            q_blocks.push(a.sqrt() * q);
            dq_blocks.push(a.sqrt() * d2 * q);
        }
        Ok((block_companion(&q_blocks), block_companion(&dq_blocks)))
    }

    /// AR coefficients of the cosine and sine component processes under a
    /// zero mean direction: `c_i = a_i rho_1` and `c_i = q_i a_i rho_1`.
    pub fn component_coefficients(&self) -> (Vec<f64>, Vec<f64>) {
        let rho = self.binding.resultant_length(1);
        let cos: Vec<f64> = self.weights.iter().map(|a| a * rho).collect();
        let sin: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.signs)
            .map(|(a, q)| q.value() * a * rho)
            .collect();
        (cos, sin)
    }
}

/// Block companion matrix with the given `2 x 2` first-row blocks and
/// identity blocks on the subdiagonal.
pub(crate) fn block_companion(blocks: &[Matrix2<f64>]) -> DMatrix<f64> {
    let dyn_blocks: Vec<DMatrix<f64>> = blocks
        .iter()
        .map(|b| DMatrix::from_column_slice(2, 2, b.as_slice()))
        .collect();
    block_companion_dyn(&dyn_blocks, 2)
}

fn block_companion_dyn(blocks: &[DMatrix<f64>], k: usize) -> DMatrix<f64> {
    let p = blocks.len();
    let mut m = DMatrix::zeros(k * p, k * p);
    for (j, b) in blocks.iter().enumerate() {
        m.view_mut((0, k * j), (k, k)).copy_from(b);
    }
    for i in 1..p {
        for d in 0..k {
            m[(k * i + d, k * (i - 1) + d)] = 1.0;
        }
    }
    m
}

/// Kronecker product `a kron b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Largest eigenvalue modulus of a real square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(crate::poly::eigenvalues(m)?.iter().fold(0.0, |r, z| r.max(z.norm())))
}

/// Wraps each angle of `values` (raw radians) into `[-pi, pi)`.
pub fn angles(values: &[f64]) -> Result<Vec<Angle>> {
    values.iter().map(|&v| wrap(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use std::f64::consts::TAU;

    fn wc(rho: f64) -> BindingDensity {
        BindingDensity::wrapped_cauchy(rho).unwrap()
    }

    #[test]
    fn stalling_companion_converges() {
        let m = MtdArModel::new(
            vec![0.4194110535265031, 0.29912580403853606, 0.24958382614674454, 0.03187931628821636],
            vec![Sign::Plus; 4],
            BindingDensity::von_mises(8.249106676877634).unwrap(),
        )
        .unwrap();
        let s = m.second_order_stationary().unwrap();
        assert!(s.stationary);
        assert!((s.spectral_radius - 0.8759786970784371).abs() < 1e-10);
    }

    fn ar2(q2: Sign) -> MtdArModel {
        MtdArModel::new(vec![0.3, 0.7], vec![Sign::Plus, q2], wc(0.9)).unwrap()
    }

    #[test]
    fn validation() {
        assert!(MtdArModel::new(vec![], vec![], wc(0.5)).is_err());
        assert!(MtdArModel::new(vec![0.5, 0.5], vec![Sign::Plus], wc(0.5)).is_err());
        assert!(MtdArModel::new(vec![0.6, 0.5], vec![Sign::Plus; 2], wc(0.5)).is_err());
        assert!(MtdArModel::new(vec![1.0, 0.0], vec![Sign::Plus; 2], wc(0.5)).is_err());
        assert!(MtdArModel::new(vec![-0.1, 1.1], vec![Sign::Plus; 2], wc(0.5)).is_err());
        assert!(MtdArModel::new(vec![0.0, 1.0], vec![Sign::Plus; 2], wc(0.5)).is_ok());
    }

    #[test]
    fn single_component_reduces_to_binding() {
        let g = wc(0.7);
        let m = MtdArModel::new(vec![1.0], vec![Sign::Plus], g).unwrap();
        let t = wrap(2.9).unwrap();
        let h = wrap(-3.0).unwrap();
        let f = m.transition_density(t, &[h]).unwrap();
        assert!((f - g.density(t - h)).abs() < 1e-15);
    }

    #[test]
    fn coincident_history_collapses_mixture() {
        let m = ar2(Sign::Plus);
        let h = wrap(1.1).unwrap();
        let t = wrap(-0.4).unwrap();
        let f = m.transition_density(t, &[h, h]).unwrap();
        assert!((f - m.binding().density(t - h)).abs() < 1e-15);
    }

    #[test]
    fn history_length_checked() {
        let m = ar2(Sign::Plus);
        let h = wrap(0.1).unwrap();
        assert!(matches!(m.transition_density(h, &[h]), Err(Error::Contract(_))));
        assert!(matches!(m.conditional_trig_moment(1, &[h, h, h]), Err(Error::Contract(_))));
    }

    #[test]
    fn transition_density_normalized() {
        let m = ar2(Sign::Minus);
        let h = angles(&[0.4, -2.2]).unwrap();
        let v = quad::integrate(
            |t| m.transition_density_raw(t, h.iter().map(|a| a.radians())),
            -PI,
            PI,
            1e-13,
            1e-12,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn conditional_moment_examples() {
        let m = MtdArModel::new(vec![1.0], vec![Sign::Plus], wc(0.6)).unwrap();
        let v = m.conditional_trig_moment(2, &[Angle::ZERO]).unwrap();
        assert!((v[0] - 0.36).abs() < 1e-15 && v[1].abs() < 1e-15);

        let m = MtdArModel::new(vec![1.0], vec![Sign::Minus], wc(0.6)).unwrap();
        let h = wrap(PI / 2.0).unwrap();
        let v = m.conditional_trig_moment(1, &[h]).unwrap();
        assert!(v[0].abs() < 1e-15 && (v[1] + 0.6).abs() < 1e-15);
        let oracle = quad::integrate(
            |t| t.sin() * m.transition_density_raw(t, [h.radians()].into_iter()),
            -PI,
            PI,
            1e-13,
            1e-12,
        )
        .unwrap();
        assert!((oracle + 0.6).abs() < 1e-8);

        let m = MtdArModel::new(vec![1.0], vec![Sign::Plus], wc(0.0)).unwrap();
        let v = m.conditional_trig_moment(1, &[h]).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn ar1_first_order_radius_is_rho() {
        for s in [Sign::Plus, Sign::Minus] {
            let m = MtdArModel::new(vec![1.0], vec![s], wc(0.37)).unwrap();
            let st = m.first_order_stationary().unwrap();
            assert!(st.stationary);
            assert!((st.spectral_radius - 0.37).abs() < 1e-14);
        }
        let m = MtdArModel::new(vec![1.0], vec![Sign::Plus], wc(0.0)).unwrap();
        assert_eq!(m.first_order_stationary().unwrap().spectral_radius, 0.0);
    }

    #[test]
    fn ar1_always_second_order_stationary() {
        for s in [Sign::Plus, Sign::Minus] {
            let g = BindingDensity::von_mises(40.0).unwrap();
            let m = MtdArModel::new(vec![1.0], vec![s], g).unwrap();
            let st = m.second_order_stationary().unwrap();
            assert!(st.stationary);
            assert!((st.spectral_radius - g.resultant_length(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn ar2_second_order_reference_model() {
        let m = ar2(Sign::Plus);
        let st = m.second_order_stationary().unwrap();
        assert!(st.stationary);
        // roots of l^2 - 0.243 l - 0.567
        let expected = (0.243 + (0.243f64.powi(2) + 4.0 * 0.567).sqrt()) / 2.0;
        assert!((st.spectral_radius - expected).abs() < 1e-12);
        // the factorized product of the two companion spectra exceeds one
        assert!(st.kronecker_radius > 1.0);
    }

    #[test]
    fn kronecker_radius_matches_dense_product() {
        let m = MtdArModel::new(
            vec![0.2, 0.5, 0.3],
            vec![Sign::Plus, Sign::Minus, Sign::Plus],
            BindingDensity::von_mises(3.0).unwrap().with_mean_direction(0.3).unwrap(),
        )
        .unwrap();
        let (q, dq) = m.second_order_factors().unwrap();
        let dense = spectral_radius(&kron(&q, &dq)).unwrap();
        let st = m.second_order_stationary().unwrap();
        assert!((dense - st.kronecker_radius).abs() < 1e-10);
    }

    #[test]
    fn simulation_reproducible_and_wrapped() {
        let m = ar2(Sign::Minus);
        let a = m.simulate(500, 50, 3).unwrap();
        let b = m.simulate(500, 50, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        assert!(a.radians().iter().all(|x| (-PI..PI).contains(x)));
        assert!(m.simulate(0, 10, 1).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = MtdArModel::new(
            vec![0.123456789, 1.0 - 0.123456789],
            vec![Sign::Minus, Sign::Plus],
            BindingDensity::von_mises(7.25).unwrap(),
        )
        .unwrap();
        let s = m.to_json().unwrap();
        let back = MtdArModel::from_json(&s).unwrap();
        for (x, y) in back.weights().iter().zip(m.weights()) {
            assert!(((x - y) / y).abs() <= 1e-15);
        }
        assert_eq!(back.signs(), m.signs());
        assert_eq!(back.binding(), m.binding());
        let doc = r#"{"p":1,"weights":[1.0],"signs":[2],"binding":{"family":"wrapped_cauchy","concentration":0.5}}"#;
        assert!(MtdArModel::from_json(doc).is_err());
        let doc = r#"{"p":2,"weights":[1.0],"signs":[1],"binding":{"family":"wrapped_cauchy","concentration":0.5}}"#;
        assert!(MtdArModel::from_json(doc).is_err());
    }

    #[test]
    fn uniform_marginal_density_constant() {
        let m = ar2(Sign::Minus);
        let v = quad::integrate(
            |h1| {
                quad::integrate(
                    |h2| m.transition_density_raw(0.3, [h1, h2].into_iter()),
                    -PI,
                    PI,
                    1e-12,
                    1e-10,
                )
                .unwrap()
            },
            -PI,
            PI,
            1e-10,
            1e-10,
        )
        .unwrap();
        // integrating the kernel against a uniform history gives a uniform law
        assert!((v / (TAU * TAU) - 1.0 / TAU).abs() < 1e-8);
    }
}
