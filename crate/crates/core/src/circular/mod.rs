//! Angles, observed angle series and the two binding density families
//! (wrapped Cauchy and von Mises) with their trigonometric moments,
//! densities and exact samplers.

pub mod bessel;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower/upper margin of the wrapped Cauchy concentration parameter space.
pub const RHO_MARGIN: f64 = 1e-4;
/// Lower bound of the von Mises concentration parameter space.
pub const KAPPA_MIN: f64 = 1e-4;
/// Upper bound of the von Mises concentration parameter space.
pub const KAPPA_MAX: f64 = 500.0;

/// Reduces a finite real to the half-open interval `[-pi, pi)`.
#[inline]
pub(crate) fn wrap_radians(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// An angle in radians, always normalized to `[-pi, pi)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn from_degrees(deg: f64) -> Result<Angle> {
        wrap(deg.to_radians())
    }

    pub fn cos(self) -> f64 {
        self.0.cos()
    }

    pub fn sin(self) -> f64 {
        self.0.sin()
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        Angle(wrap_radians(self.0 + rhs.0))
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle(wrap_radians(self.0 - rhs.0))
    }
}

impl Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        Angle(wrap_radians(-self.0))
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        wrap(x).map_err(serde::de::Error::custom)
    }
}

/// Maps `x` onto the circle, returning the representative in `[-pi, pi)`.
pub fn wrap(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("cannot wrap non-finite angle {x}")));
    }
    Ok(Angle(wrap_radians(x)))
}

/// An ordered, non-empty sequence of angles.
///
/// `origin` and `step` are optional sampling metadata; every analysis in
/// this crate treats the series as equally spaced regardless.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleSeries {
    values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl AngleSeries {
    /// Builds a series from raw radians, wrapping each value.
    pub fn from_radians(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let values = values
            .into_iter()
            .map(|x| wrap(x).map(Angle::radians))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::Contract("angle series must be non-empty".into()));
        }
        Ok(Self {
            values,
            origin: None,
            step: None,
        })
    }

    pub fn from_degrees(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        Self::from_radians(values.into_iter().map(f64::to_radians))
    }

    pub fn from_angles(values: Vec<Angle>) -> Result<Self> {
        Self::from_radians(values.into_iter().map(Angle::radians))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; a series holds at least one angle.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn radians(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> Option<Angle> {
        self.values.get(i).copied().map(Angle)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = Angle> + '_ {
        self.values.iter().copied().map(Angle)
    }

    pub fn reversed(&self) -> AngleSeries {
        let mut values = self.values.clone();
        values.reverse();
        AngleSeries {
            values,
            origin: None,
            step: self.step,
        }
    }

    /// Sample mean resultant length `|n^{-1} sum e^{i m theta_t}|`.
    pub fn mean_resultant_length(&self, m: u32) -> f64 {
        let m = m as f64;
        let (c, s) = self.values.iter().fold((0.0, 0.0), |(c, s), &x| {
            let (sn, cs) = (m * x).sin_cos();
            (c + cs, s + sn)
        });
        let n = self.values.len() as f64;
        (c * c + s * s).sqrt() / n
    }

    /// Sample trigonometric moment `n^{-1} sum (cos m theta_t, sin m theta_t)`.
    pub fn trig_moment(&self, m: u32) -> (f64, f64) {
        let m = m as f64;
        let n = self.values.len() as f64;
        let (c, s) = self.values.iter().fold((0.0, 0.0), |(c, s), &x| {
            let (sn, cs) = (m * x).sin_cos();
            (c + cs, s + sn)
        });
        (c / n, s / n)
    }

    /// Upper-tail p-value of the Rayleigh test of circular uniformity.
    pub fn rayleigh_p_value(&self) -> f64 {
        let n = self.len() as f64;
        let r = self.mean_resultant_length(1);
        let z = n * r * r;
        // second-order correction, accurate for the sample sizes used here
        let p = (-z).exp()
            * (1.0 + (2.0 * z - z * z) / (4.0 * n)
                - (24.0 * z - 132.0 * z * z + 76.0 * z.powi(3) - 9.0 * z.powi(4))
                    / (288.0 * n * n));
        p.clamp(0.0, 1.0)
    }
}

/// The two supported binding density families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    WrappedCauchy,
    VonMises,
}

impl Family {
    /// Compact parameter space `[lo, hi]` of the concentration used for
    /// estimation.
    pub fn concentration_bounds(self) -> (f64, f64) {
        match self {
            Family::WrappedCauchy => (RHO_MARGIN, 1.0 - RHO_MARGIN),
            Family::VonMises => (KAPPA_MIN, KAPPA_MAX),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::WrappedCauchy => "wrapped_cauchy",
            Family::VonMises => "von_mises",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "wrapped_cauchy" | "wc" | "cauchy" => Ok(Family::WrappedCauchy),
            "von_mises" | "vm" => Ok(Family::VonMises),
            other => Err(Error::Domain(format!("unknown density family `{other}`"))),
        }
    }
}

/// `m`-th trigonometric moment `phi_m = rho_m e^{i mu_m}` of a circular density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigMoment {
    pub resultant_length: f64,
    pub direction: f64,
}

/// A unimodal symmetric circular density used as the innovation law of each
/// mixture component.
///
/// The concentration is `rho` in `[0, 1)` for the wrapped Cauchy and `kappa`
/// in `[0, inf)` for the von Mises. Zero concentration is the circular
/// uniform law. Estimation restricts concentrations further to
/// [`Family::concentration_bounds`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BindingSpec", into = "BindingSpec")]
pub struct BindingDensity {
    family: Family,
    concentration: f64,
    mean_direction: f64,
}

#[derive(Serialize, Deserialize)]
struct BindingSpec {
    family: Family,
    concentration: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    mean_direction: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl TryFrom<BindingSpec> for BindingDensity {
    type Error = Error;
    fn try_from(s: BindingSpec) -> Result<Self> {
        BindingDensity::new(s.family, s.concentration)?.with_mean_direction(s.mean_direction)
    }
}

impl From<BindingDensity> for BindingSpec {
    fn from(b: BindingDensity) -> Self {
        BindingSpec {
            family: b.family,
            concentration: b.concentration,
            mean_direction: b.mean_direction,
        }
    }
}

impl BindingDensity {
    pub fn new(family: Family, concentration: f64) -> Result<Self> {
        let ok = match family {
            Family::WrappedCauchy => (0.0..1.0).contains(&concentration),
            Family::VonMises => concentration >= 0.0 && concentration.is_finite(),
        };
        if !ok {
            return Err(Error::Domain(format!(
                "{family} concentration {concentration} outside its valid range"
            )));
        }
        Ok(Self {
            family,
            concentration,
            mean_direction: 0.0,
        })
    }

    pub fn wrapped_cauchy(rho: f64) -> Result<Self> {
        Self::new(Family::WrappedCauchy, rho)
    }

    pub fn von_mises(kappa: f64) -> Result<Self> {
        Self::new(Family::VonMises, kappa)
    }

    /// Shifts the density to a nonzero mean direction. Only forward
    /// simulation and moment evaluation honour this; estimation always uses
    /// a zero mean direction.
    pub fn with_mean_direction(mut self, mu: f64) -> Result<Self> {
        self.mean_direction = wrap(mu)?.radians();
        Ok(self)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    pub fn mean_direction(&self) -> f64 {
        self.mean_direction
    }

    /// Whether the concentration lies in the compact estimation space.
    pub fn in_parameter_space(&self) -> bool {
        let (lo, hi) = self.family.concentration_bounds();
        (lo..=hi).contains(&self.concentration)
    }

    /// Density at `theta` (any real; the density is 2pi-periodic).
    pub fn density_at(&self, theta: f64) -> f64 {
        let c = (theta - self.mean_direction).cos();
        self.density_from_cos(c)
    }

    pub fn density(&self, theta: Angle) -> f64 {
        self.density_at(theta.0)
    }

    /// Density expressed through `cos(theta - mu)`; both families depend on
    /// the angle only through it.
    #[inline]
    pub(crate) fn density_from_cos(&self, c: f64) -> f64 {
        match self.family {
            Family::WrappedCauchy => {
                let r = self.concentration;
                (1.0 - r * r) / (TAU * (1.0 + r * r - 2.0 * r * c))
            }
            Family::VonMises => {
                let k = self.concentration;
                (k * (c - 1.0)).exp() / (TAU * bessel::i0_scaled(k))
            }
        }
    }

    pub fn ln_density_at(&self, theta: f64) -> f64 {
        let c = (theta - self.mean_direction).cos();
        match self.family {
            Family::WrappedCauchy => self.density_from_cos(c).ln(),
            Family::VonMises => {
                let k = self.concentration;
                k * c - TAU.ln() - bessel::ln_i0(k)
            }
        }
    }

    /// Mean resultant length `rho_m` of the `m`-th moment (`m >= 0`).
    pub fn resultant_length(&self, m: u32) -> f64 {
        match self.family {
            Family::WrappedCauchy => self.concentration.powi(m as i32),
            Family::VonMises => bessel::ratio(m, self.concentration),
        }
    }

    /// `m`-th trigonometric moment. Errors for `m = 0`.
    pub fn trig_moment(&self, m: u32) -> Result<TrigMoment> {
        if m == 0 {
            return Err(Error::Domain("trigonometric moment order must be >= 1".into()));
        }
        Ok(TrigMoment {
            resultant_length: self.resultant_length(m),
            direction: wrap_radians(m as f64 * self.mean_direction),
        })
    }

    /// One exact draw, returned as raw radians in `[-pi, pi)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = match self.family {
            Family::WrappedCauchy => sample_wrapped_cauchy(self.concentration, rng),
            Family::VonMises => sample_von_mises(self.concentration, rng),
        };
        wrap_radians(x + self.mean_direction)
    }

    /// `n` i.i.d. draws, reproducible from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<AngleSeries> {
        if n == 0 {
            return Err(Error::Contract("sample size must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AngleSeries::from_radians((0..n).map(|_| self.draw(&mut rng)))
    }
}

/// Inverse-CDF draw from a zero-mean wrapped Cauchy:
/// `tan(theta/2) = (1-rho)/(1+rho) * tan(pi (u - 1/2))`.
fn sample_wrapped_cauchy<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let t = ((1.0 - rho) / (1.0 + rho)) * (PI * (u - 0.5)).tan();
    2.0 * t.atan()
}

/// Best & Fisher (1979) rejection sampler for a zero-mean von Mises.
fn sample_von_mises<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return PI * (2.0 * rng.random::<f64>() - 1.0);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return if rng.random::<f64>() < 0.5 { -theta } else { theta };
        }
    }
}
