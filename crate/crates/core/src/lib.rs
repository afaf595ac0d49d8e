//! Higher-order Markov processes on the circle built from mixture transition
//! distributions (MTD-AR(p)).
//!
//! The crate covers binding densities and their moments ([`circular`]), the
//! process itself ([`model`]), the circular autocorrelation and partial
//! autocorrelation functions ([`correlation`], [`partial`]), spectral
//! densities ([`spectrum`]) and maximum-likelihood fitting with order
//! selection ([`inference`]).

pub mod circular;
pub mod correlation;
pub mod error;
pub mod inference;
pub mod model;
pub mod partial;
pub mod poly;
pub mod quad;
pub mod spectrum;
pub mod study;

pub use circular::{wrap, Angle, AngleSeries, BindingDensity, Family, TrigMoment};
pub use error::{Error, Result};
pub use model::{MtdArModel, RotationKernel, Sign};
