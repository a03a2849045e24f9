//! Generation of centred Gaussian random fields with isotropic covariance
//! on regular grids.
//!
//! Three interchangeable samplers are provided:
//!
//! * [`sampler::PeriodicSampler`] — naive periodisation evaluated with a
//!   complex FFT; covariance is the truncated periodised covariance with
//!   period `alpha`.
//! * [`sampler::CeSampler`] — classical circulant embedding; exact target
//!   covariance whenever a nonnegative embedding spectrum exists (see
//!   [`periodisation::minimal_embedding`]).
//! * [`sampler::DnaSampler`] — Dirichlet-Neumann averaging: `2^d` fields
//!   with mixed cosine/sine (Neumann/Dirichlet) boundary conditions are
//!   averaged, cancelling the anisotropic boundary terms and yielding an
//!   isotropic covariance with period `2*alpha` at the cost of a single
//!   DCT-I/DST-I pass per field.
//!
//! A finite-element variant of the averaging construction for the Whittle
//! SPDE lives in [`spde`], and [`stats`] holds the Monte-Carlo estimators
//! and the analytic covariance error bounds used to validate all of the
//! above.

pub mod bessel;
pub mod covariance;
pub mod error;
pub mod field;
pub mod periodisation;
pub mod rng;
pub mod sampler;
pub mod spde;
pub mod stats;
pub mod transforms;

pub use covariance::{CovarianceModel, Family, SpectralDensity};
pub use error::GrfError;
pub use field::{FieldRealisation, GridKind};
pub use periodisation::{PeriodisationParams, Scaling, SpectrumTable};
pub use rng::RngStream;
pub use sampler::BoundaryMask;
