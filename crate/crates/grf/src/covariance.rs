//! Isotropic covariance families (Matérn, Gaussian, Cauchy), their
//! stationary forms, and exact spectral densities.
//!
//! All families are normalised to unit marginal variance, `rho(0) = 1`;
//! variance scaling is a caller-side multiply. The Fourier convention is
//! `phi_hat(y) = int phi(x) exp(-2 pi i y.x) dx`, under which the Matérn
//! spectral density is
//!
//! ```text
//! phi_hat(y) = ell^d C_nu (2 nu)^nu (2 nu + (2 pi ell |y|)^2)^{-(nu + d/2)},
//! C_nu = (4 pi)^{d/2} Gamma(nu + d/2) / Gamma(nu).
//! ```

use statrs::function::gamma::gamma;

use crate::bessel::bessel_k;
use crate::error::{GrfError, Result};

/// Argument beyond which the Matérn kernel underflows f64 and the
/// periodisation tail sums want a clean zero.
const MATERN_ARG_CUTOFF: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Matern,
    Gaussian,
    Cauchy,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Matern => "matern",
            Family::Gaussian => "gaussian",
            Family::Cauchy => "cauchy",
        }
    }
}

/// An isotropic covariance model: family, smoothness (Matérn only) and
/// correlation length in domain units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceModel {
    family: Family,
    nu: f64,
    ell: f64,
}

impl CovarianceModel {
    pub fn matern(nu: f64, ell: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(GrfError::Domain(format!("Matérn smoothness nu = {nu} must be positive")));
        }
        if !(ell > 0.0) {
            return Err(GrfError::Domain(format!("correlation length ell = {ell} must be positive")));
        }
        Ok(Self { family: Family::Matern, nu, ell })
    }

    pub fn gaussian(ell: f64) -> Result<Self> {
        if !(ell > 0.0) {
            return Err(GrfError::Domain(format!("correlation length ell = {ell} must be positive")));
        }
        Ok(Self { family: Family::Gaussian, nu: f64::NAN, ell })
    }

    pub fn cauchy(ell: f64) -> Result<Self> {
        if !(ell > 0.0) {
            return Err(GrfError::Domain(format!("correlation length ell = {ell} must be positive")));
        }
        Ok(Self { family: Family::Cauchy, nu: f64::NAN, ell })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Smoothness parameter; only meaningful for the Matérn family.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Isotropic covariance rho(s) at normalised separation s = |delta|/ell.
    ///
    /// The Matérn value at s = 0 is defined by continuity as exactly 1 (the
    /// product s^nu K_nu(s) has a removable singularity there), and
    /// arguments with sqrt(2 nu) s > 700 return 0.
    pub fn rho(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(GrfError::Domain(format!("rho: separation {s} must be nonnegative")));
        }
        Ok(match self.family {
            Family::Matern => {
                let t = (2.0 * self.nu).sqrt() * s;
                if t == 0.0 {
                    1.0
                } else if t > MATERN_ARG_CUTOFF {
                    0.0
                } else {
                    2.0_f64.powf(1.0 - self.nu) / gamma(self.nu)
                        * t.powf(self.nu)
                        * bessel_k(self.nu, t)?
                }
            }
            Family::Gaussian => (-0.5 * s * s).exp(),
            Family::Cauchy => 1.0 / (1.0 + s * s),
        })
    }

    /// Stationary covariance phi(delta) = rho(|delta|_2 / ell).
    pub fn stationary(&self, delta: &[f64]) -> Result<f64> {
        let norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.rho(norm / self.ell)
    }
}

/// Exact spectral density of a covariance model in dimension `dim`.
#[derive(Debug, Clone, Copy)]
pub struct SpectralDensity {
    model: CovarianceModel,
    dim: usize,
}

impl SpectralDensity {
    /// Gaussian and Cauchy densities are only available in d = 1; the
    /// Matérn Hankel transform covers d in {1, 2, 3}.
    pub fn new(model: CovarianceModel, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(GrfError::Unsupported(format!("dimension {dim} not in 1..=3")));
        }
        if dim > 1 && model.family() != Family::Matern {
            return Err(GrfError::Unsupported(format!(
                "{} spectral density only available in d = 1",
                model.family().name()
            )));
        }
        Ok(Self { model, dim })
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Density at radius r = |y|_2 in frequency space; strictly positive.
    pub fn value_radial(&self, r: f64) -> f64 {
        let ell = self.model.ell();
        let d = self.dim as f64;
        match self.model.family() {
            Family::Matern => {
                let nu = self.model.nu();
                let two_nu = 2.0 * nu;
                let c_nu = (4.0 * std::f64::consts::PI).powf(d / 2.0) * gamma(nu + d / 2.0)
                    / gamma(nu);
                let q = 2.0 * std::f64::consts::PI * ell * r;
                ell.powf(d) * c_nu * two_nu.powf(nu) * (two_nu + q * q).powf(-(nu + d / 2.0))
            }
            Family::Gaussian => {
                let pi = std::f64::consts::PI;
                (2.0 * pi).sqrt() * ell * (-2.0 * pi * pi * ell * ell * r * r).exp()
            }
            Family::Cauchy => {
                let pi = std::f64::consts::PI;
                pi * ell * (-2.0 * pi * ell * r.abs()).exp()
            }
        }
    }

    /// Density at a frequency vector `y` of length `dim`.
    pub fn value(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(GrfError::ShapeMismatch { expected: vec![self.dim], got: vec![y.len()] });
        }
        Ok(self.value_radial(y.iter().map(|v| v * v).sum::<f64>().sqrt()))
    }
}

/// Checks the decay bound `phi_hat(y) <= A (1 + |y|)^{-(d + 2 nu)}` with
/// `A = C_nu ell^d nu^{-d/2} 2^{2 nu + d/2}` at every sample point; Matérn
/// only.
pub fn check_assumption_bound(
    model: &CovarianceModel,
    dim: usize,
    samples: &[Vec<f64>],
) -> Result<bool> {
    if model.family() != Family::Matern {
        return Err(GrfError::Domain("decay bound constants are Matérn-specific".into()));
    }
    let sd = SpectralDensity::new(*model, dim)?;
    let nu = model.nu();
    let d = dim as f64;
    let c_nu = (4.0 * std::f64::consts::PI).powf(d / 2.0) * gamma(nu + d / 2.0) / gamma(nu);
    let a = c_nu * model.ell().powf(d) * nu.powf(-d / 2.0) * 2.0_f64.powf(2.0 * nu + d / 2.0);
    let eps = 2.0 * nu;
    for y in samples {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = a * (1.0 + r).powf(-(d + eps));
        if sd.value_radial(r) > bound {
            return Ok(false);
        }
    }
    Ok(true)
}
