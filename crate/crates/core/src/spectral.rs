//! Kemeny constant from the spectrum of `P`: `K = sum_{k>=1} 1 / (1 - alpha_k)`
//! over the eigenvalues other than the unit one, plus the `(n - 1) / 2`
//! lower bound.

use num_complex::Complex64;
use serde::Serialize;

use crate::chain::StochasticMatrix;
use crate::eigen;
use crate::error::{Error, Result};

/// Maximum distance of the designated unit eigenvalue from 1.
pub const UNIT_EIGENVALUE_TOL: f64 = 1e-8;
/// A second eigenvalue this close to 1 makes the chain effectively reducible.
pub const MULTIPLICITY_TOL: f64 = 1e-12;
/// Per-state allowance for the imaginary residue of the spectral sum.
pub const IMAG_RESIDUAL_TOL: f64 = 1e-8;
/// Slack allowed below `(n - 1) / 2` before the lower bound counts as violated.
pub const LOWER_BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(c: Complex64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

impl From<ComplexValue> for Complex64 {
    fn from(c: ComplexValue) -> Self {
        Complex64::new(c.re, c.im)
    }
}

/// Eigenvalues of `P` with the unit eigenvalue moved to the front.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    alphas: Vec<Complex64>,
}

impl SpectralSummary {
    /// Builds a summary from raw eigenvalues, designating the one closest
    /// to 1 as `alpha_0`.
    pub fn from_eigenvalues(mut alphas: Vec<Complex64>) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        let (idx, dist) = alphas
            .iter()
            .enumerate()
            .map(|(k, a)| (k, (a - one).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::Structure("empty spectrum".into()))?;
        if dist > UNIT_EIGENVALUE_TOL {
            return Err(Error::Structure(format!(
                "no eigenvalue within {UNIT_EIGENVALUE_TOL:e} of 1 (closest at distance {dist:e})"
            )));
        }
        let unit = alphas.remove(idx);
        alphas.insert(0, unit);
        Ok(Self { alphas })
    }

    /// `alpha_0` first.
    pub fn alphas(&self) -> &[Complex64] {
        &self.alphas
    }

    /// Eigenvalues of `I - P`, `lambda_k = 1 - alpha_k`.
    pub fn lambdas(&self) -> Vec<Complex64> {
        self.alphas
            .iter()
            .map(|a| Complex64::new(1.0, 0.0) - a)
            .collect()
    }

    /// `1 / (1 - alpha_k)` for `k >= 1`: the nonzero eigenvalues of `Z`.
    pub fn resolvent_eigenvalues(&self) -> Vec<Complex64> {
        self.alphas[1..]
            .iter()
            .map(|a| (Complex64::new(1.0, 0.0) - a).inv())
            .collect()
    }

    /// `max_k |alpha_k|`.
    pub fn spectral_radius(&self) -> f64 {
        self.alphas.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// `min_{k>=1} Re(1 / (1 - alpha_k))`; at least 1/2 for any stochastic
    /// matrix. `None` for a single state.
    pub fn min_resolvent_real_part(&self) -> Option<f64> {
        self.resolvent_eigenvalues()
            .into_iter()
            .map(|l| l.re)
            .reduce(f64::min)
    }

    /// Largest distance from an eigenvalue's conjugate to its nearest
    /// neighbour in the spectrum; zero for an exactly conjugate-closed set.
    pub fn conjugate_closure_residual(&self) -> f64 {
        self.alphas
            .iter()
            .map(|a| {
                let c = a.conj();
                self.alphas
                    .iter()
                    .map(|b| (b - c).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

/// All `n` eigenvalues of `P` via Hessenberg reduction and shifted QR.
pub fn eigenvalues(p: &StochasticMatrix) -> Result<SpectralSummary> {
    SpectralSummary::from_eigenvalues(eigen::eigenvalues(p.entries())?)
}

/// Result of [`kemeny_spectral`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralKemeny {
    pub kemeny: f64,
    /// `|Im sum_k 1/(1 - alpha_k)|` before it was discarded.
    pub residual_imag: f64,
}

/// `Re sum_{k>=1} 1 / (1 - alpha_k)`.
///
/// Conjugate pairs cancel in the imaginary part; a residue above
/// `1e-8 * n` is a numerical failure.
pub fn kemeny_spectral(summary: &SpectralSummary) -> Result<SpectralKemeny> {
    let one = Complex64::new(1.0, 0.0);
    if let Some(distance) = summary.alphas[1..]
        .iter()
        .map(|a| (one - a).norm())
        .reduce(f64::min)
        .filter(|&d| d <= MULTIPLICITY_TOL)
    {
        return Err(Error::Multiplicity { distance });
    }
    let sum: Complex64 = summary.resolvent_eigenvalues().into_iter().sum();
    let n = summary.alphas.len();
    let residual_imag = sum.im.abs();
    if residual_imag > IMAG_RESIDUAL_TOL * n as f64 {
        return Err(Error::Numerical(format!(
            "spectral Kemeny sum has imaginary part {residual_imag:e}"
        )));
    }
    Ok(SpectralKemeny {
        kemeny: sum.re,
        residual_imag,
    })
}

/// `K` against its floor `(n - 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub kemeny: f64,
    pub floor: f64,
    pub slack: f64,
    /// `slack <= 1e-9`; deterministic cycles attain the bound.
    pub equality: bool,
}

pub fn check_lower_bound(kemeny: f64, n: usize) -> Result<LowerBoundReport> {
    let floor = (n as f64 - 1.0) / 2.0;
    let slack = kemeny - floor;
    if slack < -LOWER_BOUND_TOL {
        return Err(Error::Consistency(format!(
            "Kemeny constant {kemeny} is below (n - 1) / 2 = {floor}"
        )));
    }
    Ok(LowerBoundReport {
        kemeny,
        floor,
        slack,
        equality: slack <= LOWER_BOUND_TOL,
    })
}
