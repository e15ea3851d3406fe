//! Discrete renewal theory for visits to a single state.
//!
//! For return times with mean `mu` and variance `sigma2`, the mean wait `tau`
//! from an equilibrium instant to the next renewal satisfies
//! `tau = (mu^2 + sigma2) / (2 mu) - 1/2`, the discrete-time bus equality.
//! For a Markov chain and state `j`: `mu = 1/w_j`, `tau = Z_jj / w_j`.

use serde::Serialize;

use crate::equilibrium::EquilibriumDistribution;
use crate::error::{Error, Result};
use crate::resolvent::FundamentalMatrix;

/// Negative values above this are rounding noise and clamp to zero.
pub const CLAMP_TOL: f64 = 1e-12;
/// Negative values below this are reported as consistency failures.
pub const NEGATIVE_TOL: f64 = 1e-9;
/// Tolerance on the total mass of an [`InterarrivalDistribution`].
pub const MASS_TOL: f64 = 1e-12;
/// Relative agreement required between the two routes to `tau`.
pub const BUS_IDENTITY_TOL: f64 = 1e-12;

/// Renewal description of visits to one state of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenewalStats {
    pub state: usize,
    /// Mean return time, `1 / w_j`.
    pub mu: f64,
    /// Mean time from equilibrium to the next visit, `Z_jj / w_j`.
    pub tau: f64,
    /// Return-time variance, `2 mu tau + mu - mu^2`.
    pub sigma2: f64,
    /// Per-step variance of the visit count, `2 Z_jj w_j + w_j^2 - w_j`.
    pub clt_rate: f64,
    pub z_diag: f64,
}

fn clamp_nonnegative(value: f64, what: &str, state: usize) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CLAMP_TOL {
        Ok(0.0)
    } else if value >= -NEGATIVE_TOL {
        // Between the clamp and failure thresholds: keep the value so the
        // caller can see it.
        Ok(value)
    } else {
        Err(Error::Consistency(format!(
            "{what} for state {state} is negative ({value:e})"
        )))
    }
}

pub fn renewal_stats(
    z: &FundamentalMatrix,
    w: &EquilibriumDistribution,
    j: usize,
) -> Result<RenewalStats> {
    if j >= w.n() {
        return Err(Error::Domain(format!(
            "state {j} out of range for n = {}",
            w.n()
        )));
    }
    let wj = w.get(j);
    let z_diag = z.diag(j);
    let mu = 1.0 / wj;
    let tau = z_diag / wj;
    let sigma2 = clamp_nonnegative(2.0 * mu * tau + mu - mu * mu, "return-time variance", j)?;
    let clt_rate = clamp_nonnegative(2.0 * z_diag * wj + wj * wj - wj, "CLT variance rate", j)?;
    Ok(RenewalStats {
        state: j,
        mu,
        tau,
        sigma2,
        clt_rate,
        z_diag,
    })
}

/// Renewal statistics for every state.
pub fn all_renewal_stats(
    z: &FundamentalMatrix,
    w: &EquilibriumDistribution,
) -> Result<Vec<RenewalStats>> {
    (0..w.n()).map(|j| renewal_stats(z, w, j)).collect()
}

fn check_moments(mu: f64, sigma2: f64) -> Result<()> {
    if !mu.is_finite() || mu < 1.0 {
        return Err(Error::Domain(format!(
            "mean interarrival time {mu} must be a finite value >= 1"
        )));
    }
    if !sigma2.is_finite() || sigma2 < 0.0 {
        return Err(Error::Domain(format!(
            "variance {sigma2} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// Bus equality: `tau = (mu^2 + sigma2) / (2 mu) - 1/2`.
pub fn bus_tau(mu: f64, sigma2: f64) -> Result<f64> {
    check_moments(mu, sigma2)?;
    Ok((mu * mu + sigma2) / (2.0 * mu) - 0.5)
}

/// Lower bound `mu/2 - 1/2` on `tau`, attained iff `sigma2 = 0`.
pub fn bus_floor(mu: f64) -> f64 {
    mu / 2.0 - 0.5
}

/// Inverse of the conversion in [`renewal_stats`]:
/// `Z_jj = (sigma2 - mu + mu^2) / (2 mu^2)`.
pub fn z_diag_from_moments(mu: f64, sigma2: f64) -> Result<f64> {
    check_moments(mu, sigma2)?;
    Ok((sigma2 - mu + mu * mu) / (2.0 * mu * mu))
}

/// `sigma2 = 2 mu tau + mu - mu^2`.
pub fn sigma2_from_tau(mu: f64, tau: f64) -> f64 {
    2.0 * mu * tau + mu - mu * mu
}

/// Interarrival law with finite support on the positive integers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterarrivalDistribution {
    support: Vec<(u64, f64)>,
}

impl InterarrivalDistribution {
    pub fn new(support: Vec<(u64, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Domain(
                "interarrival distribution has empty support".into(),
            ));
        }
        for &(n, p) in &support {
            if n == 0 {
                return Err(Error::Domain("interarrival times must be >= 1".into()));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Domain(format!("p({n}) = {p} is not a probability")));
            }
        }
        let mass: f64 = support.iter().map(|&(_, p)| p).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!("probabilities sum to {mass}, not 1")));
        }
        Ok(Self { support })
    }

    /// Normalizes nonnegative weights into a distribution; used for
    /// truncating unbounded laws.
    pub fn from_weights(weights: Vec<(u64, f64)>) -> Result<Self> {
        let mass: f64 = weights.iter().map(|&(_, p)| p).sum();
        if mass.is_nan() || mass <= 0.0 {
            return Err(Error::Domain("weights have no positive mass".into()));
        }
        Self::new(weights.into_iter().map(|(n, p)| (n, p / mass)).collect())
    }

    pub fn point_mass(n: u64) -> Result<Self> {
        Self::new(vec![(n, 1.0)])
    }

    /// Geometric law `p(n) = q (1-q)^(n-1)` truncated to `1..=max_n`.
    pub fn truncated_geometric(q: f64, max_n: u64) -> Result<Self> {
        Self::from_weights(
            (1..=max_n)
                .map(|n| (n, q * (1.0 - q).powi((n - 1) as i32)))
                .collect(),
        )
    }

    pub fn support(&self) -> &[(u64, f64)] {
        &self.support
    }
}

/// Moments of an interarrival law, with `tau` computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterarrivalStats {
    pub mu: f64,
    pub sigma2: f64,
    /// `sum ((n-1)/2) n p(n) / sum n p(n)`: the size-biased mean residual wait.
    pub tau: f64,
    /// `tau` from [`bus_tau`].
    pub tau_bus: f64,
}

/// Computes `mu`, `sigma2` and `tau`; fails if the direct size-biased sum
/// and the bus equality disagree beyond `1e-12` relative.
pub fn interarrival_stats(dist: &InterarrivalDistribution) -> Result<InterarrivalStats> {
    let (mut m1, mut m2, mut residual) = (0.0, 0.0, 0.0);
    for &(n, p) in dist.support() {
        let n = n as f64;
        m1 += n * p;
        m2 += n * n * p;
        residual += (n - 1.0) / 2.0 * n * p;
    }
    let mu = m1;
    let sigma2 = (m2 - mu * mu).max(0.0);
    let tau = residual / m1;
    let tau_bus = bus_tau(mu, sigma2)?;
    let scale = tau.abs().max(tau_bus.abs());
    if (tau - tau_bus).abs() > BUS_IDENTITY_TOL * scale {
        return Err(Error::Consistency(format!(
            "bus equality fails: direct {tau} vs (mu^2 + sigma2)/(2 mu) - 1/2 = {tau_bus}"
        )));
    }
    Ok(InterarrivalStats {
        mu,
        sigma2,
        tau,
        tau_bus,
    })
}

/// First-order approximations to the moments of the renewal count `N` over
/// `T` steps, starting from a renewal. The error terms are `o(1)` for the
/// mean and `o(T)` for the variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenewalCountApprox {
    pub mean: f64,
    pub variance: f64,
    /// Always true; these values are not exact at finite `T`.
    pub asymptotic: bool,
}

/// `E N ~ (T+1)/mu + (sigma2 - mu - mu^2) / (2 mu^2)`,
/// `Var N ~ sigma2 T / mu^3`.
pub fn expected_renewal_count(mu: f64, sigma2: f64, horizon: u64) -> Result<RenewalCountApprox> {
    check_moments(mu, sigma2)?;
    check_horizon(horizon)?;
    let t = horizon as f64;
    Ok(RenewalCountApprox {
        mean: (t + 1.0) / mu + (sigma2 - mu - mu * mu) / (2.0 * mu * mu),
        variance: sigma2 / (mu * mu * mu) * t,
        asymptotic: true,
    })
}

/// Parameters of the Gaussian limit of the renewal count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianParams {
    pub mean: f64,
    pub variance: f64,
}

/// Mean `T / mu`, variance `T sigma2 / mu^3`.
pub fn clt_gaussian_params(mu: f64, sigma2: f64, horizon: u64) -> Result<GaussianParams> {
    check_moments(mu, sigma2)?;
    check_horizon(horizon)?;
    let t = horizon as f64;
    Ok(GaussianParams {
        mean: t / mu,
        variance: t * sigma2 / (mu * mu * mu),
    })
}

fn check_horizon(horizon: u64) -> Result<()> {
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least one step".into()));
    }
    Ok(())
}
