//! Seeded Monte Carlo simulation of a chain, used as an empirical oracle
//! for the analytic quantities.
//!
//! Replica `r` draws from ChaCha8 seeded with `seed` on stream `r`, so
//! replicas are independent of each other and of scheduling. Replicas run
//! on the rayon pool and are reduced in index order, which makes every
//! estimate a deterministic function of its inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::StochasticMatrix;
use crate::equilibrium::EquilibriumDistribution;
use crate::error::{Error, Result};

/// Per-replica step limit for first-passage walks.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimulationConfig {
    pub seed: u64,
    /// Horizon `T`.
    pub steps: u64,
    pub replicas: u64,
    pub burn_in: u64,
}

impl SimulationConfig {
    pub fn new(seed: u64, steps: u64, replicas: u64) -> Result<Self> {
        let cfg = Self {
            seed,
            steps,
            replicas,
            burn_in: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Domain(
                "simulation horizon must be at least 1 step".into(),
            ));
        }
        if self.replicas == 0 {
            return Err(Error::Domain("at least one replica is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalEstimate {
    pub value: f64,
    /// Infinite when it cannot be estimated (a single replica).
    pub std_error: f64,
    pub replicas_used: u64,
}

/// Sample mean and sample variance of one measured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimates {
    pub mean: EmpiricalEstimate,
    pub variance: EmpiricalEstimate,
}

impl MomentEstimates {
    /// Mean with its standard error, unbiased variance with the standard
    /// error from the fourth central moment.
    pub fn from_samples(samples: &[f64]) -> Self {
        let r = samples.len();
        let rf = r as f64;
        let mean = samples.iter().sum::<f64>() / rf;
        let (mut m2, mut m4) = (0.0, 0.0);
        for &x in samples {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m4 += d2 * d2;
        }
        let (variance, mean_se, var_se) = if r > 1 {
            let s2 = m2 / (rf - 1.0);
            let m4 = m4 / rf;
            let var_of_s2 = (m4 - s2 * s2 * (rf - 3.0) / (rf - 1.0)) / rf;
            (s2, (s2 / rf).sqrt(), var_of_s2.max(0.0).sqrt())
        } else {
            (0.0, f64::INFINITY, f64::INFINITY)
        };
        let used = r as u64;
        Self {
            mean: EmpiricalEstimate {
                value: mean,
                std_error: mean_se,
                replicas_used: used,
            },
            variance: EmpiricalEstimate {
                value: variance,
                std_error: var_se,
                replicas_used: used,
            },
        }
    }
}

/// Inverse-CDF sampler over the rows of a transition matrix.
#[derive(Debug, Clone)]
pub struct Simulator {
    n: usize,
    cumulative: Vec<f64>,
    step_cap: u64,
}

fn cumulative_row(probs: impl Iterator<Item = f64>, out: &mut Vec<f64>) {
    let start = out.len();
    let mut acc = 0.0;
    let mut last_positive = None;
    for (k, p) in probs.enumerate() {
        acc += p;
        out.push(acc);
        if p > 0.0 {
            last_positive = Some(k);
        }
    }
    // Pin the top of the CDF at 1 from the last reachable state onward, so
    // rounding never sends a draw to a trailing zero-probability state.
    if let Some(k) = last_positive {
        out[start + k..].iter_mut().for_each(|c| *c = 1.0);
    }
}

fn sample_index(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u)
}

impl Simulator {
    pub fn new(p: &StochasticMatrix) -> Self {
        let n = p.n();
        let mut cumulative = Vec::with_capacity(n * n);
        for i in 0..n {
            cumulative_row((0..n).map(|j| p.get(i, j)), &mut cumulative);
        }
        Self {
            n,
            cumulative,
            step_cap: DEFAULT_STEP_CAP,
        }
    }

    pub fn with_step_cap(mut self, cap: u64) -> Self {
        self.step_cap = cap;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn step<R: Rng>(&self, state: usize, rng: &mut R) -> usize {
        let row = &self.cumulative[state * self.n..(state + 1) * self.n];
        sample_index(row, rng.random::<f64>())
    }

    fn check_state(&self, j: usize) -> Result<()> {
        if j >= self.n {
            return Err(Error::Domain(format!(
                "state {j} out of range for n = {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Steps from `start` until `target` is first hit (0 if equal).
    fn first_passage<R: Rng>(
        &self,
        start: usize,
        target: usize,
        rng: &mut R,
        replica: u64,
    ) -> Result<u64> {
        let mut state = start;
        let mut t = 0u64;
        while state != target {
            if t >= self.step_cap {
                return Err(Error::Timeout {
                    replica,
                    cap: self.step_cap,
                });
            }
            state = self.step(state, rng);
            t += 1;
        }
        Ok(t)
    }

    /// Steps from `j` until the walk is back at `j` (at least 1).
    fn return_time<R: Rng>(&self, j: usize, rng: &mut R, replica: u64) -> Result<u64> {
        let first = self.step(j, rng);
        Ok(1 + self.first_passage(first, j, rng, replica)?)
    }

    /// Number of visits to `j` among `X_0..X_{T-1}` (after burn-in), with
    /// `X_0` drawn from `w`.
    pub fn simulate_visits(
        &self,
        w: &EquilibriumDistribution,
        j: usize,
        cfg: &SimulationConfig,
    ) -> Result<MomentEstimates> {
        cfg.validate()?;
        self.check_state(j)?;
        let mut w_cdf = Vec::with_capacity(self.n);
        cumulative_row(w.as_slice().iter().copied(), &mut w_cdf);
        let counts = run_replicas(cfg.seed, cfg.replicas, |rng, _| {
            let mut state = sample_index(&w_cdf, rng.random::<f64>());
            for _ in 0..cfg.burn_in {
                state = self.step(state, rng);
            }
            let mut visits = 0u64;
            for _ in 0..cfg.steps {
                visits += (state == j) as u64;
                state = self.step(state, rng);
            }
            Ok(visits as f64)
        })?;
        Ok(MomentEstimates::from_samples(&counts))
    }

    /// Renewal counts: start at `j` and count returns to `j` at times
    /// `1..=T`. `burn_in` is ignored.
    pub fn simulate_renewal_counts(
        &self,
        j: usize,
        cfg: &SimulationConfig,
    ) -> Result<MomentEstimates> {
        cfg.validate()?;
        self.check_state(j)?;
        let counts = run_replicas(cfg.seed, cfg.replicas, |rng, _| {
            let mut state = j;
            let mut visits = 0u64;
            for _ in 0..cfg.steps {
                state = self.step(state, rng);
                visits += (state == j) as u64;
            }
            Ok(visits as f64)
        })?;
        Ok(MomentEstimates::from_samples(&counts))
    }

    pub fn estimate_hitting_time(
        &self,
        i: usize,
        j: usize,
        replicas: u64,
        seed: u64,
    ) -> Result<EmpiricalEstimate> {
        self.check_state(i)?;
        self.check_state(j)?;
        check_replicas(replicas)?;
        if i == j {
            return Ok(EmpiricalEstimate {
                value: 0.0,
                std_error: 0.0,
                replicas_used: replicas,
            });
        }
        let times = run_replicas(seed, replicas, |rng, r| {
            self.first_passage(i, j, rng, r).map(|t| t as f64)
        })?;
        Ok(MomentEstimates::from_samples(&times).mean)
    }

    /// Replica `r` starts at state `r mod n`, draws a target from `w`, and
    /// records the first-passage time.
    pub fn estimate_kemeny(
        &self,
        w: &EquilibriumDistribution,
        replicas: u64,
        seed: u64,
    ) -> Result<EmpiricalEstimate> {
        check_replicas(replicas)?;
        let mut w_cdf = Vec::with_capacity(self.n);
        cumulative_row(w.as_slice().iter().copied(), &mut w_cdf);
        let n = self.n as u64;
        let times = run_replicas(seed, replicas, |rng, r| {
            let start = (r % n) as usize;
            let target = sample_index(&w_cdf, rng.random::<f64>());
            self.first_passage(start, target, rng, r).map(|t| t as f64)
        })?;
        Ok(MomentEstimates::from_samples(&times).mean)
    }

    /// Sample mean and variance of the return time to `j`, one return per
    /// replica.
    pub fn estimate_return_moments(
        &self,
        j: usize,
        replicas: u64,
        seed: u64,
    ) -> Result<MomentEstimates> {
        self.check_state(j)?;
        check_replicas(replicas)?;
        let times = run_replicas(seed, replicas, |rng, r| {
            self.return_time(j, rng, r).map(|t| t as f64)
        })?;
        Ok(MomentEstimates::from_samples(&times))
    }

    /// Fraction of time spent in each state over one run of `steps` steps
    /// started from state 0.
    pub fn occupancy(&self, steps: u64, seed: u64) -> Vec<f64> {
        let mut rng = replica_rng(seed, 0);
        let mut counts = vec![0u64; self.n];
        let mut state = 0;
        for _ in 0..steps {
            counts[state] += 1;
            state = self.step(state, &mut rng);
        }
        counts
            .into_iter()
            .map(|c| c as f64 / steps as f64)
            .collect()
    }
}

/// Pearson chi-square statistic of observed occupancy fractions over
/// `steps` against `w`.
pub fn occupancy_chi_square(observed: &[f64], w: &EquilibriumDistribution, steps: u64) -> f64 {
    let t = steps as f64;
    observed
        .iter()
        .zip(w.as_slice())
        .map(|(&o, &e)| {
            let d = (o - e) * t;
            d * d / (e * t)
        })
        .sum()
}

fn check_replicas(replicas: u64) -> Result<()> {
    if replicas == 0 {
        return Err(Error::Domain("at least one replica is required".into()));
    }
    Ok(())
}

/// ChaCha8 seeded from `seed`, on stream `replica`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

fn run_replicas<F>(seed: u64, replicas: u64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng, u64) -> Result<f64> + Sync,
{
    let results: Vec<Result<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| f(&mut replica_rng(seed, r), r))
        .collect();
    // Ordered reduction: the first failing replica by index is reported.
    results.into_iter().collect()
}

pub fn simulate_visits(
    p: &StochasticMatrix,
    w: &EquilibriumDistribution,
    j: usize,
    cfg: &SimulationConfig,
) -> Result<MomentEstimates> {
    Simulator::new(p).simulate_visits(w, j, cfg)
}

pub fn estimate_hitting_time(
    p: &StochasticMatrix,
    i: usize,
    j: usize,
    replicas: u64,
    seed: u64,
) -> Result<EmpiricalEstimate> {
    Simulator::new(p).estimate_hitting_time(i, j, replicas, seed)
}

pub fn estimate_kemeny(
    p: &StochasticMatrix,
    w: &EquilibriumDistribution,
    replicas: u64,
    seed: u64,
) -> Result<EmpiricalEstimate> {
    Simulator::new(p).estimate_kemeny(w, replicas, seed)
}

pub fn estimate_return_moments(
    p: &StochasticMatrix,
    j: usize,
    replicas: u64,
    seed: u64,
) -> Result<MomentEstimates> {
    Simulator::new(p).estimate_return_moments(j, replicas, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::stationary_distribution;
    use crate::generate::{cycle, two_state};

    #[test]
    fn cdf_never_selects_zero_probability_states() {
        let mut cdf = Vec::new();
        cumulative_row([0.0, 0.3, 0.0, 0.7, 0.0].into_iter(), &mut cdf);
        assert_eq!(sample_index(&cdf, 0.0), 1);
        assert_eq!(sample_index(&cdf, 0.2999), 1);
        assert_eq!(sample_index(&cdf, 0.3), 3);
        assert_eq!(sample_index(&cdf, 1.0 - f64::EPSILON), 3);
    }

    #[test]
    fn moments_of_constant_samples() {
        let m = MomentEstimates::from_samples(&[3.0; 10]);
        assert_eq!(m.mean.value, 3.0);
        assert_eq!(m.mean.std_error, 0.0);
        assert_eq!(m.variance.value, 0.0);
        assert_eq!(m.variance.std_error, 0.0);
    }

    #[test]
    fn single_replica_has_unknown_error() {
        let m = MomentEstimates::from_samples(&[3.0]);
        assert!(m.mean.std_error.is_infinite());
    }

    #[test]
    fn cycle_visits_are_deterministic() {
        let p = cycle(3);
        let w = stationary_distribution(&p).unwrap();
        let cfg = SimulationConfig::new(11, 300, 10).unwrap();
        let v = simulate_visits(&p, &w, 0, &cfg).unwrap();
        assert_eq!(v.mean.value, 100.0);
        assert_eq!(v.variance.value, 0.0);
    }

    #[test]
    fn cycle_hitting_time_is_exact() {
        let e = estimate_hitting_time(&cycle(3), 0, 2, 50, 1).unwrap();
        assert_eq!((e.value, e.std_error), (2.0, 0.0));
    }

    #[test]
    fn hitting_time_to_self_is_zero() {
        let e = estimate_hitting_time(&two_state(0.2, 0.4), 1, 1, 10, 1).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn cycle_return_moments() {
        let m = estimate_return_moments(&cycle(3), 0, 100, 5).unwrap();
        assert_eq!((m.mean.value, m.variance.value), (3.0, 0.0));
    }

    #[test]
    fn single_state_kemeny_is_zero() {
        let p = StochasticMatrix::from_rows(vec![vec![1.0]]).unwrap();
        let w = stationary_distribution(&p).unwrap();
        let e = estimate_kemeny(&p, &w, 100, 3).unwrap();
        assert_eq!((e.value, e.std_error), (0.0, 0.0));
    }

    #[test]
    fn reproducible_across_calls() {
        let p = two_state(0.2, 0.4);
        let w = stationary_distribution(&p).unwrap();
        let a = estimate_kemeny(&p, &w, 2000, 99).unwrap();
        let b = estimate_kemeny(&p, &w, 2000, 99).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        let c = estimate_kemeny(&p, &w, 2000, 100).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn independent_of_thread_count() {
        let p = two_state(0.2, 0.4);
        let w = stationary_distribution(&p).unwrap();
        let cfg = SimulationConfig::new(5, 500, 64).unwrap();
        let sim = Simulator::new(&p);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| sim.simulate_visits(&w, 1, &cfg).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| sim.simulate_visits(&w, 1, &cfg).unwrap());
        assert_eq!(one, four);
    }

    #[test]
    fn step_cap_reports_first_failing_replica() {
        let p = two_state(0.001, 0.5);
        let sim = Simulator::new(&p).with_step_cap(1);
        let err = sim.estimate_hitting_time(0, 1, 10, 0).unwrap_err();
        assert!(matches!(err, Error::Timeout { cap: 1, .. }));
    }

    #[test]
    fn occupancy_matches_equilibrium() {
        let p = two_state(0.2, 0.4);
        let w = stationary_distribution(&p).unwrap();
        let steps = 200_000;
        let occ = Simulator::new(&p).occupancy(steps, 8);
        // One degree of freedom; correlation inflates the statistic, so only
        // a loose sanity bound.
        assert!(occupancy_chi_square(&occ, &w, steps) < 50.0);
    }

    #[test]
    fn invalid_config() {
        assert!(SimulationConfig::new(0, 0, 1).is_err());
        assert!(SimulationConfig::new(0, 1, 0).is_err());
    }
}
