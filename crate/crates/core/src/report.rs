//! End-to-end pipeline: everything computable from one chain, collected
//! into serializable reports, plus the invariant suite behind `verify`.

use serde::Serialize;

use crate::chain::{classify_structure, ChainStructure, StochasticMatrix};
use crate::equilibrium::{
    cesaro_limit, cesaro_residuals, stationary_distribution, stationary_distribution_lu,
    EquilibriumDistribution,
};
use crate::error::{Error, Result};
use crate::mc::{EmpiricalEstimate, MomentEstimates, SimulationConfig, Simulator};
use crate::renewal::{
    all_renewal_stats, bus_floor, bus_tau, clt_gaussian_params, expected_renewal_count,
    z_diag_from_moments, GaussianParams, RenewalCountApprox, RenewalStats,
};
use crate::resolvent::{
    fundamental_matrix, harmonic_residual, kemeny_trace, mean_hitting_times,
    pinned_harmonic_solution, seek_time_report, weighted_time_from_equilibrium, FundamentalMatrix,
    HittingTimeMatrix, SeekTimeReport,
};
use crate::spectral::{
    check_lower_bound, eigenvalues, kemeny_spectral, ComplexValue, LowerBoundReport,
    SpectralKemeny, SpectralSummary,
};

/// Default relative tolerance for agreement of the three Kemeny routes.
pub const DEFAULT_KEMENY_TOL: f64 = 1e-8;
/// Matrices `Z` and `M` are emitted only up to this many states by default.
pub const DEFAULT_MATRIX_EMIT_THRESHOLD: usize = 100;
/// The Cesaro convergence diagnostic is skipped above this many states.
pub const CESARO_DIAGNOSTIC_MAX_N: usize = 200;
/// Standard errors allowed between a Monte Carlo estimate and its target.
pub const MC_Z_LIMIT: f64 = 3.0;
/// Relative allowance for visit-count variances, which carry an O(1)
/// finite-horizon term on top of `T * clt_rate`.
pub const MC_VARIANCE_REL_TOL: f64 = 0.1;
/// Absolute allowance for that O(1) term.
pub const MC_VARIANCE_EDGE_ALLOWANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McOptions {
    pub seed: u64,
    pub steps: u64,
    pub replicas: u64,
    pub target: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub kemeny_tol: f64,
    pub matrix_emit_threshold: usize,
    pub full: bool,
    pub monte_carlo: Option<McOptions>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            kemeny_tol: DEFAULT_KEMENY_TOL,
            matrix_emit_threshold: DEFAULT_MATRIX_EMIT_THRESHOLD,
            full: false,
            monte_carlo: None,
        }
    }
}

/// All analytic quantities for one irreducible chain.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub chain: StochasticMatrix,
    pub structure: ChainStructure,
    pub equilibrium: EquilibriumDistribution,
    pub fundamental: FundamentalMatrix,
    pub hitting: HittingTimeMatrix,
    pub seek: SeekTimeReport,
    pub spectrum: SpectralSummary,
    pub spectral_kemeny: SpectralKemeny,
    pub kemeny_trace: f64,
    pub renewal: Vec<RenewalStats>,
    pub lower_bound: LowerBoundReport,
}

impl Analysis {
    /// validate -> classify -> w -> Z -> M -> K (trace, direct) -> spectral K
    /// -> renewal statistics -> lower bound.
    pub fn run(chain: &StochasticMatrix) -> Result<Self> {
        let structure = classify_structure(chain);
        if !structure.irreducible {
            return Err(Error::Reducible {
                classes: structure.communicating_classes.len(),
                detail: format!("{:?}", structure.communicating_classes),
            });
        }
        let equilibrium = stationary_distribution(chain)?;
        let fundamental = fundamental_matrix(chain, &equilibrium)?;
        let hitting = mean_hitting_times(&fundamental, &equilibrium);
        let kemeny_trace = kemeny_trace(&fundamental);
        let seek = seek_time_report(&fundamental, &hitting, &equilibrium)?;
        let spectrum = eigenvalues(chain)?;
        let spectral_kemeny = kemeny_spectral(&spectrum)?;
        let renewal = all_renewal_stats(&fundamental, &equilibrium)?;
        let lower_bound = check_lower_bound(kemeny_trace, chain.n())?;
        Ok(Self {
            chain: chain.clone(),
            structure,
            equilibrium,
            fundamental,
            hitting,
            seek,
            spectrum,
            spectral_kemeny,
            kemeny_trace,
            renewal,
            lower_bound,
        })
    }

    pub fn n(&self) -> usize {
        self.chain.n()
    }

    pub fn kemeny(&self, tol: f64) -> KemenyComparison {
        KemenyComparison::new(
            self.kemeny_trace,
            self.spectral_kemeny.kemeny,
            self.seek.kemeny,
            tol,
        )
    }

    pub fn report(&self, opts: &AnalysisOptions) -> Result<AnalysisReport> {
        let emit = opts.full || self.n() <= opts.matrix_emit_threshold;
        let kemeny = self.kemeny(opts.kemeny_tol);
        let failure = (!kemeny.agree).then(|| {
            format!(
                "Kemeny constant routes disagree: relative discrepancy {:e} > {:e}",
                kemeny.max_relative_discrepancy, kemeny.tolerance
            )
        });
        let monte_carlo = opts
            .monte_carlo
            .as_ref()
            .map(|mc| self.monte_carlo(mc))
            .transpose()?;
        Ok(AnalysisReport {
            chain: ChainInfo::new(&self.chain, &self.structure),
            equilibrium: self.equilibrium.as_slice().to_vec(),
            kemeny,
            time_to_equilibrium: TimeToEquilibrium {
                values: self.seek.to_equilibrium.clone(),
                spread: self.seek.constancy_spread,
            },
            time_from_equilibrium: self.seek.from_equilibrium.clone(),
            lower_bound: self.lower_bound,
            renewal: self.renewal.clone(),
            fundamental_matrix: emit.then(|| self.fundamental.to_rows()),
            hitting_times: emit.then(|| self.hitting.to_rows()),
            monte_carlo,
            failure,
        })
    }

    pub fn spectrum_report(&self) -> SpectrumReport {
        SpectrumReport::new(&self.chain, &self.spectrum, self.spectral_kemeny)
    }

    /// Monte Carlo estimates of `K`, one hitting time, and the return-time
    /// and visit-count moments of `opts.target`, each compared with its
    /// analytic value.
    pub fn monte_carlo(&self, opts: &McOptions) -> Result<McSection> {
        let n = self.n();
        let j = opts.target;
        if j >= n {
            return Err(Error::Domain(format!(
                "target state {j} out of range for n = {n}"
            )));
        }
        let sim = Simulator::new(&self.chain);
        let cfg = SimulationConfig::new(opts.seed, opts.steps, opts.replicas)?;
        let w = &self.equilibrium;
        let stats = &self.renewal[j];

        let k_hat = sim.estimate_kemeny(w, opts.replicas, opts.seed)?;
        let source = (j + 1) % n;
        let m_hat = sim.estimate_hitting_time(source, j, opts.replicas, opts.seed)?;
        let ret = sim.estimate_return_moments(j, opts.replicas, opts.seed)?;
        let visits = sim.simulate_visits(w, j, &cfg)?;
        let t = opts.steps as f64;

        let rule = AgreementRule::StdErrors(MC_Z_LIMIT);
        let variance_rule = AgreementRule::RelativeOrStdErrors {
            rel: MC_VARIANCE_REL_TOL,
            z: MC_Z_LIMIT,
            abs: MC_VARIANCE_EDGE_ALLOWANCE,
        };
        Ok(McSection {
            config: *opts,
            kemeny: Comparison::new(self.kemeny_trace, k_hat, rule),
            hitting_time: HittingComparison {
                from: source,
                to: j,
                comparison: Comparison::new(self.hitting.get(source, j), m_hat, rule),
            },
            return_time_mean: Comparison::new(stats.mu, ret.mean, rule),
            return_time_variance: Comparison::new(stats.sigma2, ret.variance, rule),
            visit_count_mean: Comparison::new(t * w.get(j), visits.mean, rule),
            visit_count_variance: Comparison::new(
                t * stats.clt_rate,
                visits.variance,
                variance_rule,
            ),
        })
    }

    /// Runs every analytic invariant and reports measured residuals.
    pub fn verify(&self, opts: &AnalysisOptions) -> Result<VerificationReport> {
        let n = self.n();
        let p = &self.chain;
        let w = &self.equilibrium;
        let z = &self.fundamental;
        let m = &self.hitting;
        let k = self.kemeny_trace;
        let k_scale = k.abs().max(1.0);
        let mut checks = Vec::new();

        // equilibrium
        checks.push(Check::at_most(
            "equilibrium_fixed_point",
            w.residual(p),
            1e-12 * n as f64,
        ));
        let mass: f64 = w.as_slice().iter().sum();
        checks.push(Check::at_most(
            "equilibrium_normalized",
            (mass - 1.0).abs(),
            1e-12,
        ));
        let min_w = w.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least(
            "equilibrium_positive",
            min_w,
            f64::MIN_POSITIVE,
        ));
        let lu = stationary_distribution_lu(p)?;
        let gth_vs_lu = (0..n)
            .map(|j| (w.get(j) - lu.get(j)).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most("equilibrium_gth_vs_lu", gth_vs_lu, 1e-10));
        let limit = cesaro_limit(p, w);
        checks.push(Check::at_most(
            "cesaro_absorption",
            limit.absorption_residual(p),
            1e-10,
        ));
        if n <= CESARO_DIAGNOSTIC_MAX_N {
            let seq = cesaro_residuals(p, w, 10);
            let worst_increase = seq
                .windows(2)
                .map(|pair| pair[1].1 - pair[0].1)
                .fold(0.0, f64::max);
            checks.push(Check::at_most(
                "cesaro_nonincreasing",
                worst_increase,
                1e-12,
            ));
        }

        // resolvent
        checks.push(Check::at_most("z_row_sums", z.row_sum_residual(), 1e-9));
        checks.push(Check::at_most(
            "z_weighted_column_sums",
            z.weighted_column_residual(w),
            1e-9,
        ));
        checks.push(Check::at_least(
            "z_excess_visit_dominance",
            z.min_dominance_gap(),
            -1e-12,
        ));
        checks.push(Check::at_least(
            "z_diagonal_bound",
            z.min_diagonal_slack(w),
            -1e-9,
        ));
        checks.push(Check::at_most(
            "hitting_time_recurrence",
            m.recurrence_residual(p),
            1e-8 * k_scale,
        ));
        if let Some(min_m) = m.min_off_diagonal() {
            checks.push(Check::at_least(
                "hitting_time_at_least_one",
                min_m,
                1.0 - 1e-9,
            ));
        }
        checks.push(Check::at_most(
            "constancy_spread",
            self.seek.constancy_spread,
            1e-8 * k_scale,
        ));
        checks.push(Check::at_most(
            "harmonic_property",
            harmonic_residual(p, &self.seek.to_equilibrium),
            1e-8 * k_scale,
        ));
        let f = pinned_harmonic_solution(p)?;
        let deviation = f.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most("maximum_principle", deviation, 1e-8));
        let weighted = weighted_time_from_equilibrium(&self.seek.from_equilibrium, w);
        checks.push(Check::at_most(
            "time_from_equilibrium_weighted_sum",
            (weighted - k).abs(),
            1e-8 * k_scale,
        ));

        // Kemeny agreement and bound
        let kc = self.kemeny(opts.kemeny_tol);
        checks.push(Check::at_most(
            "kemeny_three_routes",
            kc.max_relative_discrepancy,
            kc.tolerance,
        ));
        checks.push(Check::at_least(
            "kemeny_lower_bound",
            self.lower_bound.slack,
            -1e-9,
        ));
        let diag_floor_sum: f64 = (0..n).map(|j| (1.0 - w.get(j)) / 2.0).sum();
        checks.push(Check::at_least(
            "kemeny_lower_bound_from_diagonal",
            k - diag_floor_sum,
            -1e-9,
        ));

        // spectrum
        let s = &self.spectrum;
        let unit = s.alphas()[0];
        checks.push(Check::at_most(
            "spectral_unit_eigenvalue",
            (unit - num_complex::Complex64::new(1.0, 0.0)).norm(),
            crate::spectral::UNIT_EIGENVALUE_TOL,
        ));
        checks.push(Check::at_most(
            "spectral_unit_disk",
            s.spectral_radius(),
            1.0 + 1e-9,
        ));
        if let Some(min_re) = s.min_resolvent_real_part() {
            checks.push(Check::at_least("spectral_half_plane", min_re, 0.5 - 1e-9));
        }
        checks.push(Check::at_most(
            "spectral_conjugate_closure",
            s.conjugate_closure_residual(),
            1e-9,
        ));
        checks.push(Check::at_most(
            "spectral_imaginary_residual",
            self.spectral_kemeny.residual_imag,
            crate::spectral::IMAG_RESIDUAL_TOL * n as f64,
        ));

        // renewal
        let mut z_roundtrip: f64 = 0.0;
        let mut tau_roundtrip: f64 = 0.0;
        let mut rate_identity: f64 = 0.0;
        let mut min_nonneg = f64::INFINITY;
        let mut min_bus_slack = f64::INFINITY;
        let mut equality_states = Vec::new();
        for st in &self.renewal {
            let wj = w.get(st.state);
            let z_back = z_diag_from_moments(st.mu, st.sigma2.max(0.0))?;
            z_roundtrip = z_roundtrip.max(relative_gap(z_back, st.z_diag, 0.0));
            let tau_back = bus_tau(st.mu, st.sigma2.max(0.0))?;
            tau_roundtrip = tau_roundtrip.max(relative_gap(tau_back, st.tau, 0.0));
            let rate = st.sigma2 / (st.mu * st.mu * st.mu);
            rate_identity = rate_identity.max(relative_gap(rate, st.clt_rate, wj));
            min_nonneg = min_nonneg.min(st.sigma2).min(st.clt_rate);
            let bus_slack = (st.tau - bus_floor(st.mu)) / st.mu.max(1.0);
            min_bus_slack = min_bus_slack.min(bus_slack);
            if bus_slack.abs() <= 1e-9 {
                equality_states.push(st.state);
            }
        }
        checks.push(Check::at_most(
            "renewal_z_diag_roundtrip",
            z_roundtrip,
            1e-12,
        ));
        checks.push(Check::at_most(
            "renewal_bus_equality_roundtrip",
            tau_roundtrip,
            1e-12,
        ));
        checks.push(Check::at_most(
            "renewal_clt_rate_identity",
            rate_identity,
            1e-10,
        ));
        checks.push(Check::at_least(
            "renewal_nonnegative_variances",
            min_nonneg,
            -1e-9,
        ));
        checks.push(Check::at_least("bus_inequality", min_bus_slack, -1e-9));

        let monte_carlo = opts
            .monte_carlo
            .as_ref()
            .map(|mc| self.monte_carlo(mc))
            .transpose()?;
        if let Some(mc) = &monte_carlo {
            for (name, c) in mc.comparisons() {
                checks.push(Check {
                    name: format!("monte_carlo_{name}"),
                    residual: (c.estimate.value - c.analytic).abs(),
                    tolerance: c.allowed,
                    passed: c.agrees,
                });
            }
        }

        let passed = checks.iter().all(|c| c.passed);
        Ok(VerificationReport {
            chain: ChainInfo::new(p, &self.structure),
            kemeny: kc,
            lower_bound_equality: self.lower_bound.equality,
            bus_equality_states: equality_states,
            checks,
            monte_carlo,
            passed,
        })
    }
}

/// `|a - b| / max(|a|, |b|, floor)`, zero when both are zero.
pub fn relative_gap(a: f64, b: f64, floor: f64) -> f64 {
    let diff = (a - b).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / a.abs().max(b.abs()).max(floor)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainInfo {
    pub n: usize,
    pub labels: Vec<String>,
    pub irreducible: bool,
    pub period: Option<usize>,
    pub communicating_classes: usize,
}

impl ChainInfo {
    pub fn new(p: &StochasticMatrix, s: &ChainStructure) -> Self {
        Self {
            n: p.n(),
            labels: p.labels().to_vec(),
            irreducible: s.irreducible,
            period: s.period,
            communicating_classes: s.communicating_classes.len(),
        }
    }
}

/// The three routes to `K`: trace of `Z`, spectral sum, and mean of the
/// mean times to equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KemenyComparison {
    pub trace: f64,
    pub spectral: f64,
    pub direct: f64,
    /// Largest pairwise `|difference| / max(1, |K_trace|)`.
    pub max_relative_discrepancy: f64,
    pub tolerance: f64,
    pub agree: bool,
}

impl KemenyComparison {
    pub fn new(trace: f64, spectral: f64, direct: f64, tolerance: f64) -> Self {
        let scale = trace.abs().max(1.0);
        let d = [
            (trace - spectral).abs(),
            (trace - direct).abs(),
            (spectral - direct).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
            / scale;
        Self {
            trace,
            spectral,
            direct,
            max_relative_discrepancy: d,
            tolerance,
            agree: d <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeToEquilibrium {
    pub values: Vec<f64>,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub chain: ChainInfo,
    pub equilibrium: Vec<f64>,
    pub kemeny: KemenyComparison,
    pub time_to_equilibrium: TimeToEquilibrium,
    pub time_from_equilibrium: Vec<f64>,
    pub lower_bound: LowerBoundReport,
    pub renewal: Vec<RenewalStats>,
    pub fundamental_matrix: Option<Vec<Vec<f64>>>,
    pub hitting_times: Option<Vec<Vec<f64>>>,
    pub monte_carlo: Option<McSection>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }

    /// `value >= floor`; the floor is reported as the tolerance.
    fn at_least(name: &str, value: f64, floor: f64) -> Self {
        Self {
            name: name.into(),
            residual: value,
            tolerance: floor,
            passed: value >= floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub chain: ChainInfo,
    pub kemeny: KemenyComparison,
    pub lower_bound_equality: bool,
    /// States whose return time is deterministic (bus inequality is tight).
    pub bus_equality_states: Vec<usize>,
    pub checks: Vec<Check>,
    pub monte_carlo: Option<McSection>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AgreementRule {
    StdErrors(f64),
    RelativeOrStdErrors { rel: f64, z: f64, abs: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub analytic: f64,
    pub estimate: EmpiricalEstimate,
    /// `|estimate - analytic| / std_error`; zero when both differences and
    /// errors vanish.
    pub z_score: f64,
    pub allowed: f64,
    pub agrees: bool,
}

impl Comparison {
    pub fn new(analytic: f64, estimate: EmpiricalEstimate, rule: AgreementRule) -> Self {
        let diff = (estimate.value - analytic).abs();
        let se = estimate.std_error;
        let z_score = if diff == 0.0 { 0.0 } else { diff / se };
        // Exact estimates (zero standard error) must match to rounding.
        let exact = 1e-9 * analytic.abs().max(1.0);
        let allowed = match rule {
            AgreementRule::StdErrors(z) => (z * se).max(exact),
            AgreementRule::RelativeOrStdErrors { rel, z, abs } => {
                (rel * analytic.abs()).max(z * se) + abs
            }
        };
        Self {
            analytic,
            estimate,
            z_score,
            allowed,
            agrees: diff <= allowed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingComparison {
    pub from: usize,
    pub to: usize,
    #[serde(flatten)]
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSection {
    pub config: McOptions,
    pub kemeny: Comparison,
    pub hitting_time: HittingComparison,
    pub return_time_mean: Comparison,
    pub return_time_variance: Comparison,
    pub visit_count_mean: Comparison,
    pub visit_count_variance: Comparison,
}

impl McSection {
    pub fn comparisons(&self) -> [(&'static str, &Comparison); 6] {
        [
            ("kemeny", &self.kemeny),
            ("hitting_time", &self.hitting_time.comparison),
            ("return_time_mean", &self.return_time_mean),
            ("return_time_variance", &self.return_time_variance),
            ("visit_count_mean", &self.visit_count_mean),
            ("visit_count_variance", &self.visit_count_variance),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub n: usize,
    /// Eigenvalues of `P`, the unit eigenvalue first.
    pub eigenvalues: Vec<ComplexValue>,
    /// Eigenvalues of `I - P`.
    pub laplacian_eigenvalues: Vec<ComplexValue>,
    pub kemeny_spectral: f64,
    pub residual_imag: f64,
    pub spectral_radius: f64,
    pub min_resolvent_real_part: Option<f64>,
}

impl SpectrumReport {
    pub fn new(p: &StochasticMatrix, s: &SpectralSummary, k: SpectralKemeny) -> Self {
        Self {
            n: p.n(),
            eigenvalues: s.alphas().iter().map(|&a| a.into()).collect(),
            laplacian_eigenvalues: s.lambdas().into_iter().map(Into::into).collect(),
            kemeny_spectral: k.kemeny,
            residual_imag: k.residual_imag,
            spectral_radius: s.spectral_radius(),
            min_resolvent_real_part: s.min_resolvent_real_part(),
        }
    }
}

/// Spectrum-only pipeline; needs no irreducibility check beyond the
/// eigenvalue tests themselves.
pub fn spectrum_report(p: &StochasticMatrix) -> Result<SpectrumReport> {
    let s = eigenvalues(p)?;
    let k = kemeny_spectral(&s)?;
    Ok(SpectrumReport::new(p, &s, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulateRequest {
    pub target: Option<usize>,
    pub kemeny: bool,
    pub config: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetSimulation {
    pub state: usize,
    pub label: String,
    /// Visit counts over `T` steps from an equilibrium start.
    pub visits: MomentEstimates,
    pub clt: GaussianParams,
    pub return_time: MomentEstimates,
    pub renewal: RenewalStats,
    /// Renewal-count approximation for a start at the target state.
    pub renewal_count: RenewalCountApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KemenySimulation {
    pub estimate: EmpiricalEstimate,
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub target: Option<TargetSimulation>,
    pub kemeny: Option<KemenySimulation>,
}

/// Runs the requested simulations with the analytic values alongside.
pub fn simulate(
    p: &StochasticMatrix,
    req: &SimulateRequest,
    step_cap: Option<u64>,
) -> Result<SimulationReport> {
    req.config.validate()?;
    if req.target.is_none() && !req.kemeny {
        return Err(Error::Domain(
            "nothing to simulate: pass a target state or request K".into(),
        ));
    }
    let structure = classify_structure(p);
    if !structure.irreducible {
        return Err(Error::Reducible {
            classes: structure.communicating_classes.len(),
            detail: format!("{:?}", structure.communicating_classes),
        });
    }
    let w = stationary_distribution(p)?;
    let z = fundamental_matrix(p, &w)?;
    let mut sim = Simulator::new(p);
    if let Some(cap) = step_cap {
        sim = sim.with_step_cap(cap);
    }
    let cfg = &req.config;

    let target = req
        .target
        .map(|j| -> Result<TargetSimulation> {
            let stats = crate::renewal::renewal_stats(&z, &w, j)?;
            Ok(TargetSimulation {
                state: j,
                label: p.labels()[j].clone(),
                visits: sim.simulate_visits(&w, j, cfg)?,
                clt: clt_gaussian_params(stats.mu, stats.sigma2, cfg.steps)?,
                return_time: sim.estimate_return_moments(j, cfg.replicas, cfg.seed)?,
                renewal: stats,
                renewal_count: expected_renewal_count(stats.mu, stats.sigma2, cfg.steps)?,
            })
        })
        .transpose()?;
    let kemeny = req
        .kemeny
        .then(|| -> Result<KemenySimulation> {
            Ok(KemenySimulation {
                estimate: sim.estimate_kemeny(&w, cfg.replicas, cfg.seed)?,
                analytic: kemeny_trace(&z),
            })
        })
        .transpose()?;
    Ok(SimulationReport {
        config: *cfg,
        target,
        kemeny,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{cycle, two_state, uniform};

    #[test]
    fn two_state_report() {
        let a = Analysis::run(&two_state(0.2, 0.4)).unwrap();
        let r = a.report(&AnalysisOptions::default()).unwrap();
        for k in [r.kemeny.trace, r.kemeny.spectral, r.kemeny.direct] {
            assert!((k - 5.0 / 3.0).abs() < 1e-10);
        }
        assert!(r.kemeny.agree && r.failure.is_none());
        assert!((r.equilibrium[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(r.fundamental_matrix.is_some() && r.monte_carlo.is_none());
    }

    #[test]
    fn matrices_are_size_gated() {
        let a = Analysis::run(&uniform(5)).unwrap();
        let opts = AnalysisOptions {
            matrix_emit_threshold: 4,
            ..Default::default()
        };
        let r = a.report(&opts).unwrap();
        assert!(r.fundamental_matrix.is_none() && r.hitting_times.is_none());
        let r = a.report(&AnalysisOptions { full: true, ..opts }).unwrap();
        assert!(r.fundamental_matrix.is_some());
    }

    #[test]
    fn cycle_verifies_with_equality_flags() {
        let a = Analysis::run(&cycle(3)).unwrap();
        let v = a.verify(&AnalysisOptions::default()).unwrap();
        assert!(v.passed, "{:#?}", v.checks);
        assert!(v.lower_bound_equality);
        assert_eq!(v.bus_equality_states, vec![0, 1, 2]);
        let harmonic = v
            .checks
            .iter()
            .find(|c| c.name == "harmonic_property")
            .unwrap();
        assert!(harmonic.residual <= 1e-12);
    }

    #[test]
    fn uniform_residuals_vanish() {
        let a = Analysis::run(&uniform(2)).unwrap();
        let v = a.verify(&AnalysisOptions::default()).unwrap();
        assert!(v.passed);
        for name in ["z_row_sums", "z_weighted_column_sums"] {
            assert_eq!(
                v.checks.iter().find(|c| c.name == name).unwrap().residual,
                0.0
            );
        }
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let p = StochasticMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            Analysis::run(&p),
            Err(Error::Reducible { classes: 2, .. })
        ));
    }

    #[test]
    fn comparison_rules() {
        let est = EmpiricalEstimate {
            value: 10.5,
            std_error: 0.2,
            replicas_used: 100,
        };
        assert!(Comparison::new(10.0, est, AgreementRule::StdErrors(3.0)).agrees);
        assert!(!Comparison::new(9.0, est, AgreementRule::StdErrors(3.0)).agrees);
        let exact = EmpiricalEstimate {
            value: 2.0,
            std_error: 0.0,
            replicas_used: 10,
        };
        let c = Comparison::new(2.0, exact, AgreementRule::StdErrors(3.0));
        assert!(c.agrees && c.z_score == 0.0);
    }

    #[test]
    fn simulate_needs_a_request() {
        let req = SimulateRequest {
            target: None,
            kemeny: false,
            config: SimulationConfig::new(1, 10, 10).unwrap(),
        };
        assert!(matches!(
            simulate(&uniform(2), &req, None),
            Err(Error::Domain(_))
        ));
    }
}
