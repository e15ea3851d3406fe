//! Seek-time analysis of finite ergodic Markov chains.
//!
//! Given a row-stochastic transition matrix `P`, this crate computes the
//! equilibrium distribution `w`, the fundamental matrix
//! `Z = (I - P + P_inf)^-1 - P_inf`, mean hitting times, and the Kemeny
//! constant `K` by three independent routes:
//!
//! * `tr Z` ([`resolvent::kemeny_trace`]),
//! * `sum 1 / (1 - alpha_k)` over the non-unit eigenvalues of `P`
//!   ([`spectral::kemeny_spectral`]),
//! * the mean time to equilibrium `sum_j M_ij w_j`, which does not depend on
//!   the start `i` ([`resolvent::mean_time_to_equilibrium`]).
//!
//! The [`renewal`] module connects `Z_jj` to the moments of return times and
//! the variance of visit counts, and [`mc`] provides a seeded Monte Carlo
//! oracle for all of it.
//!
//! ```
//! use seektime_core::{Analysis, StochasticMatrix};
//!
//! let p = StochasticMatrix::from_rows(vec![vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap();
//! let a = Analysis::run(&p).unwrap();
//! assert!((a.kemeny_trace - 5.0 / 3.0).abs() < 1e-12);
//! ```

pub mod chain;
pub mod eigen;
pub mod equilibrium;
mod error;
pub mod generate;
pub mod mc;
pub mod renewal;
pub mod report;
pub mod resolvent;
pub mod spectral;

pub use chain::{
    classify_structure, parse_matrix, validate_stochastic, ChainStructure, InputFormat, RawMatrix,
    StochasticMatrix,
};
pub use equilibrium::{
    cesaro_limit, stationary_distribution, CesaroLimit, EquilibriumDistribution,
};
pub use error::{Error, ErrorClass, Result};
pub use mc::{EmpiricalEstimate, MomentEstimates, SimulationConfig, Simulator};
pub use renewal::{InterarrivalDistribution, RenewalStats};
pub use report::{Analysis, AnalysisOptions, AnalysisReport, McOptions, VerificationReport};
pub use resolvent::{FundamentalMatrix, HittingTimeMatrix, SeekTimeReport};
pub use spectral::{LowerBoundReport, SpectralSummary};
