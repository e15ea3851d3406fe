//! Fundamental matrix `Z = (I - P + P_inf)^-1 - P_inf`, mean hitting times,
//! and the Kemeny constant as `tr Z` and as the mean time to equilibrium.
//!
//! `Z[i][j]` is the expected excess number of visits to `j` starting from
//! `i` compared with a start in equilibrium.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain::StochasticMatrix;
use crate::equilibrium::EquilibriumDistribution;
use crate::error::{Error, Result};

/// Relative tolerance on the spread of the mean times to equilibrium.
pub const CONSTANCY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    z: DMatrix<f64>,
}

impl FundamentalMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.z[(i, j)]
    }

    #[inline]
    pub fn diag(&self, j: usize) -> f64 {
        self.z[(j, j)]
    }

    /// `max_i |sum_j Z[i][j]|`.
    pub fn row_sum_residual(&self) -> f64 {
        self.z.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max)
    }

    /// `max_j |sum_i w_i Z[i][j]|`.
    pub fn weighted_column_residual(&self, w: &EquilibriumDistribution) -> f64 {
        let wz = w.to_dvector().transpose() * &self.z;
        wz.amax()
    }

    /// `min_{i != j} (Z[j][j] - Z[i][j])`, which is `min w_j M_ij` and so
    /// positive for a valid resolvent. Zero when `n = 1`.
    pub fn min_dominance_gap(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let mut gap = f64::INFINITY;
        for j in 0..n {
            let d = self.diag(j);
            for i in (0..n).filter(|&i| i != j) {
                gap = gap.min(d - self.z[(i, j)]);
            }
        }
        gap
    }

    /// `min_j (Z[j][j] - (1 - w_j) / 2)`; nonnegative for a valid resolvent.
    pub fn min_diagonal_slack(&self, w: &EquilibriumDistribution) -> f64 {
        (0..self.n())
            .map(|j| self.diag(j) - (1.0 - w.get(j)) / 2.0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.z
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

/// One LU factorization of `I - P + 1 w`, then `n` solves against
/// `I - 1 w`.
///
/// Solving for `I - 1w` directly is equivalent to subtracting `P_inf` from
/// the inverse, because `(I - P + 1w) 1w = 1w`.
pub fn fundamental_matrix(
    p: &StochasticMatrix,
    w: &EquilibriumDistribution,
) -> Result<FundamentalMatrix> {
    let n = p.n();
    let wv = w.to_dvector();
    let ones = DVector::<f64>::from_element(n, 1.0);
    let limit = &ones * wv.transpose();
    let a = DMatrix::<f64>::identity(n, n) - p.entries() + &limit;
    let rhs = DMatrix::<f64>::identity(n, n) - &limit;

    let lu = a.lu();
    let z = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Conditioning("I - P + P_inf is numerically singular".into()))?;
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::Conditioning(
            "fundamental matrix has non-finite entries".into(),
        ));
    }
    Ok(FundamentalMatrix { z })
}

/// Mean first-passage times, `M[i][i] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingTimeMatrix {
    m: DMatrix<f64>,
}

impl HittingTimeMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// Largest violation of `M[i][j] = 1 + sum_{k != j} P[i][k] M[k][j]`,
    /// over `i != j`.
    pub fn recurrence_residual(&self, p: &StochasticMatrix) -> f64 {
        // P M has (i, j) entry sum_k P[i][k] M[k][j]; the k = j term vanishes
        // because M[j][j] = 0.
        let pm = p.entries() * &self.m;
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max((self.m[(i, j)] - 1.0 - pm[(i, j)]).abs());
                }
            }
        }
        worst
    }

    /// Smallest off-diagonal entry (at least 1 for a valid matrix); `None`
    /// for a single-state chain.
    pub fn min_off_diagonal(&self) -> Option<f64> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.m[(i, j)])
            .reduce(f64::min)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.m
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

/// `M[i][j] = (Z[j][j] - Z[i][j]) / w_j`, diagonal exactly zero.
pub fn mean_hitting_times(z: &FundamentalMatrix, w: &EquilibriumDistribution) -> HittingTimeMatrix {
    let n = z.n();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (z.diag(j) - z.get(i, j)) / w.get(j)
        }
    });
    HittingTimeMatrix { m }
}

/// Kemeny constant as the trace of `Z`.
pub fn kemeny_trace(z: &FundamentalMatrix) -> f64 {
    z.matrix().trace()
}

/// Mean times to equilibrium `M_iw = sum_j M[i][j] w_j` for every start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumTimes {
    pub to_equilibrium: Vec<f64>,
    /// `max_i M_iw - min_i M_iw`.
    pub spread: f64,
    /// Mean of `to_equilibrium`.
    pub kemeny: f64,
}

/// Computes `M_iw` for each `i` and fails if the values are not constant to
/// within `1e-8 * max(1, K)`.
pub fn mean_time_to_equilibrium(
    m: &HittingTimeMatrix,
    w: &EquilibriumDistribution,
) -> Result<EquilibriumTimes> {
    let times = to_equilibrium_unchecked(m, w);
    let tol = CONSTANCY_TOL * times.kemeny.abs().max(1.0);
    if times.spread > tol {
        return Err(Error::Consistency(format!(
            "mean time to equilibrium depends on the start: spread {:e} > {tol:e}",
            times.spread
        )));
    }
    Ok(times)
}

pub(crate) fn to_equilibrium_unchecked(
    m: &HittingTimeMatrix,
    w: &EquilibriumDistribution,
) -> EquilibriumTimes {
    let n = m.n();
    let to_equilibrium: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j) * w.get(j)).sum())
        .collect();
    let max = to_equilibrium
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let min = to_equilibrium.iter().copied().fold(f64::INFINITY, f64::min);
    let kemeny = to_equilibrium.iter().sum::<f64>() / n as f64;
    EquilibriumTimes {
        to_equilibrium,
        spread: max - min,
        kemeny,
    }
}

/// `M_wj = Z[j][j] / w_j`: mean time from an equilibrium start to `j`.
pub fn mean_time_from_equilibrium(z: &FundamentalMatrix, w: &EquilibriumDistribution) -> Vec<f64> {
    (0..z.n()).map(|j| z.diag(j) / w.get(j)).collect()
}

/// `sum_j M_wj w_j`, which equals the Kemeny constant.
pub fn weighted_time_from_equilibrium(from: &[f64], w: &EquilibriumDistribution) -> f64 {
    from.iter().zip(w.as_slice()).map(|(m, w)| m * w).sum()
}

/// `max_i |sum_j P[i][j] f_j - f_i|`.
pub fn harmonic_residual(p: &StochasticMatrix, f: &[f64]) -> f64 {
    let fv = DVector::from_column_slice(f);
    let pf = p.entries() * &fv;
    (pf - fv).amax()
}

/// Solves `(I - P) f = 0` with `f_0 = 1`. For an irreducible chain the
/// solution is the constant vector.
pub fn pinned_harmonic_solution(p: &StochasticMatrix) -> Result<Vec<f64>> {
    let n = p.n();
    let mut a = DMatrix::<f64>::identity(n, n) - p.entries();
    let mut b = DVector::<f64>::zeros(n);
    a.row_mut(0).fill(0.0);
    a[(0, 0)] = 1.0;
    b[0] = 1.0;
    let f = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Conditioning("pinned harmonic system is singular".into()))?;
    Ok(f.iter().copied().collect())
}

/// All Kemeny-constant quantities derived from `Z` and `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeekTimeReport {
    pub kemeny: f64,
    pub to_equilibrium: Vec<f64>,
    pub from_equilibrium: Vec<f64>,
    pub constancy_spread: f64,
}

pub fn seek_time_report(
    z: &FundamentalMatrix,
    m: &HittingTimeMatrix,
    w: &EquilibriumDistribution,
) -> Result<SeekTimeReport> {
    let times = mean_time_to_equilibrium(m, w)?;
    Ok(SeekTimeReport {
        kemeny: times.kemeny,
        to_equilibrium: times.to_equilibrium,
        from_equilibrium: mean_time_from_equilibrium(z, w),
        constancy_spread: times.spread,
    })
}
