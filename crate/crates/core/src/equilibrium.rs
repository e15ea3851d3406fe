//! Equilibrium distribution `w` (`wP = w`, `sum(w) = 1`) and the Cesaro
//! limit of the powers of `P`, whose rows all equal `w`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain::{classify_structure, StochasticMatrix};
use crate::error::{Error, Result};

/// Components below this are reported as a conditioning failure.
pub const MIN_COMPONENT: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EquilibriumDistribution {
    w: Vec<f64>,
}

impl EquilibriumDistribution {
    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        self.w[j]
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.w)
    }

    /// `max_j |(wP)_j - w_j|`.
    pub fn residual(&self, p: &StochasticMatrix) -> f64 {
        let n = self.n();
        (0..n)
            .map(|j| {
                let wp: f64 = (0..n).map(|i| self.w[i] * p.get(i, j)).sum();
                (wp - self.w[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Computes `w` by Grassmann–Taksar–Heyman state elimination.
///
/// States are censored from the last to the first; the normalizer of each
/// step is a sum of nonnegative off-diagonal probabilities, so no
/// subtraction ever occurs. Works for periodic chains.
pub fn stationary_distribution(p: &StochasticMatrix) -> Result<EquilibriumDistribution> {
    let structure = classify_structure(p);
    if !structure.irreducible {
        return Err(Error::Reducible {
            classes: structure.communicating_classes.len(),
            detail: format!("{:?}", structure.communicating_classes),
        });
    }
    gth(p)
}

fn gth(p: &StochasticMatrix) -> Result<EquilibriumDistribution> {
    let n = p.n();
    // Row-major working copy; a[i * n + j].
    let mut a: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| p.get(i, j))
        .collect();

    for k in (1..n).rev() {
        let s: f64 = a[k * n..k * n + k].iter().sum();
        if s <= 0.0 {
            return Err(Error::Conditioning(format!(
                "state {k} has no escape to lower-numbered states during elimination"
            )));
        }
        for i in 0..k {
            a[i * n + k] /= s;
        }
        for i in 0..k {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                a[i * n + j] += aik * a[k * n + j];
            }
        }
    }

    let mut w = vec![0.0; n];
    w[0] = 1.0;
    for k in 1..n {
        w[k] = (0..k).map(|i| w[i] * a[i * n + k]).sum();
    }
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    if let Some((j, &x)) = w
        .iter()
        .enumerate()
        .find(|(_, &x)| x.is_nan() || x < MIN_COMPONENT)
    {
        return Err(Error::Conditioning(format!(
            "equilibrium component {j} is {x:e}; chain is effectively reducible"
        )));
    }
    Ok(EquilibriumDistribution { w })
}

/// Solves `(I - P^T) x = 0` with the last equation replaced by `sum(x) = 1`,
/// by dense LU with partial pivoting. Used only as a cross-check on
/// [`stationary_distribution`].
pub fn stationary_distribution_lu(p: &StochasticMatrix) -> Result<EquilibriumDistribution> {
    let n = p.n();
    let mut a = DMatrix::<f64>::identity(n, n) - p.entries().transpose();
    let mut b = DVector::<f64>::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Conditioning("normalized equilibrium system is singular".into()))?;
    Ok(EquilibriumDistribution {
        w: x.iter().copied().collect(),
    })
}

/// The rank-one Cesaro limit, stored as its common row `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct CesaroLimit {
    row: EquilibriumDistribution,
}

impl CesaroLimit {
    #[inline]
    pub fn get(&self, _i: usize, j: usize) -> f64 {
        self.row.get(j)
    }

    pub fn row(&self) -> &EquilibriumDistribution {
        &self.row
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.row.n();
        DMatrix::from_fn(n, n, |_, j| self.row.get(j))
    }

    /// `max |P P_inf - P_inf|` and `max |P_inf P - P_inf|`, elementwise.
    pub fn absorption_residual(&self, p: &StochasticMatrix) -> f64 {
        let limit = self.to_dense();
        let left = p.entries() * &limit - &limit;
        let right = &limit * p.entries() - &limit;
        left.amax().max(right.amax())
    }
}

pub fn cesaro_limit(_p: &StochasticMatrix, w: &EquilibriumDistribution) -> CesaroLimit {
    CesaroLimit { row: w.clone() }
}

/// Max-entry distance between the Cesaro averages `(1/m) sum_{k<m} P^k` and
/// `P_inf` for `m = 1, 2, 4, ..., 2^doublings`.
///
/// Uses `A_{2m} = (A_m + P^m A_m) / 2`; the sequence is nonincreasing because
/// rows of `P^m` are convex weights.
pub fn cesaro_residuals(
    p: &StochasticMatrix,
    w: &EquilibriumDistribution,
    doublings: u32,
) -> Vec<(u64, f64)> {
    let limit = cesaro_limit(p, w).to_dense();
    let n = p.n();
    let mut power = p.entries().clone(); // P^m
    let mut avg = DMatrix::<f64>::identity(n, n); // (1/m) sum_{k<m} P^k
    let mut out = Vec::with_capacity(doublings as usize + 1);
    let mut m = 1u64;
    out.push((m, (&avg - &limit).amax()));
    for _ in 0..doublings {
        avg = (&avg + &power * &avg) * 0.5;
        power = &power * &power;
        m *= 2;
        out.push((m, (&avg - &limit).amax()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> StochasticMatrix {
        StochasticMatrix::from_rows(vec![vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap()
    }

    fn cycle(n: usize) -> StochasticMatrix {
        crate::generate::cycle(n)
    }

    #[test]
    fn uniform_two_state() {
        let w = stationary_distribution(&two_state(0.5, 0.5)).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn two_state_closed_form() {
        // w = (b, a) / (a + b)
        let w = stationary_distribution(&two_state(0.2, 0.4)).unwrap();
        assert!((w.get(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((w.get(1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cycle_is_uniform() {
        let w = stationary_distribution(&cycle(3)).unwrap();
        for &x in w.as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_state() {
        let p = StochasticMatrix::from_rows(vec![vec![1.0]]).unwrap();
        let w = stationary_distribution(&p).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
        let c = cesaro_limit(&p, &w);
        assert_eq!(c.to_dense(), DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn reducible_is_rejected() {
        let p = StochasticMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            stationary_distribution(&p),
            Err(Error::Reducible { classes: 2, .. })
        ));
    }

    #[test]
    fn underflowing_component_is_conditioning_error() {
        let p =
            StochasticMatrix::from_rows(vec![vec![1.0 - 1e-320, 1e-320], vec![1.0, 0.0]]).unwrap();
        // 1e-320 is subnormal but positive, so the chain is irreducible.
        assert!(matches!(
            stationary_distribution(&p),
            Err(Error::Conditioning(_))
        ));
    }

    #[test]
    fn gth_matches_lu() {
        let p = StochasticMatrix::from_rows(vec![
            vec![0.1, 0.6, 0.3],
            vec![0.4, 0.4, 0.2],
            vec![0.5, 0.0, 0.5],
        ])
        .unwrap();
        let a = stationary_distribution(&p).unwrap();
        let b = stationary_distribution_lu(&p).unwrap();
        for j in 0..3 {
            assert!((a.get(j) - b.get(j)).abs() < 1e-14);
        }
        assert!(a.residual(&p) < 1e-15);
    }

    #[test]
    fn cesaro_rows_and_absorption() {
        let p = cycle(3);
        let w = stationary_distribution(&p).unwrap();
        let c = cesaro_limit(&p, &w);
        for i in 0..3 {
            for j in 0..3 {
                assert!((c.get(i, j) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert!(c.absorption_residual(&p) < 1e-15);
    }

    #[test]
    fn cesaro_residuals_decrease_for_periodic_chain() {
        let p = cycle(3);
        let w = stationary_distribution(&p).unwrap();
        let r = cesaro_residuals(&p, &w, 10);
        assert!((r[0].1 - 2.0 / 3.0).abs() < 1e-15);
        for pair in r.windows(2) {
            assert!(pair[1].1 <= pair[0].1 + 1e-15);
        }
        assert!(r.last().unwrap().1 < 1e-3);
    }
}
