//! Reference chains with known answers and seeded random chains.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::chain::StochasticMatrix;

/// Deterministic cycle `i -> i + 1 mod n`.
pub fn cycle(n: usize) -> StochasticMatrix {
    assert!(n >= 1);
    let rows = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[(i + 1) % n] = 1.0;
            r
        })
        .collect();
    StochasticMatrix::from_rows(rows).expect("cycle is stochastic")
}

/// Every entry `1/n`.
pub fn uniform(n: usize) -> StochasticMatrix {
    assert!(n >= 1);
    StochasticMatrix::from_rows(vec![vec![1.0 / n as f64; n]; n]).expect("uniform is stochastic")
}

/// `[[1-a, a], [b, 1-b]]`.
pub fn two_state(a: f64, b: f64) -> StochasticMatrix {
    StochasticMatrix::from_rows(vec![vec![1.0 - a, a], vec![b, 1.0 - b]])
        .expect("two-state chain is stochastic")
}

/// Rows drawn independently from the flat Dirichlet distribution.
///
/// Every entry is positive with probability one, so the chain is
/// irreducible and aperiodic.
pub fn dirichlet_chain<R: Rng + ?Sized>(n: usize, rng: &mut R) -> StochasticMatrix {
    let rows = (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
            row
        })
        .collect();
    StochasticMatrix::from_rows(rows).expect("normalized rows are stochastic")
}

/// Sparse irreducible chain: a random Hamiltonian cycle guarantees strong
/// connectivity, other edges are kept with probability `density`.
pub fn sparse_chain<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> StochasticMatrix {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut rows = vec![vec![0.0; n]; n];
    for k in 0..n {
        let (from, to) = (order[k], order[(k + 1) % n]);
        rows[from][to] = Exp1.sample(rng);
    }
    for row in rows.iter_mut() {
        for x in row.iter_mut() {
            if *x == 0.0 && rng.random::<f64>() < density {
                *x = Exp1.sample(rng);
            }
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    StochasticMatrix::from_rows(rows).expect("normalized rows are stochastic")
}
