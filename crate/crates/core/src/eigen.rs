//! Eigenvalues of a dense real nonsymmetric matrix.
//!
//! Householder reduction to upper Hessenberg form followed by the implicit
//! double-shift (Francis) QR iteration, after the EISPACK `orthes`/`hqr`
//! pair. Only eigenvalues are computed.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Iterations allowed without a deflation before giving up.
const MAX_SWEEPS_PER_EIGENVALUE: usize = 200;

struct Dense {
    n: usize,
    a: Vec<f64>,
}

impl Dense {
    #[inline(always)]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline(always)]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }
}

/// All eigenvalues of `matrix`, in deflation order.
pub fn eigenvalues(matrix: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols(), "eigenvalues of a non-square matrix");
    if n == 0 {
        return Ok(Vec::new());
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let mut h = Dense {
        n,
        a: (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| matrix[(i, j)])
            .collect(),
    };
    reduce_to_hessenberg(&mut h);
    hessenberg_qr(&mut h)
}

#[allow(clippy::needless_range_loop)]
fn reduce_to_hessenberg(h: &mut Dense) {
    let n = h.n;
    if n < 3 {
        return;
    }
    let mut ort = vec![0.0; n];
    let high = n - 1;
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h.at(i, m - 1).abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut norm2 = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h.at(i, m - 1) / scale;
            norm2 += ort[i] * ort[i];
        }
        let mut g = norm2.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        norm2 -= ort[m] * g;
        ort[m] -= g;

        // H <- (I - u u^T / norm2) H
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h.at(i, j);
            }
            f /= norm2;
            for i in m..=high {
                *h.at_mut(i, j) -= f * ort[i];
            }
        }
        // H <- H (I - u u^T / norm2)
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h.at(i, j);
            }
            f /= norm2;
            for j in m..=high {
                *h.at_mut(i, j) -= f * ort[j];
            }
        }
        *h.at_mut(m, m - 1) = scale * g;
        for i in m + 1..=high {
            *h.at_mut(i, m - 1) = 0.0;
        }
    }
}

fn hessenberg_qr(h: &mut Dense) -> Result<Vec<Complex64>> {
    let nn = h.n;
    let eps = f64::EPSILON;
    let mut re = vec![0.0; nn];
    let mut im = vec![0.0; nn];

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h.at(i, j).abs();
        }
    }

    let mut en = nn as isize - 1;
    let mut exshift = 0.0;
    let mut iter = 0usize;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut x, mut y, mut w);

    while en >= 0 {
        let n = en as usize;

        // Smallest l such that H[l..=n, l..=n] is unreduced.
        let mut l = n;
        while l > 0 {
            s = h.at(l - 1, l - 1).abs() + h.at(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if h.at(l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root.
            *h.at_mut(n, n) += exshift;
            re[n] = h.at(n, n);
            im[n] = 0.0;
            en -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots from the trailing 2x2 block.
            w = h.at(n, n - 1) * h.at(n - 1, n);
            p = (h.at(n - 1, n - 1) - h.at(n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            *h.at_mut(n, n) += exshift;
            *h.at_mut(n - 1, n - 1) += exshift;
            x = h.at(n, n);
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                re[n - 1] = x + z;
                re[n] = if z != 0.0 { x - w / z } else { re[n - 1] };
                im[n - 1] = 0.0;
                im[n] = 0.0;
            } else {
                re[n - 1] = x + p;
                re[n] = x + p;
                im[n - 1] = z;
                im[n] = -z;
            }
            en -= 2;
            iter = 0;
        } else {
            x = h.at(n, n);
            y = h.at(n - 1, n - 1);
            w = h.at(n, n - 1) * h.at(n - 1, n);

            if iter > 0 && iter % 20 == 10 {
                exshift += x;
                for i in 0..=n {
                    *h.at_mut(i, i) -= x;
                }
                s = h.at(n, n - 1).abs() + h.at(n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter > 0 && iter.is_multiple_of(20) {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=n {
                        *h.at_mut(i, i) -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            if iter > MAX_SWEEPS_PER_EIGENVALUE {
                return Err(Error::Numerical(format!(
                    "QR iteration did not converge (block {l}..={n})"
                )));
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = n - 2;
            loop {
                z = h.at(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / h.at(m + 1, m) + h.at(m, m + 1);
                q = h.at(m + 1, m + 1) - z - r - s;
                r = h.at(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = h.at(m, m - 1).abs() * (q.abs() + r.abs());
                let rhs = eps
                    * (p.abs() * (h.at(m - 1, m - 1).abs() + z.abs() + h.at(m + 1, m + 1).abs()));
                if lhs < rhs {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=n {
                *h.at_mut(i, i - 2) = 0.0;
                if i > m + 2 {
                    *h.at_mut(i, i - 3) = 0.0;
                }
            }

            // Double QR step on rows l..=n, columns m..=n.
            for k in m..n {
                let notlast = k != n - 1;
                if k != m {
                    p = h.at(k, k - 1);
                    q = h.at(k + 1, k - 1);
                    r = if notlast { h.at(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    *h.at_mut(k, k - 1) = -s * x;
                } else if l != m {
                    *h.at_mut(k, k - 1) = -h.at(k, k - 1);
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;

                for j in k..=n {
                    let mut t = h.at(k, j) + q * h.at(k + 1, j);
                    if notlast {
                        t += r * h.at(k + 2, j);
                        *h.at_mut(k + 2, j) -= t * z;
                    }
                    *h.at_mut(k, j) -= t * x;
                    *h.at_mut(k + 1, j) -= t * y;
                }

                let last = n.min(k + 3);
                for i in l..=last {
                    let mut t = x * h.at(i, k) + y * h.at(i, k + 1);
                    if notlast {
                        t += z * h.at(i, k + 2);
                        *h.at_mut(i, k + 2) -= t * r;
                    }
                    *h.at_mut(i, k) -= t;
                    *h.at_mut(i, k + 1) -= t * q;
                }
            }
        }
    }

    Ok(re
        .into_iter()
        .zip(im)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}
