//! Small dense symmetric solves for the p×p weighted normal equations.

use crate::Scalar;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Eigen-decomposition `A = V diag(λ) Vᵀ` of a symmetric matrix, computed by
/// cyclic Jacobi rotations. Eigenvalues are returned unsorted.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

impl<T: Scalar> SymEigen<T> {
    pub fn new(a: ArrayView2<T>) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "symmetric eigen-solve needs a square matrix");
        let mut a = a.to_owned();
        let mut v = Array2::<T>::eye(n);
        let eps = T::epsilon();

        for _sweep in 0..64 {
            let mut off = T::zero();
            let mut total = T::zero();
            for i in 0..n {
                for j in 0..n {
                    let x = a[[i, j]] * a[[i, j]];
                    total = total + x;
                    if i != j {
                        off = off + x;
                    }
                }
            }
            if off <= eps * eps * total || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[[p, q]];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a[[p, p]];
                    let aqq = a[[q, q]];
                    // Negligible against both diagonal entries: zero it outright.
                    let tiny = eps * eps * T::lit(1e-4);
                    if apq * apq <= tiny * app.abs() * aqq.abs() {
                        a[[p, q]] = T::zero();
                        a[[q, p]] = T::zero();
                        continue;
                    }
                    let theta = (aqq - app) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    let tau = s / (T::one() + c);

                    a[[p, p]] = app - t * apq;
                    a[[q, q]] = aqq + t * apq;
                    a[[p, q]] = T::zero();
                    a[[q, p]] = T::zero();
                    for r in 0..n {
                        if r != p && r != q {
                            let arp = a[[r, p]];
                            let arq = a[[r, q]];
                            let new_rp = arp - s * (arq + tau * arp);
                            let new_rq = arq + s * (arp - tau * arq);
                            a[[r, p]] = new_rp;
                            a[[p, r]] = new_rp;
                            a[[r, q]] = new_rq;
                            a[[q, r]] = new_rq;
                        }
                    }
                    for r in 0..n {
                        let vrp = v[[r, p]];
                        let vrq = v[[r, q]];
                        v[[r, p]] = vrp - s * (vrq + tau * vrp);
                        v[[r, q]] = vrq + s * (vrp - tau * vrq);
                    }
                }
            }
        }

        let values = Array1::from_iter((0..n).map(|i| a[[i, i]]));
        Self { values, vectors: v }
    }

    /// Spectral condition number; infinite when the matrix is not positive definite.
    pub fn condition(&self) -> T {
        let (lo, hi) = self
            .values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        if lo <= T::zero() || !lo.is_finite() || !hi.is_finite() {
            T::infinity()
        } else {
            hi / lo
        }
    }

    /// `A⁻¹ b` via the eigenbasis.
    pub fn solve(&self, b: ArrayView1<T>) -> Array1<T> {
        let coords = self.vectors.t().dot(&b);
        let scaled = Array1::from_iter(coords.iter().zip(self.values.iter()).map(|(&c, &l)| c / l));
        self.vectors.dot(&scaled)
    }

    pub fn inverse(&self) -> Array2<T> {
        let n = self.values.len();
        let mut inv = Array2::<T>::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc = acc + self.vectors[[i, k]] * self.vectors[[j, k]] / self.values[k];
                }
                inv[[i, j]] = acc;
                inv[[j, i]] = acc;
            }
        }
        inv
    }
}

/// `Xᵀ diag(w) X` and `Xᵀ diag(w) z` in one pass over the rows.
pub fn weighted_normal_equations<T: Scalar>(
    x: ArrayView2<T>,
    w: ArrayView1<T>,
    z: ArrayView1<T>,
) -> (Array2<T>, Array1<T>) {
    let p = x.ncols();
    let mut xtwx = Array2::<T>::zeros((p, p));
    let mut xtwz = Array1::<T>::zeros(p);
    for (i, row) in x.outer_iter().enumerate() {
        let wi = w[i];
        for a in 0..p {
            let wa = wi * row[a];
            xtwz[a] = xtwz[a] + wa * z[i];
            for b in a..p {
                xtwx[[a, b]] = xtwx[[a, b]] + wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtwx[[a, b]] = xtwx[[b, a]];
        }
    }
    (xtwx, xtwz)
}
