//! Independent reference computations used by the integration suites.
#![allow(dead_code)]

use bbglm::glm::Family;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Canonical-link cumulant `b(η)` and its first two derivatives.
fn cumulant(family: Family, eta: f64) -> (f64, f64, f64) {
    match family {
        Family::GaussianIdentity => (eta * eta / 2.0, eta, 1.0),
        Family::PoissonLog => {
            let e = eta.exp();
            (e, e, e)
        }
        Family::BinomialLogit => {
            let p = 1.0 / (1.0 + (-eta).exp());
            let b = if eta > 0.0 {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            };
            (b, p, p * (1.0 - p))
        }
    }
}

/// Weighted log-likelihood `Σ w (y η − t b(η))` up to constants; `y` holds
/// successes for binomial.
pub fn loglik(x: &[Vec<f64>], y: &[f64], t: &[f64], w: &[f64], family: Family, beta: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, row)| {
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            w[i] * (y[i] * eta - t[i] * cumulant(family, eta).0)
        })
        .sum()
}

/// Newton–Raphson on the weighted log-likelihood with step halving.
pub fn newton(x: &[Vec<f64>], y: &[f64], t: &[f64], w: &[f64], family: Family) -> Vec<f64> {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    let mut ll = loglik(x, y, t, w, family, &beta);
    for _ in 0..200 {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for (i, row) in x.iter().enumerate() {
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let (_, d1, d2) = cumulant(family, eta);
            for j in 0..p {
                grad[j] += w[i] * (y[i] - t[i] * d1) * row[j];
                for k in 0..p {
                    hess[j][k] += w[i] * t[i] * d2 * row[j] * row[k];
                }
            }
        }
        let step = gauss_solve(hess, grad.clone());
        let mut scale = 1.0;
        let mut next: Vec<f64>;
        loop {
            next = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let l = loglik(x, y, t, w, family, &next);
            if l >= ll - 1e-12 * ll.abs() || scale < 1e-10 {
                ll = l;
                break;
            }
            scale /= 2.0;
        }
        let moved = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        beta = next;
        if moved < 1e-13 * (1.0 + beta.iter().map(|b| b.abs()).fold(0.0, f64::max)) {
            break;
        }
    }
    beta
}

/// Nelder–Mead minimisation with restarts.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: &[f64], step: f64, iters: usize) -> Vec<f64> {
    let n = start.len();
    let mut best = start.to_vec();
    for _restart in 0..4 {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..n {
            let mut v = best.clone();
            v[i] += step;
            simplex.push(v);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        for _ in 0..iters {
            let mut idx: Vec<usize> = (0..=n).collect();
            idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            vals = idx.iter().map(|&i| vals[i]).collect();
            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
                .collect();
            let along = |c: f64| -> Vec<f64> {
                (0..n)
                    .map(|k| centroid[k] + c * (simplex[n][k] - centroid[k]))
                    .collect()
            };
            let r = along(-1.0);
            let fr = f(&r);
            if fr < vals[0] {
                let e = along(-2.0);
                let fe = f(&e);
                if fe < fr {
                    simplex[n] = e;
                    vals[n] = fe;
                } else {
                    simplex[n] = r;
                    vals[n] = fr;
                }
            } else if fr < vals[n - 1] {
                simplex[n] = r;
                vals[n] = fr;
            } else {
                let c = if fr < vals[n] { along(-0.5) } else { along(0.5) };
                let fc = f(&c);
                if fc < vals[n].min(fr) {
                    simplex[n] = c;
                    vals[n] = fc;
                } else {
                    for i in 1..=n {
                        simplex[i] = (0..n)
                            .map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]))
                            .collect();
                        vals[i] = f(&simplex[i]);
                    }
                }
            }
        }
        let i = (0..=n).min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap()).unwrap();
        best = simplex[i].clone();
    }
    best
}

/// Exact mean and variance of `Σ p_j y_j` with `p ~ Dirichlet(n_1..n_d)`.
pub fn dirichlet_linear_moments(counts: &[usize], y: &[f64]) -> (f64, f64) {
    let n: f64 = counts.iter().sum::<usize>() as f64;
    let mean: f64 = counts.iter().zip(y).map(|(&c, v)| c as f64 / n * v).sum();
    let var = counts
        .iter()
        .zip(y)
        .map(|(&c, v)| c as f64 / n * (v - mean).powi(2))
        .sum::<f64>()
        / (n + 1.0);
    (mean, var)
}

/// `ȳ ± z·sd` of a sample, the usual 3-sd Monte Carlo check.
pub fn within_mc(sample_mean: f64, target: f64, sd: f64, m: usize, k: f64) -> bool {
    (sample_mean - target).abs() <= k * sd / (m as f64).sqrt()
}

pub fn inv_logit(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// The vaso data with log-volume, log-rate and their sum.
pub fn vaso() -> bbglm::io::Dataset {
    let mut ds = bbglm::io::bundled::load("vaso").unwrap();
    ds.derive("lv=log(volume)").unwrap();
    ds.derive("lr=log(rate)").unwrap();
    ds.derive("lt=lv+lr").unwrap();
    ds
}
