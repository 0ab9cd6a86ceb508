//! Weighted GLM maximum likelihood by iteratively reweighted least squares.
//!
//! Each iteration solves `β = [XᵀWX]⁻¹XᵀWz` with total weight
//! `W = prior · trials · (dμ/dη)² / V(μ)` and adjusted dependent variate
//! `z = η + (y/trials − μ) · dη/dμ`. Prior weights multiply the iterative
//! weights at every iteration, so a Dirichlet weight vector passed here gives
//! the randomly weighted MLE of one posterior draw.

use super::Family;
use crate::error::{Error, Result};
use crate::linalg::{weighted_normal_equations, SymEigen};
use crate::Scalar;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Ok,
    MaxIter,
    Singular,
    Diverged,
}

impl fmt::Display for FitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitStatus::Ok => "ok",
            FitStatus::MaxIter => "max-iter",
            FitStatus::Singular => "singular",
            FitStatus::Diverged => "diverged",
        })
    }
}

/// Where IWLS starts.
#[derive(Clone, Copy, Debug)]
pub enum Start<'a, T> {
    /// `μ₀ = (y + ȳ)/2` (binomial: `(y + 0.5)/(trials + 1)`).
    Default,
    /// Fitted means from an earlier fit (warm start).
    Mu(ArrayView1<'a, T>),
    /// Coefficients; deviance increases are step-halved from the first iteration.
    Beta(ArrayView1<'a, T>),
}

#[derive(Clone, Debug)]
pub struct IwlsOptions {
    /// Stop when `|ΔD| / (|D| + 0.1) < tol` and the last step moved every
    /// `β_k` by at most `beta_tol · (1 + |β_k|)` (or `D` is flat to rounding).
    pub tol: f64,
    pub beta_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// A fit that stops with |η| at the family bound is diverging when its
    /// last step still moved some `β_k` by more than `step_tol · (1 + |β_k|)`.
    pub step_tol: f64,
    pub max_condition: f64,
    pub record_trace: bool,
}

impl IwlsOptions {
    pub fn for_scalar<T: Scalar>() -> Self {
        Self {
            tol: T::DEVIANCE_TOL,
            beta_tol: T::DEVIANCE_TOL.sqrt() / 10.0,
            max_iter: 50,
            max_halvings: 10,
            step_tol: 1e-2,
            max_condition: T::MAX_CONDITION,
            record_trace: false,
        }
    }
}

impl Default for IwlsOptions {
    fn default() -> Self {
        Self::for_scalar::<f64>()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitResult<T> {
    pub family: Family,
    pub beta: Array1<T>,
    pub eta: Array1<T>,
    pub mu: Array1<T>,
    pub deviance: T,
    /// Wald covariance `[XᵀŴX]⁻¹`, times the dispersion for gaussian.
    pub cov: Array2<T>,
    pub se: Array1<T>,
    pub dispersion: T,
    pub iterations: usize,
    pub converged: bool,
    pub status: FitStatus,
    /// Deviance after each accepted iteration (only with `record_trace`).
    pub deviance_trace: Vec<T>,
}

impl<T: Scalar> FitResult<T> {
    pub fn is_ok(&self) -> bool {
        self.status == FitStatus::Ok
    }
}

/// `Σ prior · d(y, μ)`.
pub fn deviance<T: Scalar>(
    y: ArrayView1<T>,
    mu: ArrayView1<T>,
    trials: Option<ArrayView1<T>>,
    prior_weights: ArrayView1<T>,
    family: Family,
) -> T {
    (0..y.len())
        .map(|i| {
            let t = trials.map_or(T::one(), |t| t[i]);
            prior_weights[i] * family.unit_deviance(y[i], mu[i], t)
        })
        .sum()
}

struct Problem<'a, T> {
    y: ArrayView1<'a, T>,
    trials: Option<ArrayView1<'a, T>>,
    pw: ArrayView1<'a, T>,
    family: Family,
    bound: Option<T>,
}

struct Working<T> {
    eta: Array1<T>,
    mu: Array1<T>,
    clamped: bool,
}

impl<T: Scalar> Problem<'_, T> {
    fn trials(&self, i: usize) -> T {
        self.trials.map_or(T::one(), |t| t[i])
    }

    fn at_eta(&self, eta: Array1<T>) -> Working<T> {
        let mut clamped = false;
        let eta = match self.bound {
            Some(b) => eta.mapv(|e| {
                if e.abs() > b {
                    clamped = true;
                    e.signum() * b
                } else {
                    e
                }
            }),
            None => eta,
        };
        let mu = eta.mapv(|e| self.family.inv_link(e));
        Working { eta, mu, clamped }
    }

    fn deviance(&self, mu: &Array1<T>) -> T {
        deviance(self.y, mu.view(), self.trials, self.pw, self.family)
    }

    /// Total weights and adjusted dependent variate at the current iterate.
    fn weights(&self, w: &Working<T>) -> (Array1<T>, Array1<T>) {
        let d = self.y.len();
        let mut wt = Array1::zeros(d);
        let mut z = Array1::zeros(d);
        for i in 0..d {
            let t = self.trials(i);
            let eta = w.eta[i];
            if self.family == Family::GaussianIdentity {
                wt[i] = self.pw[i];
                z[i] = self.y[i];
                continue;
            }
            let me = self.family.mu_eta(eta);
            let var = self.family.variance_at_eta(eta);
            wt[i] = self.pw[i] * t * me * me / var;
            z[i] = eta + (self.y[i] / t - w.mu[i]) / me;
        }
        (wt, z)
    }

    fn default_mu(&self) -> Array1<T> {
        let d = self.y.len();
        match self.family {
            Family::BinomialLogit => {
                Array1::from_iter((0..d).map(|i| (self.y[i] + T::lit(0.5)) / (self.trials(i) + T::one())))
            }
            Family::GaussianIdentity | Family::PoissonLog => {
                let total: T = self.pw.iter().copied().sum();
                let ybar = self.y.iter().zip(self.pw.iter()).map(|(&y, &w)| y * w).sum::<T>() / total;
                let floor = T::lit(0.1);
                Array1::from_iter(self.y.iter().map(|&y| {
                    let m = (y + ybar) / T::lit(2.0);
                    if self.family == Family::PoissonLog && m < floor {
                        floor
                    } else {
                        m
                    }
                }))
            }
        }
    }

    fn clip_mu(&self, mu: ArrayView1<T>) -> Array1<T> {
        let lo = T::lit(1e-10);
        mu.mapv(|m| match self.family {
            Family::GaussianIdentity => m,
            Family::PoissonLog => m.max(lo),
            Family::BinomialLogit => m.max(lo).min(T::one() - lo),
        })
    }
}

fn check_inputs<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    trials: Option<ArrayView1<T>>,
    pw: ArrayView1<T>,
    family: Family,
) -> Result<()> {
    let d = x.nrows();
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != d || pw.len() != d || trials.is_some_and(|t| t.len() != d) {
        return Err(Error::Dimension(format!(
            "X has {d} rows, y {}, weights {}, trials {:?}",
            y.len(),
            pw.len(),
            trials.map(|t| t.len())
        )));
    }
    if x.ncols() == 0 || x.ncols() > d {
        return Err(Error::Dimension(format!("{} columns for {d} rows", x.ncols())));
    }
    if let Some(bad) = pw.iter().find(|w| !(**w > T::zero()) || !w.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "prior weights must be positive, got {bad}"
        )));
    }
    if trials.is_some() && family != Family::BinomialLogit {
        return Err(Error::InvalidArgument("trials require the binomial family".into()));
    }
    for i in 0..d {
        family.check_response(y[i], trials.map_or(T::one(), |t| t[i]), trials.is_some())?;
    }
    Ok(())
}

/// Fits a prior-weighted GLM. Numerical failures are reported through
/// [`FitResult::status`]; malformed input is an `Err`.
pub fn iwls_fit<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    trials: Option<ArrayView1<T>>,
    prior_weights: ArrayView1<T>,
    family: Family,
    start: Start<T>,
    opts: &IwlsOptions,
) -> Result<FitResult<T>> {
    check_inputs(x, y, trials, prior_weights, family)?;
    let prob = Problem {
        y,
        trials,
        pw: prior_weights,
        family,
        bound: family.eta_bound().map(T::lit),
    };
    let p = x.ncols();
    let tol = T::lit(opts.tol);
    let max_cond = T::lit(opts.max_condition);
    let noise = T::epsilon() * T::lit(1e3);

    let (mut cur, mut beta_prev) = match start {
        Start::Default => {
            let mu = prob.default_mu();
            (prob.at_eta(mu.mapv(|m| family.link(m))), None)
        }
        Start::Mu(mu) => {
            if mu.len() != x.nrows() {
                return Err(Error::Dimension("warm-start means do not match rows".into()));
            }
            let mu = prob.clip_mu(mu);
            (prob.at_eta(mu.mapv(|m| family.link(m))), None)
        }
        Start::Beta(b) => {
            if b.len() != p {
                return Err(Error::Dimension("warm-start coefficients do not match columns".into()));
            }
            (prob.at_eta(x.dot(&b)), Some(b.to_owned()))
        }
    };
    let mut dev = prob.deviance(&cur.mu);
    let mut trace = Vec::new();
    let mut status = FitStatus::MaxIter;
    let mut running = true;
    let mut iterations = 0;

    for iter in 1..=opts.max_iter {
        iterations = iter;
        let (w, z) = prob.weights(&cur);
        let (xtwx, xtwz) = weighted_normal_equations(x, w.view(), z.view());
        let eig = SymEigen::new(xtwx.view());
        if !(eig.condition() <= max_cond) {
            status = FitStatus::Singular;
            break;
        }
        let mut beta = eig.solve(xtwz.view());
        let mut next = prob.at_eta(x.dot(&beta));
        let mut dev_new = prob.deviance(&next.mu);

        let worse = |d: T, old: T| !d.is_finite() || d - old > noise * (old.abs() + T::lit(0.1));
        if worse(dev_new, dev) {
            match &beta_prev {
                Some(prev) => {
                    for _ in 0..opts.max_halvings {
                        beta = (&beta + prev).mapv(|v| v * T::lit(0.5));
                        next = prob.at_eta(x.dot(&beta));
                        dev_new = prob.deviance(&next.mu);
                        if !worse(dev_new, dev) {
                            break;
                        }
                    }
                    if worse(dev_new, dev) {
                        status = FitStatus::Diverged;
                        break;
                    }
                }
                None if !dev_new.is_finite() => {
                    status = FitStatus::Diverged;
                    break;
                }
                None => {}
            }
        }

        let change = (dev_new - dev).abs() / (dev_new.abs() + T::lit(0.1));
        let moved_more_than = |tol: f64| match &beta_prev {
            Some(prev) => beta
                .iter()
                .zip(prev.iter())
                .any(|(&b, &a)| (b - a).abs() > T::lit(tol) * (T::one() + b.abs())),
            None => true,
        };
        running = moved_more_than(opts.step_tol);
        let settled = !moved_more_than(opts.beta_tol) || change <= noise;
        cur = next;
        dev = dev_new;
        beta_prev = Some(beta);
        if opts.record_trace {
            trace.push(dev);
        }
        if family == Family::GaussianIdentity || (change < tol && settled) {
            status = FitStatus::Ok;
            break;
        }
    }
    // Fitted values pinned at 0/1 (or 0) while β keeps stepping: separation.
    // Vanishing weights at those rows can also make XᵀWX singular first.
    if cur.clamped && running {
        status = FitStatus::Diverged;
    }

    let beta = beta_prev.unwrap_or_else(|| Array1::from_elem(p, T::nan()));
    let eta = x.dot(&beta);
    let mut fit = FitResult {
        family,
        beta,
        eta,
        mu: cur.mu.clone(),
        deviance: dev,
        cov: Array2::from_elem((p, p), T::nan()),
        se: Array1::from_elem(p, T::nan()),
        dispersion: T::one(),
        iterations,
        converged: status == FitStatus::Ok,
        status,
        deviance_trace: trace,
    };
    if status == FitStatus::Ok {
        let (w, z) = prob.weights(&cur);
        let (xtwx, _) = weighted_normal_equations(x, w.view(), z.view());
        let eig = SymEigen::new(xtwx.view());
        if !(eig.condition() <= max_cond) {
            fit.status = FitStatus::Singular;
            fit.converged = false;
            return Ok(fit);
        }
        if family == Family::GaussianIdentity {
            let total: T = prior_weights.iter().copied().sum();
            let resid_df = total - T::lit(p as f64);
            fit.dispersion = if resid_df > T::zero() { dev / resid_df } else { T::nan() };
        }
        fit.cov = eig.inverse().mapv(|v| v * fit.dispersion);
        fit.se = fit.cov.diag().mapv(|v| v.max(T::zero()).sqrt());
    }
    Ok(fit)
}

/// Weighted score `Xᵀ W (z − Xβ)` at `beta`; zero at the MLE.
pub fn weighted_score<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    trials: Option<ArrayView1<T>>,
    prior_weights: ArrayView1<T>,
    family: Family,
    beta: ArrayView1<T>,
) -> Array1<T> {
    let prob = Problem {
        y,
        trials,
        pw: prior_weights,
        family,
        bound: family.eta_bound().map(T::lit),
    };
    let cur = prob.at_eta(x.dot(&beta));
    let (w, z) = prob.weights(&cur);
    let resid = &z - &x.dot(&beta);
    x.t().dot(&(&w * &resid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fit(x: &Array2<f64>, y: &Array1<f64>, w: &Array1<f64>, fam: Family) -> FitResult<f64> {
        iwls_fit(
            x.view(),
            y.view(),
            None,
            w.view(),
            fam,
            Start::Default,
            &IwlsOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn saturated_two_by_two_logit_matches_log_odds() {
        // Cells: group 0 has 3 successes of 10, group 1 has 7 of 12.
        let x = array![[1.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 1.0]];
        let y = array![1.0, 0.0, 1.0, 0.0];
        let w = array![3.0, 7.0, 7.0, 5.0];
        let f = fit(&x, &y, &w, Family::BinomialLogit);
        assert_eq!(f.status, FitStatus::Ok);
        let b0 = (3.0f64 / 7.0).ln();
        let b1 = (7.0f64 / 5.0).ln() - b0;
        assert!((f.beta[0] - b0).abs() < 1e-8, "{}", f.beta[0]);
        assert!((f.beta[1] - b1).abs() < 1e-8);
        // Wald SEs of log-odds from cell counts.
        assert!((f.se[0] - (1.0 / 3.0 + 1.0 / 7.0f64).sqrt()).abs() < 1e-7);
        assert!((f.se[1] - (1.0 / 3.0 + 1.0 / 7.0 + 1.0 / 7.0 + 1.0 / 5.0f64).sqrt()).abs() < 1e-7);
    }

    #[test]
    fn grouped_binomial_equals_expanded() {
        let x = array![[1.0, -1.0], [1.0, 0.0], [1.0, 2.0]];
        let y = array![1.0, 3.0, 4.0];
        let t = array![4.0, 5.0, 5.0];
        let ones = Array1::ones(3);
        let g = iwls_fit(
            x.view(),
            y.view(),
            Some(t.view()),
            ones.view(),
            Family::BinomialLogit,
            Start::Default,
            &IwlsOptions::default(),
        )
        .unwrap();
        // Same data as 0/1 rows with counts as prior weights.
        let xe = array![[1.0, -1.0], [1.0, -1.0], [1.0, 0.0], [1.0, 0.0], [1.0, 2.0], [1.0, 2.0]];
        let ye = array![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let we = array![1.0, 3.0, 3.0, 2.0, 4.0, 1.0];
        let e = fit(&xe, &ye, &we, Family::BinomialLogit);
        for k in 0..2 {
            assert!((g.beta[k] - e.beta[k]).abs() < 1e-8);
            assert!((g.se[k] - e.se[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn gaussian_is_one_weighted_least_squares_step() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]];
        let y = array![1.0, 2.5, 2.9, 4.2];
        let w = array![1.0, 2.0, 1.0, 0.5];
        let f = fit(&x, &y, &w, Family::GaussianIdentity);
        assert_eq!(f.iterations, 1);
        assert_eq!(f.status, FitStatus::Ok);
        let (mut sw, mut swx, mut swxx, mut swy, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..4 {
            let (xi, yi, wi) = (x[[i, 1]], y[i], w[i]);
            sw += wi;
            swx += wi * xi;
            swxx += wi * xi * xi;
            swy += wi * yi;
            swxy += wi * xi * yi;
        }
        let slope = (sw * swxy - swx * swy) / (sw * swxx - swx * swx);
        let intercept = (swy - slope * swx) / sw;
        assert!((f.beta[0] - intercept).abs() < 1e-10);
        assert!((f.beta[1] - slope).abs() < 1e-10);
    }

    #[test]
    fn perfect_separation_diverges() {
        let x = array![[1.0, -2.0], [1.0, -1.0], [1.0, 1.0], [1.0, 2.0]];
        let y = array![0.0, 0.0, 1.0, 1.0];
        let f = fit(&x, &y, &Array1::ones(4), Family::BinomialLogit);
        assert_ne!(f.status, FitStatus::Ok);
    }

    #[test]
    fn quasi_complete_separation_diverges() {
        let x = array![[1.0, -2.0], [1.0, -1.0], [1.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 2.0]];
        let y = array![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let f = fit(&x, &y, &Array1::ones(6), Family::BinomialLogit);
        assert_eq!(f.status, FitStatus::Diverged);
    }

    #[test]
    fn collinear_columns_are_singular() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let y = array![1.0, 2.0, 3.0];
        let f = fit(&x, &y, &Array1::ones(3), Family::PoissonLog);
        assert_eq!(f.status, FitStatus::Singular);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = array![[1.0], [1.0]];
        let y = array![1.0, 0.0];
        let opts = IwlsOptions::default();
        let bad_w = array![1.0, 0.0];
        assert!(iwls_fit(
            x.view(),
            y.view(),
            None,
            bad_w.view(),
            Family::BinomialLogit,
            Start::Default,
            &opts
        )
        .is_err());
        let y2 = array![2.0, 0.0];
        let w = array![1.0, 1.0];
        assert!(iwls_fit(
            x.view(),
            y2.view(),
            None,
            w.view(),
            Family::BinomialLogit,
            Start::Default,
            &opts
        )
        .is_err());
        let t = array![3.0, 3.0];
        assert!(iwls_fit(
            x.view(),
            y2.view(),
            Some(t.view()),
            w.view(),
            Family::PoissonLog,
            Start::Default,
            &opts
        )
        .is_err());
        let short = array![1.0];
        assert!(iwls_fit(
            x.view(),
            short.view(),
            None,
            w.view(),
            Family::PoissonLog,
            Start::Default,
            &opts
        )
        .is_err());
    }

    #[test]
    fn deviance_examples() {
        let y = array![0.0];
        let mu = array![1.0];
        let w = array![1.0];
        assert_eq!(deviance(y.view(), mu.view(), None, w.view(), Family::PoissonLog), 2.0);
        let y = array![1.0, 4.0, 0.0];
        let w = array![1.0, 2.0, 3.0];
        assert_eq!(deviance(y.view(), y.view(), None, w.view(), Family::PoissonLog), 0.0);
        assert_eq!(
            deviance(y.view(), y.view(), None, w.view(), Family::GaussianIdentity),
            0.0
        );
    }

    #[test]
    fn warm_start_converges_to_same_fit() {
        let x = array![[1.0, 0.1], [1.0, 0.9], [1.0, 1.7], [1.0, 2.2], [1.0, 3.0]];
        let y = array![1.0, 0.0, 3.0, 5.0, 9.0];
        let w = Array1::ones(5);
        let cold = fit(&x, &y, &w, Family::PoissonLog);
        let opts = IwlsOptions::default();
        let warm = iwls_fit(
            x.view(),
            y.view(),
            None,
            w.view(),
            Family::PoissonLog,
            Start::Mu(cold.mu.view()),
            &opts,
        )
        .unwrap();
        let from_beta = iwls_fit(
            x.view(),
            y.view(),
            None,
            w.view(),
            Family::PoissonLog,
            Start::Beta(cold.beta.view()),
            &opts,
        )
        .unwrap();
        for k in 0..2 {
            assert!((warm.beta[k] - cold.beta[k]).abs() < 1e-10);
            assert!((from_beta.beta[k] - cold.beta[k]).abs() < 1e-10);
        }
        assert!(warm.iterations <= cold.iterations);
    }

    #[test]
    fn f32_fit_agrees_with_f64() {
        let x = array![[1.0, 0.1], [1.0, 0.9], [1.0, 1.7], [1.0, 2.2], [1.0, 3.0]];
        let y = array![1.0, 0.0, 3.0, 5.0, 9.0];
        let w = Array1::ones(5);
        let f64fit = fit(&x, &y, &w, Family::PoissonLog);
        let x32 = x.mapv(|v| v as f32);
        let y32 = y.mapv(|v| v as f32);
        let w32 = w.mapv(|v: f64| v as f32);
        let f32fit = iwls_fit(
            x32.view(),
            y32.view(),
            None,
            w32.view(),
            Family::PoissonLog,
            Start::Default,
            &IwlsOptions::for_scalar::<f32>(),
        )
        .unwrap();
        assert_eq!(f32fit.status, FitStatus::Ok);
        for k in 0..2 {
            assert!((f32fit.beta[k] as f64 - f64fit.beta[k]).abs() < 1e-4);
        }
    }
}
