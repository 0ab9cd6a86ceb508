//! Posterior summaries, empirical distributions and interval comparisons.

use crate::engine::PosteriorDraws;
use crate::error::{Error, Result};
use crate::glm::FitResult;
use crate::Scalar;
use ndarray::{Array2, ArrayView2};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

pub const MIN_SUMMARY_DRAWS: usize = 20;

fn sorted_finite<T: Scalar>(xs: &[T]) -> Result<Vec<T>> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    Ok(v)
}

/// Quantile of sorted data by linear interpolation between order
/// statistics (position `h = (n − 1)q`, zero-based).
pub fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn quantile<T: Scalar>(xs: &[T], q: f64) -> Result<T> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(quantile_sorted(&sorted_finite(xs)?, q))
}

/// Equal-tailed interval at `level`.
pub fn central_interval<T: Scalar>(xs: &[T], level: f64) -> Result<(T, T)> {
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "central interval needs at least two draws".into(),
        ));
    }
    check_level(level)?;
    let s = sorted_finite(xs)?;
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&s, tail), quantile_sorted(&s, 1.0 - tail)))
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")))
    }
}

fn mean_sd<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::lit(xs.len() as f64);
    let shift = xs[0];
    let mean = shift + xs.iter().map(|&x| x - shift).sum::<T>() / n;
    let ss: T = xs.iter().map(|&x| (x - mean) * (x - mean)).sum();
    let sd = if xs.len() > 1 {
        (ss / (n - T::one())).sqrt()
    } else {
        T::zero()
    };
    (mean, sd)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamSummary<T> {
    pub name: String,
    pub mean: T,
    pub sd: T,
    pub median: T,
    pub lower: T,
    pub upper: T,
    /// `|mean| / sd`; absent when `sd = 0`.
    pub ratio: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryTable<T> {
    pub level: f64,
    pub draws_effective: usize,
    pub master_seed: Option<u64>,
    pub params: Vec<ParamSummary<T>>,
}

impl<T: Scalar> SummaryTable<T> {
    pub fn get(&self, name: &str) -> Option<&ParamSummary<T>> {
        self.params.iter().find(|p| p.name == name)
    }
}

pub fn summarize_vector<T: Scalar>(name: &str, xs: &[T], level: f64) -> Result<ParamSummary<T>> {
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("summary needs at least two draws".into()));
    }
    let sorted = sorted_finite(xs)?;
    let (mean, sd) = mean_sd(&sorted);
    let (lower, upper) = central_interval(&sorted, level)?;
    Ok(ParamSummary {
        name: name.to_string(),
        mean,
        sd,
        median: quantile_sorted(&sorted, 0.5),
        lower,
        upper,
        ratio: (sd > T::zero()).then(|| mean.abs() / sd),
    })
}

/// Column-wise summaries of a draws matrix (rows are draws).
pub fn summarize_matrix<T: Scalar>(names: &[String], draws: ArrayView2<T>, level: f64) -> Result<SummaryTable<T>> {
    if draws.nrows() < MIN_SUMMARY_DRAWS {
        return Err(Error::TooFewDraws(draws.nrows()));
    }
    if names.len() != draws.ncols() {
        return Err(Error::Dimension("one name per column required".into()));
    }
    check_level(level)?;
    let params = names
        .iter()
        .enumerate()
        .map(|(k, name)| summarize_vector(name, &draws.column(k).to_vec(), level))
        .collect::<Result<Vec<_>>>()?;
    Ok(SummaryTable {
        level,
        draws_effective: draws.nrows(),
        master_seed: None,
        params,
    })
}

pub fn summarize<T: Scalar>(draws: &PosteriorDraws<T>, level: f64) -> Result<SummaryTable<T>> {
    let mut table = summarize_matrix(&draws.names, draws.beta.view(), level)?;
    table.master_seed = Some(draws.master_seed);
    Ok(table)
}

/// Right-continuous empirical CDF.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ecdf<T> {
    /// Distinct sorted values.
    pub values: Vec<T>,
    /// `F(values[i])`.
    pub probs: Vec<f64>,
}

impl<T: Scalar> Ecdf<T> {
    pub fn new(xs: &[T]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let sorted = sorted_finite(xs)?;
        let n = sorted.len() as f64;
        let mut values = Vec::new();
        let mut probs = Vec::new();
        for (i, &x) in sorted.iter().enumerate() {
            if values.last() == Some(&x) {
                *probs.last_mut().unwrap() = (i + 1) as f64 / n;
            } else {
                values.push(x);
                probs.push((i + 1) as f64 / n);
            }
        }
        Ok(Self { values, probs })
    }

    pub fn eval(&self, x: T) -> f64 {
        match self.values.partition_point(|&v| v <= x) {
            0 => 0.0,
            k => self.probs[k - 1],
        }
    }

    /// Smallest value with `F(x) ≥ p`.
    pub fn inverse(&self, p: f64) -> T {
        let k = self.probs.partition_point(|&q| q < p - 1e-12);
        self.values[k.min(self.values.len() - 1)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KdeCurve<T> {
    pub bandwidth: T,
    pub grid: Vec<T>,
    pub density: Vec<T>,
}

pub const KDE_POINTS: usize = 512;

/// Gaussian kernel density with Silverman's bandwidth
/// `0.9 · min(sd, IQR/1.34) · M^(−1/5)` on 512 points spanning the data
/// range ± 3 bandwidths, scaled so the trapezoid integral is one.
pub fn kde<T: Scalar>(xs: &[T]) -> Result<KdeCurve<T>> {
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("density needs at least two draws".into()));
    }
    let sorted = sorted_finite(xs)?;
    let (_, sd) = mean_sd(&sorted);
    if !(sd > T::zero()) {
        return Err(Error::ZeroSpread);
    }
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > T::zero() {
        sd.min(iqr / T::lit(1.34))
    } else {
        sd
    };
    let n = sorted.len() as f64;
    let h = T::lit(0.9) * spread * T::lit(n.powf(-0.2));
    let lo = sorted[0] - T::lit(3.0) * h;
    let hi = sorted[sorted.len() - 1] + T::lit(3.0) * h;
    let step = (hi - lo) / T::lit((KDE_POINTS - 1) as f64);
    let grid: Vec<T> = (0..KDE_POINTS).map(|i| lo + step * T::lit(i as f64)).collect();
    let norm = T::one() / (T::lit(n) * h * T::lit((2.0 * std::f64::consts::PI).sqrt()));
    let cutoff = T::lit(8.0) * h;
    let mut density: Vec<T> = grid
        .iter()
        .map(|&g| {
            let start = sorted.partition_point(|&x| x < g - cutoff);
            let end = sorted.partition_point(|&x| x <= g + cutoff);
            sorted[start..end]
                .iter()
                .map(|&x| {
                    let u = (g - x) / h;
                    (-(u * u) / T::lit(2.0)).exp()
                })
                .sum::<T>()
                * norm
        })
        .collect();
    let area = trapezoid(&grid, &density);
    density.iter_mut().for_each(|d| *d = *d / area);
    Ok(KdeCurve {
        bandwidth: h,
        grid,
        density,
    })
}

pub fn trapezoid<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) / T::lit(2.0))
        .sum()
}

fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FpcInterval {
    pub population: usize,
    /// `1 − n/N`, applied to the standard error.
    pub factor: f64,
    pub interval: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalIntervals {
    pub n: usize,
    pub mean: f64,
    /// `Σ(y − ȳ)²/n`.
    pub variance: f64,
    /// `Σ(y − ȳ)²/(n − 1)`.
    pub unbiased_variance: f64,
    pub level: f64,
    /// `ȳ ± z·s/√n` with the divisor-n variance.
    pub z_interval: (f64, f64),
    /// `ȳ ± t_{n−1}·s/√n` with the unbiased variance.
    pub t_interval: (f64, f64),
    pub fpc: Option<FpcInterval>,
}

/// Large-sample, Student-t and finite-population intervals for a mean.
pub fn classical_intervals<T: Scalar>(ys: &[T], level: f64, population: Option<usize>) -> Result<ClassicalIntervals> {
    let n = ys.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two observations".into()));
    }
    check_level(level)?;
    let ys: Vec<f64> = ys.iter().map(|y| y.as_f64()).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite);
    }
    let nf = n as f64;
    let mean = ys[0] + ys.iter().map(|y| y - ys[0]).sum::<f64>() / nf;
    let ss: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let variance = ss / nf;
    let unbiased_variance = ss / (nf - 1.0);
    let tail = 1.0 - (1.0 - level) / 2.0;
    let z = normal_quantile(tail);
    let se = (variance / nf).sqrt();
    let z_interval = (mean - z * se, mean + z * se);
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .expect("positive df")
        .inverse_cdf(tail);
    let se_t = (unbiased_variance / nf).sqrt();
    let t_interval = (mean - t * se_t, mean + t * se_t);
    let fpc = match population {
        None => None,
        Some(big) if big < n => {
            return Err(Error::PopulationTooSmall {
                population: big,
                sample: n,
            })
        }
        Some(big) => {
            let factor = 1.0 - nf / big as f64;
            let half = z * se * factor;
            Some(FpcInterval {
                population: big,
                factor,
                interval: (mean - half, mean + half),
            })
        }
    };
    Ok(ClassicalIntervals {
        n,
        mean,
        variance,
        unbiased_variance,
        level,
        z_interval,
        t_interval,
        fpc,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MlBand<T> {
    pub fit: T,
    pub lower: T,
    pub upper: T,
}

/// Wald band `η̂ ± z·sqrt(x′ cov x)` on the linear-predictor scale,
/// mapped through the inverse link.
pub fn ml_bands<T: Scalar>(fit: &FitResult<T>, grid: ArrayView2<T>, level: f64) -> Result<Vec<MlBand<T>>> {
    if !fit.is_ok() {
        return Err(Error::FitFailed(fit.status));
    }
    check_level(level)?;
    if grid.ncols() != fit.beta.len() {
        return Err(Error::Dimension("grid columns must match coefficients".into()));
    }
    let z = T::lit(normal_quantile(1.0 - (1.0 - level) / 2.0));
    let family = fit.family;
    Ok(grid
        .outer_iter()
        .map(|x| {
            let eta = x.dot(&fit.beta);
            let var = x.dot(&fit.cov.dot(&x)).max(T::zero());
            let half = z * var.sqrt();
            MlBand {
                fit: family.inv_link(eta),
                lower: family.inv_link(eta - half),
                upper: family.inv_link(eta + half),
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandRow<T> {
    pub ml_fit: T,
    pub ml_lower: T,
    pub ml_upper: T,
    pub bayes_median: T,
    pub bayes_lower: T,
    pub bayes_upper: T,
}

impl<T: Scalar> BandRow<T> {
    pub fn ml_width(&self) -> T {
        self.ml_upper - self.ml_lower
    }

    pub fn bayes_width(&self) -> T {
        self.bayes_upper - self.bayes_lower
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandTable<T> {
    pub level: f64,
    /// Grid covariate values, one row per grid point.
    pub grid_columns: Vec<String>,
    pub grid: Array2<T>,
    pub rows: Vec<BandRow<T>>,
}

/// ML Wald bands and pointwise posterior quantile bands over a grid.
///
/// `curves` holds one fitted curve per draw (see
/// [`PosteriorDraws::curve_draws`]); `design_grid` is the grid expanded to
/// design columns and `grid` the covariate values reported alongside.
pub fn band_table<T: Scalar>(
    fit: &FitResult<T>,
    design_grid: ArrayView2<T>,
    curves: ArrayView2<T>,
    grid_columns: Vec<String>,
    grid: Array2<T>,
    level: f64,
) -> Result<BandTable<T>> {
    let ml = ml_bands(fit, design_grid, level)?;
    if curves.ncols() != ml.len() || grid.nrows() != ml.len() {
        return Err(Error::Dimension("curves, grid and design grid must agree".into()));
    }
    let tail = (1.0 - level) / 2.0;
    let rows = ml
        .into_iter()
        .enumerate()
        .map(|(g, band)| {
            let column = sorted_finite(&curves.column(g).to_vec())?;
            if column.is_empty() {
                return Err(Error::EmptyInput);
            }
            Ok(BandRow {
                ml_fit: band.fit,
                ml_lower: band.lower,
                ml_upper: band.upper,
                bayes_median: quantile_sorted(&column, 0.5),
                bayes_lower: quantile_sorted(&column, tail),
                bayes_upper: quantile_sorted(&column, 1.0 - tail),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandTable {
        level,
        grid_columns,
        grid,
        rows,
    })
}
