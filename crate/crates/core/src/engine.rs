//! Bayesian-bootstrap posterior for GLM coefficients.
//!
//! Draw `m` takes a Dirichlet weight vector on the support from substream
//! `(key, m)`, refits the GLM by IWLS with those weights multiplying the
//! iterative weights, and records the converged coefficients. Draws run in
//! parallel; output is indexed by `m`, so results do not depend on the
//! thread count.

use crate::error::{Error, Result};
use crate::glm::{fit_ml, iwls_fit, Family, FitResult, FitStatus, GroupedDesign, IwlsOptions, ModelSpec, Start};
use crate::io::Dataset;
use crate::rng::Substream;
use crate::support::{Normalization, WeightDraw, WeightScheme};
use crate::Scalar;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

pub const DEFAULT_SUMMARY_DRAWS: usize = 1_000;
pub const DEFAULT_INTERVAL_DRAWS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct PosteriorConfig {
    pub draws: usize,
    pub master_seed: u64,
    /// Substream key; defaults to `master_seed`.
    pub stream_key: Option<u64>,
    pub normalization: Normalization,
    pub scheme: WeightScheme,
    /// Fraction of failed draws above which the run is rejected.
    pub max_excluded_fraction: f64,
    pub accept_exclusions: bool,
    pub iwls: IwlsOptions,
}

impl PosteriorConfig {
    pub fn new(draws: usize, master_seed: u64) -> Self {
        Self {
            draws,
            master_seed,
            stream_key: None,
            normalization: Normalization::SumToN,
            scheme: WeightScheme::BayesianBootstrap,
            max_excluded_fraction: 0.01,
            accept_exclusions: false,
            iwls: IwlsOptions::default(),
        }
    }

    pub fn key(&self) -> u64 {
        self.stream_key.unwrap_or(self.master_seed)
    }

    pub fn substream(&self, m: usize) -> Substream {
        Substream::new(self.key(), m as u64)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PosteriorDraws<T> {
    pub names: Vec<String>,
    pub family: Family,
    /// Retained draws (M_effective × p) in draw order.
    pub beta: Array2<T>,
    /// 1-based draw index `m` of each retained row.
    pub draw_index: Vec<usize>,
    /// Status of every requested draw, indexed by `m − 1`.
    pub statuses: Vec<FitStatus>,
    pub iterations: Vec<usize>,
    /// 1-based indices of excluded draws.
    pub excluded: Vec<usize>,
    pub requested: usize,
    pub master_seed: u64,
    pub stream_key: u64,
    pub spec_hash: String,
    pub normalization: Normalization,
    pub scheme: WeightScheme,
    /// The count-weighted ML fit every draw warm-starts from.
    pub ml: FitResult<T>,
}

impl<T: Scalar> PosteriorDraws<T> {
    pub fn effective(&self) -> usize {
        self.beta.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.beta.ncols()
    }

    pub fn column(&self, k: usize) -> Vec<T> {
        self.beta.column(k).to_vec()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<T>> {
        let k = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        Ok(self.column(k))
    }

    /// `c′β` for every retained draw.
    pub fn functional_draws(&self, contrast: ArrayView1<T>) -> Result<Vec<T>> {
        functional_draws(self.beta.view(), contrast)
    }

    /// Fitted mean curves `g⁻¹(x_g′β)`: one row per draw, one column per grid row.
    pub fn curve_draws(&self, grid: ArrayView2<T>) -> Result<Array2<T>> {
        curve_draws(self.beta.view(), grid, self.family)
    }

    pub fn status_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for s in &self.statuses {
            *out.entry(s.to_string()).or_insert(0) += 1;
        }
        out
    }
}

pub fn functional_draws<T: Scalar>(beta: ArrayView2<T>, contrast: ArrayView1<T>) -> Result<Vec<T>> {
    if contrast.len() != beta.ncols() {
        return Err(Error::Dimension(format!(
            "contrast has {} entries for {} coefficients",
            contrast.len(),
            beta.ncols()
        )));
    }
    Ok(beta.dot(&contrast).to_vec())
}

pub fn curve_draws<T: Scalar>(beta: ArrayView2<T>, grid: ArrayView2<T>, family: Family) -> Result<Array2<T>> {
    if grid.ncols() != beta.ncols() {
        return Err(Error::Dimension(format!(
            "grid has {} columns for {} coefficients",
            grid.ncols(),
            beta.ncols()
        )));
    }
    Ok(beta.dot(&grid.t()).mapv(|eta| family.inv_link(eta)))
}

/// Coefficient vector for a linear combination such as `lv-lr` or
/// `0.5*a+b`, over the given coefficient names.
pub fn parse_contrast<T: Scalar>(names: &[String], text: &str) -> Result<Array1<T>> {
    let mut c = Array1::zeros(names.len());
    let src: String = text.chars().filter(|ch| !ch.is_whitespace()).collect();
    if src.is_empty() {
        return Err(Error::Parse("empty contrast".into()));
    }
    let mut terms = Vec::new();
    let mut start = 0;
    for (i, ch) in src.char_indices() {
        let so_far = src[start..i].trim_start_matches(['+', '-']);
        let mantissa = so_far.strip_suffix(['e', 'E']).unwrap_or("");
        let in_exponent = !mantissa.is_empty() && mantissa.chars().all(|c| c.is_ascii_digit() || c == '.');
        if (ch == '+' || ch == '-') && i > start && !in_exponent && !so_far.ends_with('*') {
            terms.push(&src[start..i]);
            start = i;
        }
    }
    terms.push(&src[start..]);
    for term in terms {
        let (sign, body) = match term.as_bytes().first() {
            Some(b'-') => (-1.0, &term[1..]),
            Some(b'+') => (1.0, &term[1..]),
            _ => (1.0, term),
        };
        let (coef, name) = match body.split_once('*') {
            Some((k, n)) => (
                k.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad multiplier `{k}` in contrast `{text}`")))?,
                n,
            ),
            None => (1.0, body),
        };
        let k = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        c[k] = c[k] + T::lit(sign * coef);
    }
    Ok(c)
}

/// Sets the size of the global worker pool used for draws. Only the first
/// call in a process has an effect.
pub fn init_thread_pool(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Identifier binding draws to the support, model columns and family.
pub fn spec_hash<T: Scalar>(design: &GroupedDesign<T>, family: Family) -> String {
    let mut h = Sha256::new();
    h.update(family.name().as_bytes());
    for name in design.names() {
        h.update([0x1f]);
        h.update(name.as_bytes());
    }
    for k in &design.key_columns {
        h.update([0x1e]);
        h.update(k.as_bytes());
    }
    for (row, count) in design.support.rows().iter().zip(design.support.counts()) {
        h.update([0x1d]);
        for f in row {
            h.update(f.as_bytes());
            h.update([0x1f]);
        }
        h.update(count.to_le_bytes());
    }
    hex::encode(&h.finalize()[..16])
}

/// Weight vector used for draw `m` (1-based).
pub fn draw_weights<T: Scalar>(design: &GroupedDesign<T>, config: &PosteriorConfig, m: usize) -> WeightDraw<T> {
    config
        .scheme
        .draw(&design.support, config.substream(m), config.normalization)
}

struct DrawOutcome<T> {
    beta: Array1<T>,
    status: FitStatus,
    iterations: usize,
}

/// Runs the posterior on a grouped design. `ml_start` warm-starts the
/// count-weighted ML fit (e.g. with fitted means of a previous model).
pub fn run_posterior_on<T: Scalar>(
    design: &GroupedDesign<T>,
    family: Family,
    config: &PosteriorConfig,
    ml_start: Start<T>,
) -> Result<PosteriorDraws<T>> {
    if config.draws == 0 {
        return Err(Error::InvalidArgument("at least one draw is required".into()));
    }
    let ml = fit_ml(design, family, ml_start, &config.iwls)?;
    if !ml.is_ok() {
        return Err(Error::FitFailed(ml.status));
    }
    let trials = design.trials.as_ref().map(|t| t.view());

    let outcomes: Vec<DrawOutcome<T>> = (1..=config.draws)
        .into_par_iter()
        .map(|m| {
            let w = draw_weights(design, config, m);
            let w = Array1::from(w.w);
            let fit = iwls_fit(
                design.x.view(),
                design.y.view(),
                trials,
                w.view(),
                family,
                Start::Mu(ml.mu.view()),
                &config.iwls,
            );
            match fit {
                Ok(f) => DrawOutcome {
                    status: f.status,
                    iterations: f.iterations,
                    beta: f.beta,
                },
                // Inputs were validated by the ML fit; only weights differ.
                Err(_) => DrawOutcome {
                    beta: Array1::from_elem(design.n_params(), T::nan()),
                    status: FitStatus::Diverged,
                    iterations: 0,
                },
            }
        })
        .collect();

    let mut kept = Vec::with_capacity(outcomes.len());
    let mut draw_index = Vec::with_capacity(outcomes.len());
    let mut excluded = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        if o.status == FitStatus::Ok && o.beta.iter().all(|v| v.is_finite()) {
            kept.push(o.beta.view());
            draw_index.push(i + 1);
        } else {
            excluded.push(i + 1);
        }
    }
    let statuses: Vec<FitStatus> = outcomes.iter().map(|o| o.status).collect();
    if !excluded.is_empty()
        && excluded.len() as f64 > config.max_excluded_fraction * config.draws as f64
        && !config.accept_exclusions
    {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for &m in &excluded {
            *counts.entry(statuses[m - 1].to_string()).or_insert(0) += 1;
        }
        let detail = counts
            .iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::UnstablePosterior {
            failed: excluded.len(),
            requested: config.draws,
            detail,
        });
    }
    let beta = if kept.is_empty() {
        Array2::zeros((0, design.n_params()))
    } else {
        ndarray::stack(Axis(0), &kept).expect("equal-length coefficient vectors")
    };
    Ok(PosteriorDraws {
        names: design.names(),
        family,
        beta,
        draw_index,
        iterations: outcomes.iter().map(|o| o.iterations).collect(),
        statuses,
        excluded,
        requested: config.draws,
        master_seed: config.master_seed,
        stream_key: config.key(),
        spec_hash: spec_hash(design, family),
        normalization: config.normalization,
        scheme: config.scheme,
        ml,
    })
}

pub fn run_posterior_grouped<T: Scalar>(
    design: &GroupedDesign<T>,
    family: Family,
    config: &PosteriorConfig,
) -> Result<PosteriorDraws<T>> {
    run_posterior_on(design, family, config, Start::Default)
}

/// Builds the grouped design for `spec` and runs `draws` weighted refits.
pub fn run_posterior<T: Scalar>(
    ds: &Dataset,
    spec: &ModelSpec,
    family: Family,
    draws: usize,
    master_seed: u64,
) -> Result<PosteriorDraws<T>> {
    let design = GroupedDesign::from_dataset(ds, spec)?;
    let config = PosteriorConfig {
        iwls: IwlsOptions::for_scalar::<T>(),
        ..PosteriorConfig::new(draws, master_seed)
    };
    run_posterior_grouped(&design, family, &config)
}
