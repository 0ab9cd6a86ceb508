//! Backward elimination of single dummy columns by posterior |mean|/sd.

use crate::engine::{run_posterior_on, PosteriorConfig};
use crate::error::{Error, Result};
use crate::glm::{
    build_design_keyed, DesignTemplate, Family, IwlsOptions, ModelSpec, Start, Term, TermPart, INTERCEPT,
};
use crate::io::Dataset;
use crate::rng::derive_key;
use crate::summaries::{summarize, SummaryTable};
use crate::Scalar;
use ndarray::Array1;
use serde::Serialize;
use std::collections::HashSet;
use std::fmt;

/// Non-reference dummies of one factor under a short alias.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FactorDummies {
    pub alias: String,
    pub column: String,
    /// Non-reference levels in dummy order.
    pub levels: Vec<String>,
}

impl FactorDummies {
    /// Takes the first level of a categorical column as reference.
    pub fn from_column(ds: &Dataset, alias: &str, column: &str) -> Result<Self> {
        let levels = ds
            .column(column)?
            .levels()
            .ok_or_else(|| Error::InvalidArgument(format!("column `{column}` is not categorical")))?;
        if levels.len() < 2 {
            return Err(Error::SingleLevelFactor(column.to_string()));
        }
        Ok(Self {
            alias: alias.to_string(),
            column: column.to_string(),
            levels: levels[1..].to_vec(),
        })
    }

    /// `C` for a two-level factor, `A2, A3, ...` otherwise.
    pub fn dummy_names(&self) -> Vec<String> {
        if self.levels.len() == 1 {
            vec![self.alias.clone()]
        } else {
            (0..self.levels.len())
                .map(|k| format!("{}{}", self.alias, k + 2))
                .collect()
        }
    }
}

/// Expands each requested product of factor aliases into its dummy
/// columns, in the order given. A single alias is a main effect; `[C, A]`
/// yields `CA2, CA3, ...`.
pub fn expand_terms(factors: &[FactorDummies], products: &[Vec<String>]) -> Result<Vec<Term>> {
    let mut out: Vec<Term> = Vec::new();
    for product in products {
        let mut combos: Vec<(String, Vec<TermPart>)> = vec![(String::new(), Vec::new())];
        let mut used = HashSet::new();
        for alias in product {
            let f = factors
                .iter()
                .find(|f| &f.alias == alias)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown factor alias `{alias}`")))?;
            if !used.insert(alias) {
                return Err(Error::InvalidArgument(format!(
                    "factor `{alias}` repeated in a product"
                )));
            }
            let names = f.dummy_names();
            combos = combos
                .into_iter()
                .flat_map(|(label, parts)| {
                    names.iter().zip(&f.levels).map(move |(n, level)| {
                        let mut parts = parts.clone();
                        parts.push(TermPart::Level {
                            column: f.column.clone(),
                            level: level.clone(),
                        });
                        (format!("{label}{n}"), parts)
                    })
                })
                .collect();
        }
        for (label, parts) in combos {
            if !parts.is_empty() {
                out.push(Term::product(parts).labelled(label));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut seen = HashSet::new();
    for t in &out {
        let name = t.to_string();
        if !seen.insert(name.clone()) {
            return Err(Error::DuplicateName(name));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct EliminationConfig {
    pub threshold: f64,
    pub draws_per_step: usize,
    pub master_seed: u64,
    /// Credible level of the per-step summaries.
    pub level: f64,
    /// Columns never dropped besides the intercept.
    pub pinned: Vec<String>,
    pub iwls: IwlsOptions,
}

impl EliminationConfig {
    pub fn new(threshold: f64, draws_per_step: usize, master_seed: u64) -> Self {
        Self {
            threshold,
            draws_per_step,
            master_seed,
            level: 0.95,
            pinned: Vec::new(),
            iwls: IwlsOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Dropped<T> {
    pub name: String,
    pub ratio: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct EliminationStep<T> {
    /// 1-based step number.
    pub step: usize,
    /// Substream key of this step's draws.
    pub stream_key: u64,
    pub terms: Vec<String>,
    pub summary: SummaryTable<T>,
    pub excluded: usize,
    pub ml_deviance: T,
    /// Column removed after this step; `None` on the final step.
    pub dropped: Option<Dropped<T>>,
    /// Non-intercept columns left after this step.
    pub remaining: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EliminationTrace<T> {
    pub family: Family,
    pub threshold: f64,
    pub draws_per_step: usize,
    pub master_seed: u64,
    pub candidates: Vec<String>,
    pub steps: Vec<EliminationStep<T>>,
    pub final_spec: ModelSpec,
}

impl<T: Scalar> EliminationTrace<T> {
    /// Non-intercept columns of the final model.
    pub fn final_terms(&self) -> Vec<String> {
        self.final_spec.terms.iter().map(|t| t.to_string()).collect()
    }

    pub fn final_summary(&self) -> Option<&SummaryTable<T>> {
        self.steps.last().map(|s| &s.summary)
    }
}

/// A failed step, with every step completed before it.
#[derive(Debug)]
pub struct EliminationError<T> {
    pub trace: EliminationTrace<T>,
    pub reason: Error,
}

impl<T> fmt::Display for EliminationError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "elimination aborted after {} steps: {}",
            self.trace.steps.len(),
            self.reason
        )
    }
}

impl<T: fmt::Debug> std::error::Error for EliminationError<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.reason)
    }
}

/// Smallest ratio among droppable columns; ties go to the later column.
/// A column with zero posterior sd counts as infinitely far from zero.
fn weakest<'a, T: Scalar>(summary: &'a SummaryTable<T>, pinned: &[String]) -> Option<(&'a str, T)> {
    let mut best: Option<(&str, T)> = None;
    for p in &summary.params {
        if p.name == INTERCEPT || pinned.contains(&p.name) {
            continue;
        }
        let r = p.ratio.unwrap_or_else(T::infinity);
        if best.is_none_or(|(_, b)| r <= b) {
            best = Some((&p.name, r));
        }
    }
    best
}

/// Repeatedly runs the posterior, dropping the droppable column with the
/// smallest |pmean|/psd until every such ratio reaches `threshold`.
///
/// Each term of `initial_spec` is first split into its single design
/// columns. Step `s` draws from substream key `derive_key(master_seed, s)`
/// and its ML fit starts from the previous step's fitted means. The tie key
/// stays that of the initial model so the support is the same at every step.
pub fn backward_eliminate<T: Scalar>(
    ds: &Dataset,
    initial_spec: &ModelSpec,
    family: Family,
    config: &EliminationConfig,
) -> std::result::Result<EliminationTrace<T>, EliminationError<T>> {
    let mut trace = EliminationTrace {
        family,
        threshold: config.threshold,
        draws_per_step: config.draws_per_step,
        master_seed: config.master_seed,
        candidates: Vec::new(),
        steps: Vec::new(),
        final_spec: initial_spec.clone(),
    };
    if !(config.threshold >= 0.0) {
        return Err(EliminationError {
            trace,
            reason: Error::InvalidArgument("threshold must be non-negative".into()),
        });
    }
    let template = match DesignTemplate::from_spec(ds, initial_spec) {
        Ok(t) => t,
        Err(reason) => return Err(EliminationError { trace, reason }),
    };
    let key_columns = initial_spec.source_columns();
    let mut spec = initial_spec.clone().with_terms(template.split_terms());
    trace.candidates = spec.terms.iter().map(|t| t.to_string()).collect();
    trace.final_spec = spec.clone();
    let mut previous_mu: Option<Array1<T>> = None;

    for step in 1.. {
        let stream_key = derive_key(config.master_seed, step as u64);
        let outcome = (|| -> Result<_> {
            let design = build_design_keyed::<T>(ds, &spec, &key_columns)?.grouped()?;
            let posterior = PosteriorConfig {
                stream_key: Some(stream_key),
                iwls: config.iwls.clone(),
                ..PosteriorConfig::new(config.draws_per_step, config.master_seed)
            };
            let start = match &previous_mu {
                Some(mu) => Start::Mu(mu.view()),
                None => Start::Default,
            };
            let draws = run_posterior_on(&design, family, &posterior, start)?;
            let summary = summarize(&draws, config.level)?;
            Ok((draws, summary))
        })();
        let (draws, summary) = match outcome {
            Ok(v) => v,
            Err(reason) => return Err(EliminationError { trace, reason }),
        };

        let dropped = weakest(&summary, &config.pinned)
            .filter(|&(_, r)| r.as_f64() < config.threshold)
            .map(|(name, ratio)| Dropped {
                name: name.to_string(),
                ratio,
            });
        if let Some(d) = &dropped {
            spec.terms.retain(|t| t.to_string() != d.name);
        }
        trace.steps.push(EliminationStep {
            step,
            stream_key,
            terms: draws.names.clone(),
            excluded: draws.excluded.len(),
            ml_deviance: draws.ml.deviance,
            remaining: spec.terms.len(),
            dropped,
            summary,
        });
        trace.final_spec = spec.clone();
        if trace.steps.last().is_some_and(|s| s.dropped.is_none()) {
            break;
        }
        previous_mu = Some(draws.ml.mu);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::parse_terms;
    use crate::io::SchemaHints;

    fn two_factor() -> Dataset {
        Dataset::from_csv_str("y,F,G\n1,a,u\n2,b,u\n3,a,v\n4,b,v\n", "fg", &SchemaHints::default()).unwrap()
    }

    fn products(list: &[&[&str]]) -> Vec<Vec<String>> {
        list.iter().map(|p| p.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn two_by_two_expansion() {
        let ds = two_factor();
        let f = FactorDummies::from_column(&ds, "F", "F").unwrap();
        let g = FactorDummies::from_column(&ds, "G", "G").unwrap();
        let terms = expand_terms(&[f, g], &products(&[&["F"], &["G"], &["F", "G"]])).unwrap();
        let names: Vec<String> = terms.iter().map(|t| t.to_string()).collect();
        assert_eq!(names, ["F", "G", "FG"]);
        let spec = ModelSpec::new("y").with_terms(terms);
        let x = DesignTemplate::from_spec(&ds, &spec)
            .unwrap()
            .evaluate::<f64>(&ds)
            .unwrap();
        // rows (a,u) (b,u) (a,v) (b,v)
        let expected = [
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 1.0, 0.0],
            [1.0, 1.0, 1.0, 1.0],
        ];
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(x.row(i).to_vec(), row.to_vec());
        }
    }

    #[test]
    fn multi_level_names() {
        let f = FactorDummies {
            alias: "A".into(),
            column: "Age".into(),
            levels: vec!["F1".into(), "F2".into(), "F3".into()],
        };
        let c = FactorDummies {
            alias: "C".into(),
            column: "Eth".into(),
            levels: vec!["N".into()],
        };
        let terms = expand_terms(&[c, f], &products(&[&["A"], &["C", "A"]])).unwrap();
        let names: Vec<String> = terms.iter().map(|t| t.to_string()).collect();
        assert_eq!(names, ["A2", "A3", "A4", "CA2", "CA3", "CA4"]);
    }

    #[test]
    fn expansion_errors() {
        let ds = two_factor();
        let f = FactorDummies::from_column(&ds, "F", "F").unwrap();
        assert!(matches!(
            expand_terms(std::slice::from_ref(&f), &[]),
            Err(Error::EmptyCandidates)
        ));
        assert!(matches!(
            expand_terms(std::slice::from_ref(&f), &products(&[&["F"], &["F"]])),
            Err(Error::DuplicateName(_))
        ));
        assert!(expand_terms(&[f], &products(&[&["Z"]])).is_err());
        assert!(FactorDummies::from_column(&ds, "y", "y").is_err());
    }

    fn poisson_data() -> Dataset {
        let mut text = String::from("y,x,z\n");
        for i in 0..60 {
            let x = (i % 10) as f64 / 3.0;
            let z = ((i * 7) % 11) as f64 / 5.0 - 1.0;
            let y = ((0.4 + 0.5 * x).exp() + (i % 3) as f64 - 1.0).round().max(0.0);
            text.push_str(&format!("{y},{x},{z}\n"));
        }
        Dataset::from_csv_str(&text, "toy", &SchemaHints::default()).unwrap()
    }

    #[test]
    fn zero_threshold_keeps_everything() {
        let ds = poisson_data();
        let spec = ModelSpec::new("y").with_terms(parse_terms("x,z").unwrap());
        let trace: EliminationTrace<f64> =
            backward_eliminate(&ds, &spec, Family::PoissonLog, &EliminationConfig::new(0.0, 50, 3)).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.final_terms(), ["x", "z"]);
    }

    #[test]
    fn trace_is_reproducible_and_final_ratios_clear_threshold() {
        let ds = poisson_data();
        let spec = ModelSpec::new("y").with_terms(parse_terms("x,z").unwrap());
        let config = EliminationConfig::new(2.0, 100, 17);
        let a: EliminationTrace<f64> = backward_eliminate(&ds, &spec, Family::PoissonLog, &config).unwrap();
        let b: EliminationTrace<f64> = backward_eliminate(&ds, &spec, Family::PoissonLog, &config).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for p in &a.final_summary().unwrap().params {
            if p.name != INTERCEPT {
                assert!(p.ratio.unwrap() >= 2.0);
            }
        }
        for w in a.steps.windows(2) {
            assert_eq!(w[1].terms.len() + 1, w[0].terms.len());
        }
    }

    #[test]
    fn pinned_columns_survive() {
        let ds = poisson_data();
        let spec = ModelSpec::new("y").with_terms(parse_terms("x,z").unwrap());
        let mut config = EliminationConfig::new(1e9, 50, 5);
        config.pinned = vec!["z".into()];
        let trace: EliminationTrace<f64> = backward_eliminate(&ds, &spec, Family::PoissonLog, &config).unwrap();
        assert_eq!(trace.final_terms(), ["z"]);
    }

    #[test]
    fn failing_step_returns_partial_trace() {
        let ds = poisson_data();
        let spec = ModelSpec::new("y").with_terms(parse_terms("x,z").unwrap());
        let config = EliminationConfig::new(2.0, 5, 5);
        let err = backward_eliminate::<f64>(&ds, &spec, Family::PoissonLog, &config).unwrap_err();
        assert!(matches!(err.reason, Error::TooFewDraws(5)));
        assert!(err.trace.steps.is_empty());
    }
}
