//! Multinomial support of a sample and weight draws from its Dirichlet posterior.
//!
//! A sample is collapsed onto its distinct joint records (compared as raw
//! text), each carrying its multiplicity `n_j`. Under the Haldane prior the
//! posterior over the support-point probabilities is `Dirichlet(n_1, ..., n_d)`
//! on the observed support only; unobserved values carry zero mass and never
//! appear.

use crate::error::{Error, Result};
use crate::rng::Substream;
use crate::Scalar;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SupportTable {
    rows: Vec<Vec<String>>,
    counts: Vec<usize>,
    index_map: Vec<usize>,
}

impl SupportTable {
    /// Groups records by exact field equality, keeping first-appearance order.
    pub fn tabulate<R, S>(records: &[R]) -> Result<Self>
    where
        R: AsRef<[S]>,
        S: AsRef<str>,
    {
        let first = records.first().ok_or(Error::EmptyInput)?;
        let arity = first.as_ref().len();
        let mut lookup: HashMap<Vec<&str>, usize> = HashMap::with_capacity(records.len());
        let mut rows = Vec::new();
        let mut counts = Vec::new();
        let mut index_map = Vec::with_capacity(records.len());

        for (i, record) in records.iter().enumerate() {
            let fields = record.as_ref();
            if fields.len() != arity {
                return Err(Error::RaggedRecord {
                    record: i,
                    found: fields.len(),
                    expected: arity,
                });
            }
            let key: Vec<&str> = fields.iter().map(|f| f.as_ref()).collect();
            let j = match lookup.get(&key) {
                Some(&j) => {
                    counts[j] += 1;
                    j
                }
                None => {
                    let j = rows.len();
                    rows.push(key.iter().map(|s| s.to_string()).collect());
                    counts.push(1);
                    lookup.insert(key, j);
                    j
                }
            };
            index_map.push(j);
        }
        Ok(Self {
            rows,
            counts,
            index_map,
        })
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Distinct row for each original observation.
    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    /// Number of distinct support points.
    pub fn d(&self) -> usize {
        self.rows.len()
    }

    /// Sample size.
    pub fn n(&self) -> usize {
        self.index_map.len()
    }

    /// One record per original observation, in original order.
    pub fn expand(&self) -> Vec<Vec<String>> {
        self.index_map.iter().map(|&j| self.rows[j].clone()).collect()
    }

    pub fn sample_weights<T: Scalar>(&self, substream: Substream, normalization: Normalization) -> WeightDraw<T> {
        let mut rng = substream.rng();
        let total = normalization.total(self.n());
        let (w, redraws) = dirichlet_weights(&self.counts, total, &mut rng);
        WeightDraw {
            w: w.into_iter().map(T::lit).collect(),
            normalization,
            total: T::lit(total),
            draw_index: substream.stream,
            substream,
            redraws,
        }
    }

    /// Weights proportional to the multiplicities: the ML weighting.
    pub fn equal_weights<T: Scalar>(&self, substream: Substream, normalization: Normalization) -> WeightDraw<T> {
        let total = normalization.total(self.n());
        let n = self.n() as f64;
        WeightDraw {
            w: self.counts.iter().map(|&c| T::lit(c as f64 / n * total)).collect(),
            normalization,
            total: T::lit(total),
            draw_index: substream.stream,
            substream,
            redraws: 0,
        }
    }
}

/// Total the posterior weights are scaled to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    SumToOne,
    #[default]
    SumToN,
}

impl Normalization {
    pub fn total(self, n: usize) -> f64 {
        match self {
            Normalization::SumToOne => 1.0,
            Normalization::SumToN => n as f64,
        }
    }
}

/// How the per-draw prior weights are generated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    /// Dirichlet(n_1, ..., n_d) posterior draws.
    #[default]
    BayesianBootstrap,
    /// Every draw equals the multiplicities (reproduces the ML fit).
    Equal,
}

impl WeightScheme {
    pub fn draw<T: Scalar>(
        self,
        table: &SupportTable,
        substream: Substream,
        normalization: Normalization,
    ) -> WeightDraw<T> {
        match self {
            WeightScheme::BayesianBootstrap => table.sample_weights(substream, normalization),
            WeightScheme::Equal => table.equal_weights(substream, normalization),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightDraw<T> {
    pub w: Vec<T>,
    pub normalization: Normalization,
    pub total: T,
    pub draw_index: u64,
    pub substream: Substream,
    /// Gamma components that underflowed to zero and were redrawn.
    pub redraws: u32,
}

/// `w_j = g_j / Σg · total` with independent `g_j ~ Gamma(n_j, 1)`.
pub fn dirichlet_weights<R: Rng + ?Sized>(counts: &[usize], total: f64, rng: &mut R) -> (Vec<f64>, u32) {
    let mut redraws = 0;
    let gammas: Vec<f64> = counts
        .iter()
        .map(|&n| {
            let dist = Gamma::new(n as f64, 1.0).expect("positive integer shape");
            loop {
                let g = dist.sample(rng);
                if g > 0.0 {
                    break g;
                }
                redraws += 1;
            }
        })
        .collect();
    let sum: f64 = gammas.iter().sum();
    (gammas.into_iter().map(|g| g / sum * total).collect(), redraws)
}
