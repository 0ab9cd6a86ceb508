//! Posterior distributions for GLM coefficients by Bayesian-bootstrap
//! reweighting.
//!
//! The sample is tabulated onto its distinct rows. Each posterior draw takes
//! Dirichlet(n₁, …, n_d) weights on those rows and refits the GLM by
//! weighted IWLS; the refitted coefficient vectors are the draws.
//!
//! The numeric core is generic over [`Scalar`] (`f64` or `f32`); the
//! aliases below fix the scalar for the common cases.
//!
//! ```
//! use bbglm::{io::bundled, glm::{parse_terms, Family, ModelSpec}, run_posterior, summaries::summarize};
//!
//! let mut ds = bundled::load("vaso").unwrap();
//! ds.derive("lv=log(volume)").unwrap();
//! ds.derive("lr=log(rate)").unwrap();
//! let spec = ModelSpec::new("y").with_terms(parse_terms("lv,lr").unwrap());
//! let draws = run_posterior::<f64>(&ds, &spec, Family::BinomialLogit, 200, 7).unwrap();
//! let table = summarize(&draws, 0.95).unwrap();
//! assert_eq!(table.params.len(), 3);
//! ```

pub mod elimination;
pub mod engine;
pub mod error;
pub mod glm;
pub mod io;
pub mod linalg;
pub mod rng;
mod scalar;
pub mod summaries;
pub mod support;

pub use engine::{run_posterior, run_posterior_grouped, run_posterior_on, PosteriorConfig, PosteriorDraws};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use support::SupportTable;

pub type FitResult64 = glm::FitResult<f64>;
pub type FitResult32 = glm::FitResult<f32>;
pub type PosteriorDraws64 = PosteriorDraws<f64>;
pub type PosteriorDraws32 = PosteriorDraws<f32>;
pub type SummaryTable64 = summaries::SummaryTable<f64>;
pub type SummaryTable32 = summaries::SummaryTable<f32>;
pub type BandTable64 = summaries::BandTable<f64>;
pub type EliminationTrace64 = elimination::EliminationTrace<f64>;
pub type Design64 = glm::Design<f64>;
pub type GroupedDesign64 = glm::GroupedDesign<f64>;
