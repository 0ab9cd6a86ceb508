//! Weighted GLM fitting: families, design matrices and the IWLS solver.

mod design;
mod family;
mod iwls;

pub use design::{
    build_design, build_design_keyed, parse_terms, Design, DesignColumn, DesignTemplate, Factor, GroupedDesign,
    ModelSpec, Term, TermPart, INTERCEPT,
};
pub use family::Family;
pub use iwls::{deviance, iwls_fit, weighted_score, FitResult, FitStatus, IwlsOptions, Start};

use crate::error::Result;
use crate::Scalar;

/// Unweighted (count-weighted) ML fit of a grouped design.
pub fn fit_ml<T: Scalar>(
    design: &GroupedDesign<T>,
    family: Family,
    start: Start<T>,
    opts: &IwlsOptions,
) -> Result<FitResult<T>> {
    iwls_fit(
        design.x.view(),
        design.y.view(),
        design.trials.as_ref().map(|t| t.view()),
        design.counts.view(),
        family,
        start,
        opts,
    )
}
