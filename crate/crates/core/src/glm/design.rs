//! Model terms and design matrices.
//!
//! A term is a product of parts; each part is a numeric column, a whole
//! factor (expanded to 0/1 dummies for every level but the first-appearing
//! one), or a single factor-level dummy. `x`, `f`, `f:x`, `f=b` and `f=b:g=c`
//! are the textual forms accepted by [`Term::from_str`].

use crate::error::{Error, Result};
use crate::io::{ColumnData, Dataset};
use crate::support::SupportTable;
use crate::Scalar;
use ndarray::{Array1, Array2};
use serde::Serialize;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermPart {
    /// A numeric column, or every non-reference dummy of a categorical one.
    Column(String),
    Level {
        column: String,
        level: String,
    },
}

impl TermPart {
    pub fn column(&self) -> &str {
        match self {
            TermPart::Column(c) | TermPart::Level { column: c, .. } => c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Term {
    pub parts: Vec<TermPart>,
    /// Name used for the design column when the term expands to exactly one.
    pub label: Option<String>,
}

impl Term {
    pub fn column(name: &str) -> Self {
        Self {
            parts: vec![TermPart::Column(name.to_string())],
            label: None,
        }
    }

    pub fn level(column: &str, level: &str) -> Self {
        Self {
            parts: vec![TermPart::Level {
                column: column.to_string(),
                level: level.to_string(),
            }],
            label: None,
        }
    }

    pub fn product(parts: Vec<TermPart>) -> Self {
        Self { parts, label: None }
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(':')
            .map(|p| {
                let p = p.trim();
                if p.is_empty() {
                    return Err(Error::Parse(format!("empty part in term `{s}`")));
                }
                Ok(match p.split_once('=') {
                    Some((c, l)) => TermPart::Level {
                        column: c.trim().to_string(),
                        level: l.trim().to_string(),
                    },
                    None => TermPart::Column(p.to_string()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Term::product(parts))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = &self.label {
            return f.write_str(l);
        }
        let text: Vec<String> = self
            .parts
            .iter()
            .map(|p| match p {
                TermPart::Column(c) => c.clone(),
                TermPart::Level { column, level } => format!("{column}={level}"),
            })
            .collect();
        f.write_str(&text.join(":"))
    }
}

/// Comma-separated term list, e.g. `lv,lr` or `f,x,f:x`.
pub fn parse_terms(list: &str) -> Result<Vec<Term>> {
    list.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(Term::from_str)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSpec {
    pub response: String,
    /// Binomial denominators; absent means ungrouped 0/1 responses.
    pub trials: Option<String>,
    pub terms: Vec<Term>,
    pub include_intercept: bool,
}

impl ModelSpec {
    pub fn new(response: impl Into<String>) -> Self {
        Self {
            response: response.into(),
            trials: None,
            terms: Vec::new(),
            include_intercept: true,
        }
    }

    pub fn with_terms(mut self, terms: Vec<Term>) -> Self {
        self.terms = terms;
        self
    }

    pub fn with_trials(mut self, trials: impl Into<String>) -> Self {
        self.trials = Some(trials.into());
        self
    }

    pub fn without_intercept(mut self) -> Self {
        self.include_intercept = false;
        self
    }

    /// Dataset columns the model reads, response first, without repeats.
    pub fn source_columns(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |c: &str| {
            if !out.iter().any(|o| o == c) {
                out.push(c.to_string());
            }
        };
        push(&self.response);
        if let Some(t) = &self.trials {
            push(t);
        }
        for term in &self.terms {
            for part in &term.parts {
                push(part.column());
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Factor {
    Numeric(String),
    Indicator { column: String, level: String },
}

/// One design column: the product of its factors (empty product = intercept).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DesignColumn {
    pub name: String,
    pub factors: Vec<Factor>,
}

/// Resolved column recipes of a model; evaluates on any dataset with the
/// same source columns (used for prediction grids).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DesignTemplate {
    pub columns: Vec<DesignColumn>,
}

fn expand_part(ds: &Dataset, part: &TermPart) -> Result<Vec<(String, Factor)>> {
    let col = ds.column(part.column())?;
    match (part, &col.data) {
        (TermPart::Column(name), ColumnData::Numeric(_)) => Ok(vec![(name.clone(), Factor::Numeric(name.clone()))]),
        (TermPart::Column(name), ColumnData::Categorical { levels, .. }) => {
            if levels.len() < 2 {
                return Err(Error::SingleLevelFactor(name.clone()));
            }
            Ok(levels[1..]
                .iter()
                .map(|l| {
                    (
                        format!("{name}{l}"),
                        Factor::Indicator {
                            column: name.clone(),
                            level: l.clone(),
                        },
                    )
                })
                .collect())
        }
        (TermPart::Level { column, level }, _) => {
            if !col.raw.iter().any(|r| r == level) {
                return Err(Error::UnknownLevel {
                    column: column.clone(),
                    level: level.clone(),
                });
            }
            Ok(vec![(
                format!("{column}={level}"),
                Factor::Indicator {
                    column: column.clone(),
                    level: level.clone(),
                },
            )])
        }
    }
}

impl DesignTemplate {
    pub fn from_spec(ds: &Dataset, spec: &ModelSpec) -> Result<Self> {
        let mut columns = Vec::new();
        if spec.include_intercept {
            columns.push(DesignColumn {
                name: INTERCEPT.to_string(),
                factors: Vec::new(),
            });
        }
        for term in &spec.terms {
            let mut expanded: Vec<(Vec<String>, Vec<Factor>)> = vec![(Vec::new(), Vec::new())];
            for part in &term.parts {
                let options = expand_part(ds, part)?;
                expanded = expanded
                    .into_iter()
                    .flat_map(|(names, factors)| {
                        options.iter().map(move |(n, f)| {
                            let mut names = names.clone();
                            let mut factors = factors.clone();
                            names.push(n.clone());
                            factors.push(f.clone());
                            (names, factors)
                        })
                    })
                    .collect();
            }
            let single = expanded.len() == 1;
            for (names, factors) in expanded {
                let name = match (&term.label, single) {
                    (Some(l), true) => l.clone(),
                    _ => names.join(":"),
                };
                columns.push(DesignColumn { name, factors });
            }
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateName(c.name.clone()));
            }
        }
        Ok(Self { columns })
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn has_intercept(&self) -> bool {
        self.columns.first().is_some_and(|c| c.factors.is_empty())
    }

    /// Evaluates the columns on every row of `ds`.
    pub fn evaluate<T: Scalar>(&self, ds: &Dataset) -> Result<Array2<T>> {
        let n = ds.nrows();
        let mut x = Array2::<T>::zeros((n, self.columns.len()));
        for (j, col) in self.columns.iter().enumerate() {
            let mut values = vec![1.0f64; n];
            for f in &col.factors {
                match f {
                    Factor::Numeric(name) => {
                        let v = ds.numeric(name)?;
                        values.iter_mut().zip(v).for_each(|(a, b)| *a *= b);
                    }
                    Factor::Indicator { column, level } => {
                        let raw = &ds.column(column)?.raw;
                        values
                            .iter_mut()
                            .zip(raw)
                            .for_each(|(a, r)| *a *= if r == level { 1.0 } else { 0.0 });
                    }
                }
            }
            for (i, v) in values.into_iter().enumerate() {
                x[[i, j]] = T::lit(v);
            }
        }
        Ok(x)
    }

    /// Each non-intercept design column as a single-column term.
    pub fn split_terms(&self) -> Vec<Term> {
        self.columns
            .iter()
            .filter(|c| !c.factors.is_empty())
            .map(|c| {
                let parts = c
                    .factors
                    .iter()
                    .map(|f| match f {
                        Factor::Numeric(n) => TermPart::Column(n.clone()),
                        Factor::Indicator { column, level } => TermPart::Level {
                            column: column.clone(),
                            level: level.clone(),
                        },
                    })
                    .collect();
                Term::product(parts).labelled(c.name.clone())
            })
            .collect()
    }
}

/// Observation-level design: one row per record of the dataset.
#[derive(Clone, Debug)]
pub struct Design<T> {
    pub x: Array2<T>,
    pub y: Array1<T>,
    pub trials: Option<Array1<T>>,
    pub template: DesignTemplate,
    pub spec: ModelSpec,
    /// Raw tie key of each observation (text of the key columns).
    pub keys: Vec<Vec<String>>,
    pub key_columns: Vec<String>,
}

/// Builds the n×p design, response and trials for `spec`; ties are keyed
/// on the model's source columns.
pub fn build_design<T: Scalar>(ds: &Dataset, spec: &ModelSpec) -> Result<Design<T>> {
    build_design_keyed(ds, spec, &spec.source_columns())
}

/// As [`build_design`], with explicit tie-key columns.
pub fn build_design_keyed<T: Scalar>(ds: &Dataset, spec: &ModelSpec, key_columns: &[String]) -> Result<Design<T>> {
    if ds.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let template = DesignTemplate::from_spec(ds, spec)?;
    if template.columns.is_empty() {
        return Err(Error::InvalidArgument("model has no columns".into()));
    }
    let x: Array2<T> = template.evaluate(ds)?;
    for (j, col) in template.columns.iter().enumerate() {
        if x.column(j).iter().all(|v| *v == T::zero()) {
            return Err(Error::DegenerateColumn(col.name.clone()));
        }
    }
    let y = Array1::from_iter(ds.numeric(&spec.response)?.iter().map(|&v| T::lit(v)));
    let trials = match &spec.trials {
        Some(t) => Some(Array1::from_iter(ds.numeric(t)?.iter().map(|&v| T::lit(v)))),
        None => None,
    };
    let names: Vec<&str> = key_columns.iter().map(String::as_str).collect();
    let keys = ds
        .raw_records(&names)?
        .into_iter()
        .map(|r| r.into_iter().map(str::to_string).collect())
        .collect();
    Ok(Design {
        x,
        y,
        trials,
        template,
        spec: spec.clone(),
        keys,
        key_columns: key_columns.to_vec(),
    })
}

impl<T: Scalar> Design<T> {
    pub fn names(&self) -> Vec<String> {
        self.template.names()
    }

    /// Collapses observations onto distinct tie keys, with multiplicities.
    pub fn grouped(&self) -> Result<GroupedDesign<T>> {
        let support = SupportTable::tabulate(&self.keys)?;
        let d = support.d();
        let mut first = vec![usize::MAX; d];
        for (i, &j) in support.index_map().iter().enumerate() {
            if first[j] == usize::MAX {
                first[j] = i;
            }
        }
        let x = self.x.select(ndarray::Axis(0), &first);
        let y = Array1::from_iter(first.iter().map(|&i| self.y[i]));
        let trials = self
            .trials
            .as_ref()
            .map(|t| Array1::from_iter(first.iter().map(|&i| t[i])));
        let counts = Array1::from_iter(support.counts().iter().map(|&c| T::lit(c as f64)));
        Ok(GroupedDesign {
            x,
            y,
            trials,
            counts,
            support,
            template: self.template.clone(),
            spec: self.spec.clone(),
            key_columns: self.key_columns.clone(),
        })
    }
}

/// Design on the distinct support rows (d × p) with their counts.
#[derive(Clone, Debug)]
pub struct GroupedDesign<T> {
    pub x: Array2<T>,
    pub y: Array1<T>,
    pub trials: Option<Array1<T>>,
    pub counts: Array1<T>,
    pub support: SupportTable,
    pub template: DesignTemplate,
    pub spec: ModelSpec,
    pub key_columns: Vec<String>,
}

impl<T: Scalar> GroupedDesign<T> {
    pub fn from_dataset(ds: &Dataset, spec: &ModelSpec) -> Result<Self> {
        build_design(ds, spec)?.grouped()
    }

    pub fn names(&self) -> Vec<String> {
        self.template.names()
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::SchemaHints;

    fn toy() -> Dataset {
        Dataset::from_csv_str(
            "y,f,x\n1,a,0.5\n0,b,1.5\n1,a,2\n0,b,-1\n",
            "toy",
            &SchemaHints::default(),
        )
        .unwrap()
    }

    #[test]
    fn factor_numeric_product_expansion() {
        let spec = ModelSpec::new("y").with_terms(parse_terms("f,x,f:x").unwrap());
        let d: Design<f64> = build_design(&toy(), &spec).unwrap();
        assert_eq!(d.names(), vec![INTERCEPT, "fb", "x", "fb:x"]);
        // Hand expansion with `a` (first seen) as reference.
        let want = [
            [1.0, 0.0, 0.5, 0.0],
            [1.0, 1.0, 1.5, 1.5],
            [1.0, 0.0, 2.0, 0.0],
            [1.0, 1.0, -1.0, -1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d.x[[i, j]], want[i][j]);
            }
        }
    }

    #[test]
    fn intercept_only() {
        let d: Design<f64> = build_design(&toy(), &ModelSpec::new("y")).unwrap();
        assert_eq!(d.x.dim(), (4, 1));
        assert!(d.x.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn level_dummies_and_labels() {
        let t: Term = "f=a:x".parse().unwrap();
        let spec = ModelSpec::new("y").with_terms(vec![t.labelled("ax")]);
        let d: Design<f64> = build_design(&toy(), &spec).unwrap();
        assert_eq!(d.names(), vec![INTERCEPT, "ax"]);
        assert_eq!(d.x.column(1).to_vec(), vec![0.5, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn design_errors() {
        let ds = toy();
        let bad = ModelSpec::new("y").with_terms(vec![Term::column("nope")]);
        assert!(matches!(build_design::<f64>(&ds, &bad), Err(Error::UnknownColumn(_))));
        let one = Dataset::from_csv_str("y,g\n1,a\n2,a\n", "t", &SchemaHints::default()).unwrap();
        let spec = ModelSpec::new("y").with_terms(vec![Term::column("g")]);
        assert!(matches!(
            build_design::<f64>(&one, &spec),
            Err(Error::SingleLevelFactor(_))
        ));
        let zero = Dataset::from_csv_str("y,z\n1,0\n2,0\n", "t", &SchemaHints::default()).unwrap();
        let spec = ModelSpec::new("y").with_terms(vec![Term::column("z")]);
        assert!(matches!(
            build_design::<f64>(&zero, &spec),
            Err(Error::DegenerateColumn(_))
        ));
        let dup = ModelSpec::new("y").with_terms(parse_terms("x,x").unwrap());
        assert!(matches!(build_design::<f64>(&ds, &dup), Err(Error::DuplicateName(_))));
        let lvl = ModelSpec::new("y").with_terms(parse_terms("f=zz").unwrap());
        assert!(matches!(
            build_design::<f64>(&ds, &lvl),
            Err(Error::UnknownLevel { .. })
        ));
    }

    #[test]
    fn grouping_collapses_ties() {
        let ds = Dataset::from_csv_str("y,x\n1,2\n1,2\n0,2\n1,3\n", "t", &SchemaHints::default()).unwrap();
        let g: GroupedDesign<f64> =
            GroupedDesign::from_dataset(&ds, &ModelSpec::new("y").with_terms(parse_terms("x").unwrap())).unwrap();
        assert_eq!(g.x.nrows(), 3);
        assert_eq!(g.counts.to_vec(), vec![2.0, 1.0, 1.0]);
        assert_eq!(g.y.to_vec(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn split_terms_round_trip() {
        let ds = toy();
        let spec = ModelSpec::new("y").with_terms(parse_terms("f,x,f:x").unwrap());
        let t = DesignTemplate::from_spec(&ds, &spec).unwrap();
        let split = ModelSpec::new("y").with_terms(t.split_terms());
        let t2 = DesignTemplate::from_spec(&ds, &split).unwrap();
        assert_eq!(t.names(), t2.names());
        assert_eq!(t.evaluate::<f64>(&ds).unwrap(), t2.evaluate::<f64>(&ds).unwrap());
    }
}
