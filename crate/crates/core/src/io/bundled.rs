//! Example datasets compiled into the library, checked against SHA-256.

use super::{Dataset, SchemaHints};
use crate::elimination::{expand_terms, FactorDummies};
use crate::error::{Error, Result};
use crate::glm::Term;
use sha2::{Digest, Sha256};

pub struct Bundle {
    pub name: &'static str,
    pub text: &'static str,
    pub sha256: &'static str,
    pub description: &'static str,
}

pub const BUNDLES: [Bundle; 3] = [
    Bundle {
        name: "income",
        text: include_str!("../../data/income.csv"),
        sha256: "b5d02c112700d71f6866656c508302b7a2e4cc306f4fb655e26ff0d67a201b53",
        description: "40 family incomes from a sample of 648 families",
    },
    Bundle {
        name: "vaso",
        text: include_str!("../../data/vaso.csv"),
        sha256: "ef3d1abc9140328d19790126f8fa12cf4020529a6a86d7c3857eebda23552278",
        description: "Finney's vaso-constriction data: volume, rate, response (39 rows)",
    },
    Bundle {
        name: "absence",
        text: include_str!("../../data/absence.csv"),
        sha256: "6257dc6d8aa68ec20b1165526a9dc9c9d81c02cc34ce47fb838efe778cc4e876",
        description: "Days absent from school for 146 children (Eth, Sex, Age, Lrn, Days)",
    },
];

pub const PREFIX: &str = "bundled:";

pub fn bundle(name: &str) -> Result<&'static Bundle> {
    BUNDLES
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| Error::InvalidArgument(format!("no bundled dataset `{name}`")))
}

/// Parses a bundled dataset after verifying its checksum.
pub fn load(name: &str) -> Result<Dataset> {
    load_with(name, &SchemaHints::default())
}

pub fn load_with(name: &str, hints: &SchemaHints) -> Result<Dataset> {
    let b = bundle(name)?;
    if hex::encode(Sha256::digest(b.text.as_bytes())) != b.sha256 {
        return Err(Error::Checksum(name.to_string()));
    }
    Dataset::from_csv_str(b.text, format!("{PREFIX}{name}"), hints)
}

/// Reads `bundled:NAME` from the library and anything else from disk.
pub fn resolve(location: &str, hints: &SchemaHints) -> Result<Dataset> {
    match location.strip_prefix(PREFIX) {
        Some(name) => load_with(name, hints),
        None => Dataset::read_csv(location, hints),
    }
}

/// Factor aliases of the absence data: C = Eth, S = Sex, L = Lrn, A = Age,
/// each coded against its first level.
pub fn absence_factors(ds: &Dataset) -> Result<Vec<FactorDummies>> {
    [("C", "Eth"), ("S", "Sex"), ("L", "Lrn"), ("A", "Age")]
        .iter()
        .map(|(alias, column)| FactorDummies::from_column(ds, alias, column))
        .collect()
}

/// Products forming the default absence candidate set: the C·S·L
/// hierarchy plus main effects of A and its products with C and S.
pub const ABSENCE_PRODUCTS: &[&[&str]] = &[
    &["C"],
    &["S"],
    &["L"],
    &["C", "S"],
    &["C", "L"],
    &["S", "L"],
    &["C", "S", "L"],
    &["A"],
    &["C", "A"],
    &["S", "A"],
];

pub fn absence_candidates(ds: &Dataset) -> Result<Vec<Term>> {
    let products: Vec<Vec<String>> = ABSENCE_PRODUCTS
        .iter()
        .map(|p| p.iter().map(|s| s.to_string()).collect())
        .collect();
    expand_terms(&absence_factors(ds)?, &products)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundles_load() {
        assert_eq!(load("income").unwrap().nrows(), 40);
        let vaso = load("vaso").unwrap();
        assert_eq!(vaso.nrows(), 39);
        assert_eq!(vaso.names(), ["volume", "rate", "y"]);
        let absence = load("absence").unwrap();
        assert_eq!(absence.nrows(), 146);
        assert!(load("nope").is_err());
    }

    #[test]
    fn absence_candidate_names() {
        let ds = load("absence").unwrap();
        let names: Vec<String> = absence_candidates(&ds).unwrap().iter().map(|t| t.to_string()).collect();
        assert_eq!(
            names,
            ["C", "S", "L", "CS", "CL", "SL", "CSL", "A2", "A3", "A4", "CA2", "CA3", "CA4", "SA2", "SA3", "SA4"]
        );
        let f = absence_factors(&ds).unwrap();
        assert_eq!(f[0].levels, ["N"]);
        assert_eq!(f[1].levels, ["F"]);
        assert_eq!(f[2].levels, ["AL"]);
        assert_eq!(f[3].levels, ["F1", "F2", "F3"]);
    }
}
