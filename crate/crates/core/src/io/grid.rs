//! Prediction grids for fitted curves.

use super::{Dataset, SchemaHints};
use crate::error::{Error, Result};

fn number(text: &str, spec: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("bad number `{text}` in grid `{spec}`")))
}

/// Parses `col=lo:hi:count` (evenly spaced, inclusive), `col=v1|v2|...` or
/// `col=v`, comma-separated; the grid is the Cartesian product with the
/// last column varying fastest.
pub fn parse_grid(spec: &str) -> Result<Dataset> {
    let mut header = Vec::new();
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, values) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected col=values, got `{part}`")))?;
        let pieces: Vec<&str> = values.split(':').collect();
        let axis = match pieces.as_slice() {
            [lo, hi, count] => {
                let (lo, hi) = (number(lo, spec)?, number(hi, spec)?);
                let count: usize = count
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad count `{count}` in grid `{spec}`")))?;
                match count {
                    0 => return Err(Error::Parse(format!("empty axis in grid `{spec}`"))),
                    1 => vec![lo],
                    _ => (0..count)
                        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                        .collect(),
                }
            }
            [list] => list.split('|').map(|v| number(v, spec)).collect::<Result<_>>()?,
            _ => return Err(Error::Parse(format!("bad axis `{part}`"))),
        };
        header.push(name.trim().to_string());
        axes.push(axis);
    }
    if axes.is_empty() {
        return Err(Error::Parse("empty grid".into()));
    }
    let mut records: Vec<Vec<String>> = vec![Vec::new()];
    for axis in &axes {
        records = records
            .into_iter()
            .flat_map(|r| {
                axis.iter().map(move |v| {
                    let mut r = r.clone();
                    r.push(v.to_string());
                    r
                })
            })
            .collect();
    }
    Dataset::from_records(header, records, format!("grid:{spec}"), &SchemaHints::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_grid() {
        let g = parse_grid("a=0:1:3, b=5|7").unwrap();
        assert_eq!(g.nrows(), 6);
        assert_eq!(g.numeric("a").unwrap(), [0.0, 0.0, 0.5, 0.5, 1.0, 1.0]);
        assert_eq!(g.numeric("b").unwrap(), [5.0, 7.0, 5.0, 7.0, 5.0, 7.0]);
        assert!(parse_grid("a").is_err());
        assert!(parse_grid("a=0:1:0").is_err());
    }
}
