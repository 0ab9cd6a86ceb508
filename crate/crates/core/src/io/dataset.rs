use crate::error::{Error, Result};
use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    /// Levels in order of first appearance; `codes[i]` indexes `levels`.
    Categorical {
        levels: Vec<String>,
        codes: Vec<usize>,
    },
}

/// A typed column that keeps the original cell text for tie detection.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub raw: Vec<String>,
    pub data: ColumnData,
}

impl Column {
    pub fn is_numeric(&self) -> bool {
        matches!(self.data, ColumnData::Numeric(_))
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.data {
            ColumnData::Categorical { levels, .. } => Some(levels),
            ColumnData::Numeric(_) => None,
        }
    }
}

/// Columns forced to categorical even when every cell parses as a number.
#[derive(Clone, Debug, Default)]
pub struct SchemaHints {
    pub categorical: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    nrows: usize,
    source: String,
    dropped_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "NA"
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

impl Dataset {
    /// Builds a dataset from text records, auto-typing each column.
    ///
    /// A column is numeric when every non-missing cell parses as a finite
    /// decimal number. Rows with a missing numeric cell are dropped and
    /// counted in [`Dataset::dropped_rows`].
    pub fn from_records(
        header: Vec<String>,
        records: Vec<Vec<String>>,
        source: impl Into<String>,
        hints: &SchemaHints,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for name in &header {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        for (i, r) in records.iter().enumerate() {
            if r.len() != header.len() {
                return Err(Error::RaggedRecord {
                    record: i,
                    found: r.len(),
                    expected: header.len(),
                });
            }
        }
        let numeric: Vec<bool> = (0..header.len())
            .map(|c| {
                if hints.categorical.contains(&header[c]) {
                    return false;
                }
                let mut any = false;
                for r in &records {
                    if is_missing(&r[c]) {
                        continue;
                    }
                    if parse_number(&r[c]).is_none() {
                        return false;
                    }
                    any = true;
                }
                any
            })
            .collect();

        let keep: Vec<&Vec<String>> = records
            .iter()
            .filter(|r| (0..header.len()).all(|c| !numeric[c] || !is_missing(&r[c])))
            .collect();
        let dropped_rows = records.len() - keep.len();

        let columns = header
            .into_iter()
            .enumerate()
            .map(|(c, name)| {
                let raw: Vec<String> = keep.iter().map(|r| r[c].clone()).collect();
                let data = if numeric[c] {
                    ColumnData::Numeric(raw.iter().map(|s| parse_number(s).unwrap()).collect())
                } else {
                    categorical(&raw)
                };
                Column { name, raw, data }
            })
            .collect();
        Ok(Self {
            columns,
            nrows: keep.len(),
            source: source.into(),
            dropped_rows,
        })
    }

    pub fn from_csv_reader<R: Read>(reader: R, source: impl Into<String>, hints: &SchemaHints) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut rows = rdr.records();
        let header: Vec<String> = match rows.next() {
            Some(h) => h?.iter().map(|s| s.trim().to_string()).collect(),
            None => return Err(Error::EmptyFile),
        };
        let mut records = Vec::new();
        for r in rows {
            let r = r?;
            records.push(r.iter().map(str::to_string).collect());
        }
        Self::from_records(header, records, source, hints)
    }

    pub fn from_csv_str(text: &str, source: impl Into<String>, hints: &SchemaHints) -> Result<Self> {
        Self::from_csv_reader(text.as_bytes(), source, hints)
    }

    pub fn read_csv(path: impl AsRef<Path>, hints: &SchemaHints) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, path.display().to_string(), hints)
    }

    /// Writes the raw cell text back out as CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for i in 0..self.nrows {
            w.write_record(self.columns.iter().map(|c| c.raw[i].as_str()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        match &self.column(name)?.data {
            ColumnData::Numeric(v) => Ok(v),
            ColumnData::Categorical { .. } => Err(Error::NotNumeric(name.to_string())),
        }
    }

    /// Raw text of the named columns, one record per row.
    pub fn raw_records(&self, names: &[&str]) -> Result<Vec<Vec<&str>>> {
        let cols: Vec<&Column> = names.iter().map(|n| self.column(n)).collect::<Result<_>>()?;
        Ok((0..self.nrows)
            .map(|i| cols.iter().map(|c| c.raw[i].as_str()).collect())
            .collect())
    }

    pub fn add_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if self.columns.iter().any(|c| c.name == name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        if values.len() != self.nrows {
            return Err(Error::Dimension(format!(
                "column `{name}` has {} values for {} rows",
                values.len(),
                self.nrows
            )));
        }
        self.columns.push(Column {
            name: name.to_string(),
            raw: values.iter().map(|v| v.to_string()).collect(),
            data: ColumnData::Numeric(values),
        });
        Ok(())
    }

    /// Adds a column defined by `name=expr`, where `expr` combines numeric
    /// columns and constants with `+ - * /`, parentheses, `log(..)` and `exp(..)`.
    pub fn derive(&mut self, definition: &str) -> Result<()> {
        let (name, expr) = definition
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected name=expr, got `{definition}`")))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::Parse(format!("missing column name in `{definition}`")));
        }
        let ast = expr::parse(expr)?;
        let values = (0..self.nrows)
            .map(|i| ast.eval(&|col: &str| self.numeric(col).map(|v| v[i])))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "`{definition}` is not finite on row {}",
                bad + 1
            )));
        }
        self.add_numeric(name, values)
    }
}

fn categorical(raw: &[String]) -> ColumnData {
    let mut levels: Vec<String> = Vec::new();
    let codes = raw
        .iter()
        .map(|v| match levels.iter().position(|l| l == v) {
            Some(k) => k,
            None => {
                levels.push(v.clone());
                levels.len() - 1
            }
        })
        .collect();
    ColumnData::Categorical { levels, codes }
}

mod expr {
    use crate::error::{Error, Result};

    #[derive(Debug)]
    pub enum Expr {
        Num(f64),
        Col(String),
        Neg(Box<Expr>),
        Bin(char, Box<Expr>, Box<Expr>),
        Call(String, Box<Expr>),
    }

    impl Expr {
        pub fn eval(&self, col: &dyn Fn(&str) -> Result<f64>) -> Result<f64> {
            Ok(match self {
                Expr::Num(v) => *v,
                Expr::Col(c) => col(c)?,
                Expr::Neg(e) => -e.eval(col)?,
                Expr::Bin(op, a, b) => {
                    let (a, b) = (a.eval(col)?, b.eval(col)?);
                    match op {
                        '+' => a + b,
                        '-' => a - b,
                        '*' => a * b,
                        _ => a / b,
                    }
                }
                Expr::Call(f, e) => {
                    let v = e.eval(col)?;
                    match f.as_str() {
                        "log" => v.ln(),
                        _ => v.exp(),
                    }
                }
            })
        }
    }

    struct Parser<'a> {
        s: &'a [u8],
        pos: usize,
    }

    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            s: src.as_bytes(),
            pos: 0,
        };
        let e = p.sum()?;
        p.ws();
        if p.pos != p.s.len() {
            return Err(Error::Parse(format!("trailing input in `{src}`")));
        }
        Ok(e)
    }

    impl Parser<'_> {
        fn ws(&mut self) {
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
        }

        fn peek(&mut self) -> Option<u8> {
            self.ws();
            self.s.get(self.pos).copied()
        }

        fn sum(&mut self) -> Result<Expr> {
            let mut lhs = self.product()?;
            while let Some(c @ (b'+' | b'-')) = self.peek() {
                self.pos += 1;
                lhs = Expr::Bin(c as char, Box::new(lhs), Box::new(self.product()?));
            }
            Ok(lhs)
        }

        fn product(&mut self) -> Result<Expr> {
            let mut lhs = self.unary()?;
            while let Some(c @ (b'*' | b'/')) = self.peek() {
                self.pos += 1;
                lhs = Expr::Bin(c as char, Box::new(lhs), Box::new(self.unary()?));
            }
            Ok(lhs)
        }

        fn unary(&mut self) -> Result<Expr> {
            if self.peek() == Some(b'-') {
                self.pos += 1;
                return Ok(Expr::Neg(Box::new(self.unary()?)));
            }
            self.atom()
        }

        fn atom(&mut self) -> Result<Expr> {
            match self.peek() {
                Some(b'(') => {
                    self.pos += 1;
                    let e = self.sum()?;
                    self.expect(b')')?;
                    Ok(e)
                }
                Some(c) if c.is_ascii_digit() || c == b'.' => {
                    let start = self.pos;
                    while self.pos < self.s.len()
                        && (self.s[self.pos].is_ascii_digit()
                            || matches!(self.s[self.pos], b'.' | b'e' | b'E')
                            || (matches!(self.s[self.pos], b'+' | b'-') && matches!(self.s[self.pos - 1], b'e' | b'E')))
                    {
                        self.pos += 1;
                    }
                    let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                    text.parse()
                        .map(Expr::Num)
                        .map_err(|_| Error::Parse(format!("bad number `{text}`")))
                }
                Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                    let start = self.pos;
                    while self.pos < self.s.len()
                        && (self.s[self.pos].is_ascii_alphanumeric() || matches!(self.s[self.pos], b'_' | b'.'))
                    {
                        self.pos += 1;
                    }
                    let ident = std::str::from_utf8(&self.s[start..self.pos]).unwrap().to_string();
                    if self.peek() == Some(b'(') && (ident == "log" || ident == "exp") {
                        self.pos += 1;
                        let arg = self.sum()?;
                        self.expect(b')')?;
                        Ok(Expr::Call(ident, Box::new(arg)))
                    } else {
                        Ok(Expr::Col(ident))
                    }
                }
                _ => Err(Error::Parse(format!("unexpected input at offset {}", self.pos))),
            }
        }

        fn expect(&mut self, c: u8) -> Result<()> {
            if self.peek() == Some(c) {
                self.pos += 1;
                Ok(())
            } else {
                Err(Error::Parse(format!("expected `{}` at offset {}", c as char, self.pos)))
            }
        }
    }
}
