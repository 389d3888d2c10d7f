//! Delimited-text ingestion of a single numeric series.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Column selector: zero-based index or header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl FromStr for Column {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub column: Option<Column>,
    pub header: bool,
    /// Replace the series by its first differences.
    pub diff: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            column: None,
            header: false,
            diff: false,
        }
    }
}

/// Accepts a single ASCII character, or `tab` / `\t`.
pub fn parse_delimiter(s: &str) -> Result<u8> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(CliError::Usage(format!(
            "delimiter must be one ASCII character, got {s:?}"
        ))),
    }
}

/// Reads the file and returns its raw bytes and the parsed series.
pub fn read_series(path: &Path, opts: &CsvOptions) -> Result<(Vec<u8>, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let y = parse_series(&bytes, path, opts)?;
    Ok((bytes, y))
}

pub fn parse_series(bytes: &[u8], path: &Path, opts: &CsvOptions) -> Result<Vec<f64>> {
    let parse_err = |line: u64, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let index = match &opts.column {
        Some(Column::Index(i)) => Some(*i),
        Some(Column::Name(name)) => {
            if !opts.header {
                return Err(CliError::Usage(format!(
                    "column {name:?} selected by name but --header was not given"
                )));
            }
            let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?;
            Some(
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| CliError::Usage(format!("no column named {name:?} in {}", path.display())))?,
            )
        }
        None => None,
    };
    let mut x = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let j = match index {
            Some(j) => j,
            None if rec.len() == 1 => 0,
            None => {
                return Err(CliError::Usage(format!(
                    "{} has {} columns; choose one with --column",
                    path.display(),
                    rec.len()
                )))
            }
        };
        let cell = rec
            .get(j)
            .ok_or_else(|| parse_err(line, format!("no column {j} (row has {} fields)", rec.len())))?;
        let v: f64 = cell
            .parse()
            .map_err(|_| parse_err(line, format!("not a number: {cell:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(line, format!("not a finite number: {cell:?}")));
        }
        x.push(v);
    }
    if opts.diff {
        x = x.windows(2).map(|w| w[1] - w[0]).collect();
    }
    if x.is_empty() {
        return Err(CliError::Usage(format!("{} contains no observations", path.display())));
    }
    Ok(x)
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(64);
    for b in Sha256::digest(bytes).iter() {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// One-column CSV with header `y`; values in shortest round-trip form.
pub fn series_csv(y: &[f64]) -> String {
    let mut s = String::from("y\n");
    for v in y {
        writeln!(s, "{v}").unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, opts: &CsvOptions) -> Result<Vec<f64>> {
        parse_series(text.as_bytes(), Path::new("mem.csv"), opts)
    }

    #[test]
    fn crlf_and_header() {
        let o = CsvOptions {
            header: true,
            column: Some(Column::Name("rate".into())),
            ..Default::default()
        };
        assert_eq!(
            parse("date,rate\r\n2001,1.5\r\n2002,2\r\n", &o).unwrap(),
            vec![1.5, 2.0]
        );
    }

    #[test]
    fn bad_cell_reports_line() {
        let err = parse("1\n2\nx\n", &CsvOptions::default()).unwrap_err();
        match err {
            CliError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
        assert!(parse("1\nNaN\n", &CsvOptions::default()).is_err());
    }

    #[test]
    fn differencing_and_delimiters() {
        let o = CsvOptions {
            delimiter: parse_delimiter("tab").unwrap(),
            column: Some(Column::Index(1)),
            diff: true,
            ..Default::default()
        };
        assert_eq!(parse("a\t1\nb\t4\nc\t2\n", &o).unwrap(), vec![3.0, -2.0]);
        assert!(parse_delimiter(";;").is_err());
    }

    #[test]
    fn ambiguous_column_is_rejected() {
        assert!(matches!(
            parse("1,2\n3,4\n", &CsvOptions::default()),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let y = [0.1, -2.5e-7, 3.0];
        let o = CsvOptions {
            header: true,
            ..Default::default()
        };
        assert_eq!(parse(&series_csv(&y), &o).unwrap(), y);
        assert_eq!(sha256_hex(b"abc").len(), 64);
        assert!(sha256_hex(b"abc").starts_with("ba7816bf"));
    }
}
