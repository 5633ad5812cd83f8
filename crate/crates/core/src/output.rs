//! CSV output: header first, LF line endings, reals with 9 significant digits.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Formats a real like C's `%.9g`, with Rust-style exponents (`1.5e-7`).
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    trim_zeros(&format!("{x:.*}", (8 - exp) as usize)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A row type with a fixed column order.
pub trait CsvRecord {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// Renders rows to CSV text.
pub fn render_csv<R: CsvRecord>(rows: &[R]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(R::header())?;
    for row in rows {
        let fields = row.fields();
        if fields.len() != R::header().len() {
            return Err(Error::invalid("row width does not match header"));
        }
        w.write_record(&fields)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("fields are UTF-8"))
}

/// Writes rows to `path` in one go.
pub fn emit_csv<R: CsvRecord>(rows: &[R], path: &Path) -> Result<()> {
    let text = render_csv(rows)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// A parsed CSV file: header plus string cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cell `(row, column)` as a real.
    pub fn real(&self, row: usize, name: &str) -> Result<f64> {
        let col = self
            .column(name)
            .ok_or_else(|| Error::invalid(format!("no column `{name}`")))?;
        let cell = self
            .rows
            .get(row)
            .and_then(|r| r.get(col))
            .ok_or_else(|| Error::invalid(format!("no row {row}")))?;
        cell.parse().map_err(|_| Error::Parse {
            line: row + 2,
            msg: format!("`{cell}` in column `{name}` is not a number"),
        })
    }
}

/// Parses CSV text written by [`emit_csv`]. Every row must match the header
/// width.
pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(CsvTable { header, rows })
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}
