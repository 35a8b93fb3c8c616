//! Text formats for matrices and vectors, and CSV reports.
//!
//! Matrix files hold `m N` on the first line followed by `m` lines of `N`
//! whitespace-separated numbers. Vector files hold the length followed by one
//! value per line. Both are written with 17 significant digits so that a
//! write/read cycle reproduces every bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_exact(x: f64) -> String {
    format!("{x:.16e}")
}

/// Six significant digits in the style of C's `%.6g`.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: invalid number {tok:?}")))
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::Parse(format!("line {ln}: expected \"m N\", got {header:?}")));
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Parse(format!("line {ln}: invalid dimension {s:?}")))
    };
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (ln, line) in lines {
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(parse_f64(tok, ln)?);
        }
        if data.len() - before != cols {
            return Err(Error::Parse(format!(
                "line {ln}: expected {cols} entries, found {}",
                data.len() - before
            )));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(Error::Parse(format!("expected {rows} rows, found {seen_rows}")));
    }
    Matrix::from_row_major(rows, cols, data)
}

pub fn format_matrix(a: &Matrix) -> String {
    let mut out = format!("{} {}\n", a.rows(), a.cols());
    for r in 0..a.rows() {
        let row: Vec<String> = (0..a.cols()).map(|c| format_exact(a.get(r, c))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_vector(text: &str) -> Result<DVector<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty vector file".into()))?;
    let len: usize = header
        .parse()
        .map_err(|_| Error::Parse(format!("line {ln}: invalid length {header:?}")))?;
    let values = lines
        .map(|(ln, l)| parse_f64(l, ln))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != len {
        return Err(Error::Parse(format!(
            "declared length {len}, found {} values",
            values.len()
        )));
    }
    Ok(DVector::from_vec(values))
}

pub fn format_vector(v: &DVector<f64>) -> String {
    let mut out = format!("{}\n", v.len());
    for x in v.iter() {
        out.push_str(&format_exact(*x));
        out.push('\n');
    }
    out
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    parse_matrix(&read_text(path.as_ref())?)
}

pub fn write_matrix(path: impl AsRef<Path>, a: &Matrix) -> Result<()> {
    write_text(path.as_ref(), &format_matrix(a))
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    parse_vector(&read_text(path.as_ref())?)
}

pub fn write_vector(path: impl AsRef<Path>, v: &DVector<f64>) -> Result<()> {
    write_text(path.as_ref(), &format_vector(v))
}

/// Tabular report: an optional `# config: ...` provenance line, a header
/// row and string-valued records.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvReport {
    pub config_echo: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvReport {
    pub fn new(header: &[&str]) -> Self {
        CsvReport {
            config_echo: None,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_config(mut self, echo: impl Into<String>) -> Self {
        self.config_echo = Some(echo.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        if let Some(echo) = &self.config_echo {
            writeln!(buf, "# config: {echo}").expect("writing to memory");
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header)?;
            for row in &self.rows {
                w.write_record(row)?;
            }
            w.flush().map_err(|e| Error::io("<report buffer>", e))?;
        }
        Ok(buf)
    }
}

pub fn write_report(report: &CsvReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, report.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<CsvReport> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let config_echo = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config: "))
        .map(str::to_string);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok(CsvReport {
        config_echo,
        header,
        rows,
    })
}
