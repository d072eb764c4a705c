//! Dated return panels: parsing, validation and yearly slicing.
//!
//! Two input layouts are supported. Generic CSV has an optional header
//! line followed by `date,v1,...,vN` rows with ISO dates. The French
//! data-library layout carries a free-text preamble; the daily block
//! starts at the first line whose leading comma field is an 8-digit
//! `YYYYMMDD` date and ends at the first blank or non-date line (the
//! files append annual/monthly tables after the daily block).
//!
//! Cells equal to -99.99, -999 or -9999 after numeric parsing are missing
//! codes. Rows containing any missing value are dropped (ranks require
//! complete vectors) and the dropped dates are kept for reporting.

use std::io::BufRead;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::matrix::Matrix;

const MISSING_CODES: [f64; 3] = [-99.99, -999.0, -9999.0];

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed date {token:?}")]
    MalformedDate { line: usize, token: String },
    #[error("line {line}, column {col}: non-numeric cell {token:?}")]
    NonNumericCell { line: usize, col: usize, token: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },
    #[error("fewer than 2 data columns (found {found})")]
    TooFewColumns { found: usize },
    #[error("zero retained rows after dropping missing data")]
    NoRetainedRows,
    #[error("no data block found")]
    NoDataBlock,
    #[error("line {line}: dates must be strictly increasing")]
    NonIncreasingDates { line: usize },
    #[error("dimension mismatch between dates, values and labels")]
    ShapeMismatch,
}

/// Input layout selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PanelFormat {
    GenericCsv,
    FrenchLib,
}

/// Dated T x N panel of returns, complete after cleaning.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    values: Matrix,
    labels: Vec<String>,
    /// Row-major missing mask of the retained rows; all false after the
    /// parser's listwise deletion. Kept so directly constructed panels
    /// can carry explicit missingness.
    missing_mask: Vec<bool>,
    dropped_dates: Vec<NaiveDate>,
}

impl ReturnPanel {
    /// Builds a clean panel. Requires strictly increasing dates, at
    /// least two columns and consistent shapes.
    pub fn new(
        dates: Vec<NaiveDate>,
        values: Matrix,
        labels: Vec<String>,
    ) -> Result<Self, PanelError> {
        if values.cols() < 2 {
            return Err(PanelError::TooFewColumns { found: values.cols() });
        }
        if dates.len() != values.rows() || labels.len() != values.cols() {
            return Err(PanelError::ShapeMismatch);
        }
        if dates.is_empty() {
            return Err(PanelError::NoRetainedRows);
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(PanelError::NonIncreasingDates { line: 0 });
            }
        }
        let mask = vec![false; values.rows() * values.cols()];
        Ok(Self { dates, values, labels, missing_mask: mask, dropped_dates: Vec::new() })
    }

    fn from_parts(
        dates: Vec<NaiveDate>,
        values: Matrix,
        labels: Vec<String>,
        dropped_dates: Vec<NaiveDate>,
    ) -> Self {
        let mask = vec![false; values.rows() * values.cols()];
        Self { dates, values, labels, missing_mask: mask, dropped_dates }
    }

    pub fn t_len(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing_mask
    }

    /// Dates of rows removed by listwise deletion during parsing.
    pub fn dropped_dates(&self) -> &[NaiveDate] {
        &self.dropped_dates
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_dates.len()
    }

    /// Serializes as generic CSV (`date,label...` header, ISO dates,
    /// shortest round-trip float formatting).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (t, date) in self.dates.iter().enumerate() {
            out.push_str(&date.format("%Y-%m-%d").to_string());
            for i in 0..self.dim() {
                out.push(',');
                out.push_str(&format!("{}", self.values.get(t, i)));
            }
            out.push('\n');
        }
        out
    }
}

/// One calendar-year window of a panel.
#[derive(Clone, Debug)]
pub struct YearSlice {
    pub year: i32,
    pub panel: ReturnPanel,
    /// True when the window has fewer than `min_obs` rows and should be
    /// excluded from testing (but is still reported).
    pub skipped: bool,
}

fn parse_date_field(token: &str, fmt: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(token, fmt).ok()
}

fn is_french_date(token: &str) -> bool {
    token.len() == 8
        && token.bytes().all(|b| b.is_ascii_digit())
        && parse_date_field(token, "%Y%m%d").is_some()
}

fn split_fields(line: &str) -> Vec<String> {
    let mut fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
    // tolerate a single trailing comma
    if fields.len() > 1 && fields.last().is_some_and(String::is_empty) {
        fields.pop();
    }
    fields
}

fn labels_from_header(header: Option<&str>, ncols: usize) -> Vec<String> {
    if let Some(h) = header {
        let fields = split_fields(h);
        if fields.len() == ncols + 1 {
            return fields[1..].to_vec();
        }
        if fields.len() == ncols {
            return fields;
        }
    }
    (1..=ncols).map(|i| format!("V{i}")).collect()
}

struct RawRows {
    dates: Vec<NaiveDate>,
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
}

fn parse_rows(
    lines: &[(usize, String)],
    header: Option<&str>,
    date_fmt: &str,
) -> Result<RawRows, PanelError> {
    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut ncols: Option<usize> = None;
    for (line_no, line) in lines {
        let fields = split_fields(line);
        let date = parse_date_field(&fields[0], date_fmt).ok_or_else(|| {
            PanelError::MalformedDate { line: *line_no, token: fields[0].clone() }
        })?;
        let want = *ncols.get_or_insert(fields.len() - 1);
        if fields.len() - 1 != want {
            return Err(PanelError::RaggedRow {
                line: *line_no,
                expected: want + 1,
                found: fields.len(),
            });
        }
        let mut row = Vec::with_capacity(want);
        for (c, tok) in fields[1..].iter().enumerate() {
            let v: f64 = tok.parse().map_err(|_| PanelError::NonNumericCell {
                line: *line_no,
                col: c + 1,
                token: tok.clone(),
            })?;
            row.push(v);
        }
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(PanelError::NonIncreasingDates { line: *line_no });
            }
        }
        dates.push(date);
        rows.push(row);
    }
    let ncols = ncols.unwrap_or(0);
    if ncols < 2 {
        return Err(PanelError::TooFewColumns { found: ncols });
    }
    Ok(RawRows { dates, rows, labels: labels_from_header(header, ncols) })
}

fn clean(raw: RawRows) -> Result<ReturnPanel, PanelError> {
    let ncols = raw.rows[0].len();
    let mut kept_dates = Vec::new();
    let mut dropped = Vec::new();
    let mut data = Vec::new();
    for (date, row) in raw.dates.into_iter().zip(raw.rows) {
        let missing = row.iter().any(|v| MISSING_CODES.contains(v));
        if missing {
            dropped.push(date);
        } else {
            kept_dates.push(date);
            data.extend_from_slice(&row);
        }
    }
    if kept_dates.is_empty() {
        return Err(PanelError::NoRetainedRows);
    }
    let values = Matrix::from_vec(kept_dates.len(), ncols, data);
    Ok(ReturnPanel::from_parts(kept_dates, values, raw.labels, dropped))
}

fn parse_generic(text: &str) -> Result<ReturnPanel, PanelError> {
    let lines: Vec<(usize, String)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.to_string()))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    if lines.is_empty() {
        return Err(PanelError::NoDataBlock);
    }
    // header is optional: if the first field of the first line parses as
    // an ISO date the file starts directly with data
    let first_fields = split_fields(&lines[0].1);
    let has_header = parse_date_field(&first_fields[0], "%Y-%m-%d").is_none();
    let (header, data_lines) = if has_header {
        (Some(lines[0].1.as_str()), &lines[1..])
    } else {
        (None, &lines[..])
    };
    if data_lines.is_empty() {
        return Err(PanelError::NoDataBlock);
    }
    clean(parse_rows(data_lines, header, "%Y-%m-%d")?)
}

fn parse_french(text: &str) -> Result<ReturnPanel, PanelError> {
    let all: Vec<(usize, String)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.to_string())).collect();
    let start = all
        .iter()
        .position(|(_, l)| {
            let fields = split_fields(l);
            !fields[0].is_empty() && is_french_date(&fields[0])
        })
        .ok_or(PanelError::NoDataBlock)?;
    // the daily block runs until the first blank or non-date line
    let mut end = start;
    while end < all.len() {
        let line = &all[end].1;
        if line.trim().is_empty() || !is_french_date(&split_fields(line)[0]) {
            break;
        }
        end += 1;
    }
    let header = if start > 0 {
        all[..start].iter().rev().find(|(_, l)| !l.trim().is_empty()).map(|(_, l)| l.as_str())
    } else {
        None
    };
    clean(parse_rows(&all[start..end], header, "%Y%m%d")?)
}

/// Parses a panel from a byte stream in the given layout.
pub fn parse_panel(mut reader: impl BufRead, format: PanelFormat) -> Result<ReturnPanel, PanelError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_panel_str(&text, format)
}

/// Parses a panel from an in-memory string.
pub fn parse_panel_str(text: &str, format: PanelFormat) -> Result<ReturnPanel, PanelError> {
    match format {
        PanelFormat::GenericCsv => parse_generic(text),
        PanelFormat::FrenchLib => parse_french(text),
    }
}

/// Splits a panel into calendar-year windows, preserving row order.
/// Windows shorter than `min_obs` are flagged `skipped`, not dropped.
pub fn split_by_year(panel: &ReturnPanel, min_obs: usize) -> Vec<YearSlice> {
    let mut slices: Vec<YearSlice> = Vec::new();
    let mut start = 0usize;
    let dates = panel.dates();
    for t in 1..=dates.len() {
        let boundary = t == dates.len() || dates[t].year() != dates[start].year();
        if boundary {
            let year = dates[start].year();
            let values = panel.values().slice_rows(start..t);
            let dropped: Vec<NaiveDate> = panel
                .dropped_dates()
                .iter()
                .copied()
                .filter(|d| d.year() == year)
                .collect();
            let sub = ReturnPanel::from_parts(
                dates[start..t].to_vec(),
                values,
                panel.labels().to_vec(),
                dropped,
            );
            slices.push(YearSlice { year, skipped: t - start < min_obs, panel: sub });
            start = t;
        }
    }
    slices
}
