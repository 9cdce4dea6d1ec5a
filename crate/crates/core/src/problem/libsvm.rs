//! LibSVM sparse text format: `<label> <idx>:<val> ...` with 1-based indices.

use std::fmt::Write as _;
use std::io::BufRead;

use super::dataset::{Dataset, Label, Sample};
use crate::error::{Error, Result};

/// Parses LibSVM text into a dense dataset of width `max(max index, d_hint)`.
/// Blank lines and `#` comments are skipped.
pub fn parse_libsvm(reader: impl BufRead, d_hint: Option<usize>) -> Result<Dataset> {
    let mut sparse: Vec<(Label, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok.parse().map_err(|_| Error::ParseError {
            line: line_no,
            msg: format!("bad label {label_tok:?}"),
        })?;
        let mut entries = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::ParseError {
                line: line_no,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::ParseError {
                line: line_no,
                msg: format!("bad index {idx:?}"),
            })?;
            if idx < 1 {
                return Err(Error::ParseError { line: line_no, msg: "indices are 1-based".into() });
            }
            let val: f64 = val.parse().map_err(|_| Error::ParseError {
                line: line_no,
                msg: format!("bad value {val:?}"),
            })?;
            max_index = max_index.max(idx);
            entries.push((idx - 1, val));
        }
        sparse.push((Label::from_value(label), entries));
    }

    let dim = max_index.max(d_hint.unwrap_or(0));
    let rows = sparse
        .into_iter()
        .map(|(label, entries)| {
            let mut features = vec![0.0; dim];
            for (i, v) in entries {
                features[i] = v;
            }
            Sample { features, label }
        })
        .collect();
    Dataset::new(dim, rows)
}

/// Writes the nonzero coordinates of each row in LibSVM form, labels as ±1.
pub fn to_libsvm(data: &Dataset) -> String {
    let mut out = String::new();
    for row in data.rows() {
        out.push_str(match row.label {
            Label::Pos => "+1",
            Label::Neg => "-1",
        });
        for (i, v) in row.features.iter().enumerate() {
            if *v != 0.0 {
                let _ = write!(out, " {}:{}", i + 1, v);
            }
        }
        out.push('\n');
    }
    out
}
