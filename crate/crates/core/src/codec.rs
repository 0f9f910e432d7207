//! The four-column `x,s,a,y` CSV format.
//!
//! Absent arm/outcome cells are empty. No quoting, dot decimal separator,
//! newline line endings (a trailing `\r` is tolerated on input).

use std::fmt::Write as _;

use crate::domain::{validate, Arm, DomainError, Sample, StudyDataset, SubjectRecord};

pub const HEADER: &str = "x,s,a,y";

pub fn parse_csv(text: &str) -> Result<StudyDataset, DomainError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == HEADER => {}
        Some((_, h)) => {
            return Err(DomainError::MalformedRow {
                line: 1,
                reason: format!("expected header `{HEADER}`, found `{h}`"),
            })
        }
        None => return Err(DomainError::EmptyDataset),
    }
    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        records.push(parse_row(line, idx + 1)?);
    }
    validate(records)
}

fn parse_row(line: &str, line_no: usize) -> Result<SubjectRecord, DomainError> {
    let malformed = |reason: String| DomainError::MalformedRow { line: line_no, reason };
    let cells: Vec<&str> = line.split(',').collect();
    if cells.len() != 4 {
        return Err(malformed(format!("expected 4 columns, found {}", cells.len())));
    }
    let x: f64 = cells[0].parse().map_err(|_| malformed(format!("unparseable x `{}`", cells[0])))?;
    let s = match cells[1] {
        "1" => Sample::Trial,
        "0" => Sample::Target,
        other => return Err(malformed(format!("s must be 0 or 1, found `{other}`"))),
    };
    let a = match cells[2] {
        "" => None,
        "1" => Some(Arm::Treated),
        "0" => Some(Arm::Control),
        other => return Err(malformed(format!("a must be 0, 1 or empty, found `{other}`"))),
    };
    let y = match cells[3] {
        "" => None,
        v => Some(v.parse::<f64>().map_err(|_| malformed(format!("unparseable y `{v}`")))?),
    };
    Ok(SubjectRecord { x, s, a, y })
}

/// Renders with Rust's shortest round-trip float formatting.
pub fn serialize_csv(dataset: &StudyDataset) -> String {
    let mut out = String::with_capacity(16 * (dataset.records().len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in dataset.records() {
        let s = match r.s {
            Sample::Trial => "1",
            Sample::Target => "0",
        };
        let a = match r.a {
            Some(Arm::Treated) => "1",
            Some(Arm::Control) => "0",
            None => "",
        };
        let _ = write!(out, "{},{},{},", r.x, s, a);
        if let Some(y) = r.y {
            let _ = write!(out, "{y}");
        }
        out.push('\n');
    }
    out
}
