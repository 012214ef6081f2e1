//! CSV readers and writers for count tables, time tags and result series.
//!
//! Floats are written in shortest round-trip form, so identical values give
//! identical bytes.

use std::path::Path;

use cpk_core::analysis::{TimeTag, TimeTagSet};
use cpk_core::tomography::{outcome_index, settings, setting_index, CountTable, PauliBasis, Setting, OUTCOMES};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
struct CountRow {
    photon_basis: String,
    ion_basis: String,
    outcome: String,
    counts: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TagRow {
    attempt_index: u64,
    t_us: f64,
    detector: u32,
    pol: Option<String>,
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

/// Reads the 36-row count table; every setting and outcome must appear exactly once.
pub fn read_counts(path: &Path) -> Result<CountTable, CliError> {
    let mut table = CountTable::new([[0; 4]; 9]);
    let mut seen = [[false; 4]; 9];
    for row in reader(path)?.deserialize::<CountRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let basis = |s: &str, col: &str| {
            PauliBasis::parse(s).ok_or_else(|| CliError::Validation(format!("{}: {col} `{s}` is not one of Z, X, Y", path.display())))
        };
        let s = Setting { photon: basis(&row.photon_basis, "photon_basis")?, ion: basis(&row.ion_basis, "ion_basis")? };
        let o = outcome_index(&row.outcome).ok_or_else(|| {
            CliError::Validation(format!("{}: outcome `{}` is not one of {}", path.display(), row.outcome, OUTCOMES.join(", ")))
        })?;
        let k = setting_index(s);
        if seen[k][o] {
            return Err(CliError::Validation(format!("{}: duplicate row for {} {} {}", path.display(), row.photon_basis, row.ion_basis, row.outcome)));
        }
        seen[k][o] = true;
        table.set(s, o, row.counts);
    }
    if seen.iter().flatten().any(|&s| !s) {
        return Err(CliError::Validation(format!("{}: expected 36 rows covering every setting and outcome", path.display())));
    }
    Ok(table)
}

pub fn write_counts(path: &Path, table: &CountTable) -> Result<(), CliError> {
    let mut w = writer(path)?;
    for s in settings() {
        for (o, label) in OUTCOMES.iter().enumerate() {
            w.serialize(CountRow {
                photon_basis: s.photon.label().to_string(),
                ion_basis: s.ion.label().to_string(),
                outcome: label.to_string(),
                counts: table.get(s, o),
            })
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Reads time tags; `attempts` defaults to one past the largest attempt index.
pub fn read_timetags(path: &Path, attempts: Option<u64>) -> Result<TimeTagSet, CliError> {
    let mut tags = Vec::new();
    for row in reader(path)?.deserialize::<TagRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        tags.push(TimeTag { attempt: row.attempt_index, t_us: row.t_us, detector: row.detector, pol: row.pol.filter(|p| !p.is_empty()) });
    }
    let attempts = attempts.unwrap_or_else(|| tags.iter().map(|t| t.attempt + 1).max().unwrap_or(0));
    Ok(TimeTagSet::new(tags, attempts))
}

pub fn write_timetags(path: &Path, set: &TimeTagSet) -> Result<(), CliError> {
    let mut w = writer(path)?;
    for t in &set.tags {
        w.serialize(TagRow { attempt_index: t.attempt, t_us: t.t_us, detector: t.detector, pol: t.pol.clone() })
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes a numeric table with the given header; each header names its unit.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
