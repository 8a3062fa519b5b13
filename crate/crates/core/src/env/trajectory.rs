use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column order of a trajectory log.
pub const TRAJECTORY_COLUMNS: [&str; 12] = [
    "t",
    "x",
    "y",
    "psi_deg",
    "u",
    "v",
    "r",
    "delta_deg",
    "n",
    "reward",
    "d",
    "psi_prime_deg",
];

/// One control step of a logged trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi_deg: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub delta_deg: f64,
    pub n: f64,
    pub reward: f64,
    pub d: f64,
    pub psi_prime_deg: f64,
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("column {index}: expected `{expected}`, found `{found}`")]
    UnexpectedColumn {
        index: usize,
        expected: &'static str,
        found: String,
    },
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_trajectory<W: Write>(writer: W, rows: &[TrajectoryRow]) -> Result<(), TrajectoryError> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(TRAJECTORY_COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a trajectory log, rejecting any header that differs from
/// [`TRAJECTORY_COLUMNS`].
pub fn read_trajectory<R: Read>(reader: R) -> Result<Vec<TrajectoryRow>, TrajectoryError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    for (index, expected) in TRAJECTORY_COLUMNS.iter().enumerate() {
        match headers.get(index) {
            Some(found) if found.trim() == *expected => {}
            Some(found) => {
                return Err(TrajectoryError::UnexpectedColumn {
                    index,
                    expected,
                    found: found.to_string(),
                })
            }
            None => return Err(TrajectoryError::MissingColumn(expected)),
        }
    }
    if let Some(extra) = headers.get(TRAJECTORY_COLUMNS.len()) {
        return Err(TrajectoryError::UnexpectedColumn {
            index: TRAJECTORY_COLUMNS.len(),
            expected: "<end of header>",
            found: extra.to_string(),
        });
    }
    let mut rows = Vec::new();
    for record in r.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}
