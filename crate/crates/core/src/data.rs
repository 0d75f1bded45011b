//! Susceptible-count records: validation, CSV ingestion and the bundled
//! outbreak series.
//!
//! The CSV format is UTF-8 with a `time,S` header and one record per row.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Susceptible counts `S_0..S_N` observed at strictly increasing times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Observations {
    times: Vec<f64>,
    susceptibles: Vec<u32>,
}

impl Observations {
    /// Validates strictly increasing finite times and nonincreasing `S`.
    /// Errors name the 1-based record that breaks a rule.
    pub fn new(times: Vec<f64>, susceptibles: Vec<u32>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Ingest { row: 0, message: "no observations".into() });
        }
        if times.len() != susceptibles.len() {
            return Err(Error::Ingest {
                row: 0,
                message: format!("{} times but {} counts", times.len(), susceptibles.len()),
            });
        }
        for (k, &t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Ingest { row: k + 1, message: format!("time {t} is not finite") });
            }
            if k > 0 && t <= times[k - 1] {
                return Err(Error::Ingest { row: k + 1, message: "times must be strictly increasing".into() });
            }
            if k > 0 && susceptibles[k] > susceptibles[k - 1] {
                return Err(Error::Ingest { row: k + 1, message: "S must not increase".into() });
            }
        }
        Ok(Self { times, susceptibles })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn susceptibles(&self) -> &[u32] {
        &self.susceptibles
    }

    /// Number of transitions `N` (records minus one).
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// New infections `S_{k-1} - S_k` in step `k` (1-based).
    pub fn new_cases(&self, k: usize) -> u32 {
        self.susceptibles[k - 1] - self.susceptibles[k]
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.times[k] - self.times[k - 1]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,S\n");
        for (t, s) in self.times.iter().zip(&self.susceptibles) {
            out.push_str(&format!("{t},{s}\n"));
        }
        out
    }
}

/// Parses the `time,S` CSV format.
pub fn parse_observations<R: Read>(reader: R) -> Result<Observations> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Ingest { row: 0, message: e.to_string() })?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["time", "S"] {
        return Err(Error::Ingest { row: 0, message: format!("expected header `time,S`, found `{}`", cols.join(",")) });
    }
    let mut times = Vec::new();
    let mut counts = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| Error::Ingest { row, message: e.to_string() })?;
        let t: f64 = rec[0]
            .parse()
            .map_err(|_| Error::Ingest { row, message: format!("time `{}` is not a number", &rec[0]) })?;
        let s: u32 = rec[1]
            .parse()
            .map_err(|_| Error::Ingest { row, message: format!("S `{}` is not a nonnegative integer", &rec[1]) })?;
        times.push(t);
        counts.push(s);
    }
    Observations::new(times, counts)
}

pub fn load_observations(path: impl AsRef<Path>) -> Result<Observations> {
    parse_observations(std::fs::File::open(path)?)
}

/// Daily susceptible counts of a Shigellosis outbreak in a closed community
/// of 199 (one initial case), days 0 to 27. See `data/README.md`.
pub const SHIGELLOSIS_CSV: &str = include_str!("../data/shigellosis.csv");

/// Initial infective count assumed for the bundled outbreak.
pub const SHIGELLOSIS_I0: u32 = 1;

pub fn shigellosis() -> Observations {
    parse_observations(SHIGELLOSIS_CSV.as_bytes()).expect("bundled data is valid")
}
