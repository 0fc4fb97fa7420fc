//! Result records and their CSV/JSON serialization.
//!
//! CSV columns are `quantity,x_or_y,q,estimate,ci_lo,ci_hi,replicas,seed`,
//! with the seed written as `master:replica`. Floats use the shortest
//! round-tripping representation, so equal records give equal bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::phases::Seed;
use crate::stats::{MeanEstimate, MedianOfMeans};

/// One estimated quantity at one `x` (or `y`) and `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub quantity: String,
    pub x_or_y: u64,
    pub q: f64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub replicas: u64,
    #[serde(serialize_with = "seed_out", deserialize_with = "seed_in")]
    pub seed: Seed,
}

impl MomentEstimate {
    pub fn from_mean(quantity: &str, x_or_y: u64, q: f64, e: &MeanEstimate, seed: Seed) -> Self {
        let (lo, hi) = if e.stderr.is_finite() {
            e.ci95()
        } else {
            (e.mean, e.mean)
        };
        MomentEstimate {
            quantity: quantity.to_owned(),
            x_or_y,
            q,
            estimate: e.mean,
            ci_lo: lo.max(0.0).min(e.mean),
            ci_hi: hi,
            replicas: e.n,
            seed,
        }
    }

    pub fn from_median(quantity: &str, x_or_y: u64, q: f64, m: &MedianOfMeans, replicas: u64, seed: Seed) -> Self {
        let (lo, hi) = m.ci95();
        MomentEstimate {
            quantity: quantity.to_owned(),
            x_or_y,
            q,
            estimate: m.estimate,
            ci_lo: lo.max(0.0).min(m.estimate),
            ci_hi: hi.max(m.estimate),
            replicas,
            seed,
        }
    }

    /// A deterministic value with a degenerate interval.
    pub fn exact(quantity: &str, x_or_y: u64, q: f64, value: f64, seed: Seed) -> Self {
        MomentEstimate {
            quantity: quantity.to_owned(),
            x_or_y,
            q,
            estimate: value,
            ci_lo: value,
            ci_hi: value,
            replicas: 0,
            seed,
        }
    }
}

fn seed_out<S: Serializer>(seed: &Seed, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(seed)
}

fn seed_in<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Seed, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

impl FromStr for Seed {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (m, r) = s
            .split_once(':')
            .ok_or_else(|| format!("seed {s:?} is not master:replica"))?;
        let parse = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("seed {s:?}: {e}"));
        Ok(Seed::new(parse(m)?, parse(r)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn ser_err(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Serialization {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> LabError {
    LabError::Io {
        path: path.to_path_buf(),
        source,
    }
}

const HEADER: [&str; 8] = [
    "quantity", "x_or_y", "q", "estimate", "ci_lo", "ci_hi", "replicas", "seed",
];

/// CSV text for `records`; an empty slice gives the header line alone.
pub fn to_csv(records: &[MomentEstimate]) -> Result<String> {
    let here = Path::new("<memory>");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(HEADER).map_err(|e| ser_err(here, e))?;
    for r in records {
        w.serialize(r).map_err(|e| ser_err(here, e))?;
    }
    let bytes = w.into_inner().map_err(|e| ser_err(here, e))?;
    String::from_utf8(bytes).map_err(|e| ser_err(here, e))
}

pub fn from_csv(text: &str) -> Result<Vec<MomentEstimate>> {
    let here = Path::new("<memory>");
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| ser_err(here, e))
}

pub fn to_json(records: &[MomentEstimate]) -> Result<String> {
    serde_json::to_string_pretty(records).map_err(|e| ser_err(Path::new("<memory>"), e))
}

pub fn from_json(text: &str) -> Result<Vec<MomentEstimate>> {
    serde_json::from_str(text).map_err(|e| ser_err(Path::new("<memory>"), e))
}

/// Write `records` to `path` in `format`, returning the path written.
pub fn emit(path: &Path, format: Format, records: &[MomentEstimate]) -> Result<PathBuf> {
    let text = match format {
        Format::Csv => to_csv(records),
        Format::Json => to_json(records),
    }
    .map_err(|e| match e {
        LabError::Serialization { message, .. } => ser_err(path, message),
        other => other,
    })?;
    fs::write(path, text).map_err(|e| io_err(path, e))?;
    Ok(path.to_path_buf())
}

/// Read back a file written by [`emit`].
pub fn load(path: &Path, format: Format) -> Result<Vec<MomentEstimate>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    match format {
        Format::Csv => from_csv(&text),
        Format::Json => from_json(&text),
    }
    .map_err(|e| match e {
        LabError::Serialization { message, .. } => ser_err(path, message),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<MomentEstimate> {
        vec![
            MomentEstimate::exact("S_x^2q", 1000, 0.0, 1.0, Seed::new(7, 0)),
            MomentEstimate {
                quantity: "I_y^q".into(),
                x_or_y: 100,
                q: 0.5,
                estimate: 1.25,
                ci_lo: 1.125,
                ci_hi: 1.375,
                replicas: 200,
                seed: Seed::new(u64::MAX, 3),
            },
        ]
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(
            to_csv(&[]).unwrap(),
            "quantity,x_or_y,q,estimate,ci_lo,ci_hi,replicas,seed\n"
        );
        assert!(from_csv(&to_csv(&[]).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let r = sample();
        assert_eq!(from_csv(&to_csv(&r).unwrap()).unwrap(), r);
        assert_eq!(from_json(&to_json(&r).unwrap()).unwrap(), r);
        assert!(to_csv(&r).unwrap().contains(",18446744073709551615:3\n"));
    }

    #[test]
    fn io_errors_carry_the_path() {
        let p = Path::new("/nonexistent-dir/out.csv");
        match emit(p, Format::Csv, &sample()) {
            Err(LabError::Io { path, .. }) => assert_eq!(path, p),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_parse_errors() {
        assert!("12".parse::<Seed>().is_err());
        assert!("a:1".parse::<Seed>().is_err());
        assert_eq!("5:6".parse::<Seed>().unwrap(), Seed::new(5, 6));
    }
}
