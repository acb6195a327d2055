use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};

/// A statistic; non-finite values persist as the strings `"NaN"`, `"inf"`, `"-inf"`.
#[derive(Debug, Clone, Copy)]
pub struct Stat(pub f64);

impl PartialEq for Stat {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Serialize for Stat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Stat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Stat(v)),
            Raw::Text(t) => match t.as_str() {
                "NaN" => Ok(Stat(f64::NAN)),
                "inf" => Ok(Stat(f64::INFINITY)),
                "-inf" => Ok(Stat(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("not a statistic: {other}"))),
            },
        }
    }
}

/// One trial of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: Experiment,
    pub trial: usize,
    /// Seed of this trial's generator stream.
    pub seed: u64,
    pub params: ExperimentConfig,
    pub stats: BTreeMap<String, Stat>,
    /// Asserted invariants; any `false` fails the run.
    pub flags: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<serde_json::Value>,
    /// Trial-level failure, recorded instead of aborting the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub started_ms: u64,
    pub finished_ms: u64,
}

impl TrialRecord {
    pub fn stat(&self, name: &str) -> Option<f64> {
        self.stats.get(name).map(|s| s.0)
    }

    pub fn failed_flags(&self) -> impl Iterator<Item = &str> {
        self.flags.iter().filter(|(_, &v)| !v).map(|(k, _)| k.as_str())
    }
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        records.push(r);
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    /// Finite values summarized.
    pub count: usize,
    pub non_finite: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagSummary {
    pub passed: usize,
    pub total: usize,
}

/// Aggregate over the records of one run, recomputable from persisted records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: Option<Experiment>,
    pub records: usize,
    pub errors: usize,
    pub stats: BTreeMap<String, StatSummary>,
    pub flags: BTreeMap<String, FlagSummary>,
}

impl Summary {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut flags: BTreeMap<String, FlagSummary> = BTreeMap::new();
        for r in records {
            for (k, v) in &r.stats {
                values.entry(k.clone()).or_default().push(v.0);
            }
            for (k, &v) in &r.flags {
                let e = flags.entry(k.clone()).or_insert(FlagSummary { passed: 0, total: 0 });
                e.total += 1;
                e.passed += v as usize;
            }
        }
        let stats = values
            .into_iter()
            .map(|(k, vs)| {
                let mut finite: Vec<f64> = vs.iter().copied().filter(|v| v.is_finite()).collect();
                let count = finite.len();
                let mean = finite.iter().sum::<f64>() / count as f64;
                let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
                let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let median = crate::logdet::median(&mut finite).unwrap_or(f64::NAN);
                (k, StatSummary { count, non_finite: vs.len() - count, mean, median, min, max })
            })
            .collect();
        Summary {
            experiment: records.first().map(|r| r.experiment),
            records: records.len(),
            errors: records.iter().filter(|r| r.error.is_some()).count(),
            stats,
            flags,
        }
    }

    /// No asserted invariant failed.
    pub fn passed(&self) -> bool {
        self.flags.values().all(|f| f.passed == f.total)
    }

    pub fn table(&self) -> String {
        let mut t = String::new();
        let name = self.experiment.map_or("-".to_string(), |e| e.to_string());
        let _ = writeln!(t, "experiment {name}: {} records, {} trial errors", self.records, self.errors);
        if !self.stats.is_empty() {
            let _ = writeln!(t, "{:<28} {:>6} {:>13} {:>13} {:>13} {:>13}", "statistic", "count", "mean", "median", "min", "max");
            for (k, s) in &self.stats {
                let _ = writeln!(
                    t,
                    "{:<28} {:>6} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e}",
                    k, s.count, s.mean, s.median, s.min, s.max
                );
            }
        }
        for (k, f) in &self.flags {
            let mark = if f.passed == f.total { "ok" } else { "FAIL" };
            let _ = writeln!(t, "{:<28} {:>6}/{:<6} {mark}", k, f.passed, f.total);
        }
        t
    }
}
