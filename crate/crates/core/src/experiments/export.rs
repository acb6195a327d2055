use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Experiment;
use super::record::TrialRecord;
use crate::error::{Error, Result};
use crate::spectral::NormalizedSpectrum;

/// Normalized spectrum stored in an `esd` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsdData {
    pub n: usize,
    pub s: i64,
    pub sigma: f64,
    /// `[re, im]` of every normalized eigenvalue, in solver order.
    pub points: Vec<[f64; 2]>,
    pub outlier_index: Option<usize>,
    pub outlier_excluded: bool,
    pub ks_distance: f64,
}

impl EsdData {
    pub fn from_spectrum(spectrum: &NormalizedSpectrum, ks_distance: f64) -> Self {
        EsdData {
            n: spectrum.n,
            s: spectrum.s,
            sigma: spectrum.sigma,
            points: spectrum.points.iter().map(|z| [z.re, z.im]).collect(),
            outlier_index: spectrum.outlier_index,
            outlier_excluded: spectrum.outlier_excluded,
            ks_distance,
        }
    }
}

/// One exported draw; the outlier row is identified here rather than in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedDraw {
    pub file: PathBuf,
    pub trial: usize,
    pub n: usize,
    pub s: i64,
    pub rows: usize,
    pub outlier_index: Option<usize>,
    pub outlier_excluded: bool,
    pub ks_distance: f64,
}

/// Writes the normalized eigenvalues of each `esd` draw as a `re,im` CSV.
///
/// No draws give a header-only `<stem>.csv`; one draw gives `<stem>.csv`;
/// several give `<stem>_<i>.csv`. Metadata goes to `<stem>.meta.json`.
pub fn export_figure1(records: &[TrialRecord], dir: &Path, stem: &str) -> Result<Vec<ExportedDraw>> {
    if !records.is_empty() && records.iter().all(|r| r.experiment != Experiment::Esd) {
        return Err(Error::invalid("records", "no esd records to export"));
    }
    let mut draws = Vec::new();
    for r in records.iter().filter(|r| r.experiment == Experiment::Esd) {
        if let Some(v) = &r.data {
            draws.push((r.trial, EsdData::deserialize(v).map_err(|e| Error::Format(format!("trial {}: {e}", r.trial)))?));
        }
    }
    fs::create_dir_all(dir)?;
    let mut exported = Vec::new();
    if draws.is_empty() {
        let file = dir.join(format!("{stem}.csv"));
        fs::write(&file, "re,im\n")?;
    }
    let several = draws.len() > 1;
    for (i, (trial, d)) in draws.iter().enumerate() {
        let file = if several { dir.join(format!("{stem}_{i}.csv")) } else { dir.join(format!("{stem}.csv")) };
        let mut out = std::io::BufWriter::new(fs::File::create(&file)?);
        writeln!(out, "re,im")?;
        for [re, im] in &d.points {
            writeln!(out, "{re},{im}")?;
        }
        out.flush()?;
        exported.push(ExportedDraw {
            file,
            trial: *trial,
            n: d.n,
            s: d.s,
            rows: d.points.len(),
            outlier_index: d.outlier_index,
            outlier_excluded: d.outlier_excluded,
            ks_distance: d.ks_distance,
        });
    }
    fs::write(dir.join(format!("{stem}.meta.json")), serde_json::to_string_pretty(&exported)?)?;
    Ok(exported)
}
