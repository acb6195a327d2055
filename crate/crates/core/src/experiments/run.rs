use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::mpsc;
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use rand::Rng;
use serde::Serialize;

use super::config::{Experiment, ExperimentConfig};
use super::export::{export_figure1, EsdData};
use super::record::{Stat, Summary, TrialRecord};
use crate::anticoncentration::{erdos_lo_check, gap_pigeonhole_bound, rho_relation_check, Gap};
use crate::concentration::{moment_bound_check, projection_complement, random_complex_basis, tail_table};
use crate::error::{Error, Result};
use crate::exact::to_f64;
use crate::linalg::{log_abs_det, relative_gap, rows_to_matrix, shifted_rows, CVector, C64};
use crate::logdet::{default_split, logdet_via_distances, replacement_statistic_from};
use crate::rng::{derived_seed, trial_stream, Generator};
use crate::sampler::{sample_row_sum_matrix, RowModel};
use crate::singular::{
    bareiss_determinant, cofactor_identity_check, integer_matrix, interlacing_check, last_row_distance_bound,
    negative_second_moment_check, singular_values,
};
use crate::spectral::{
    ks_distance_to_circular, normalize_spectrum, reduction_check, SpectrumSample,
};

/// Largest paired eigenvalue error accepted by the reduction check at size `n`.
pub fn reduction_tolerance(n: usize) -> f64 {
    1e-6 * (n as f64 / 30.0).max(1.0)
}

pub const LOGDET_TOLERANCE: f64 = 1e-6;
pub const SECOND_MOMENT_TOLERANCE: f64 = 1e-6;
pub const COFACTOR_TOLERANCE: f64 = 1e-8;
/// Constant `C` in the `C√n·exp(−t²/4)` curve for rows from 𝒮.
pub const UNION_TAIL_CONSTANT: f64 = 10.0;

#[derive(Debug, Default)]
struct Outcome {
    stats: BTreeMap<String, Stat>,
    flags: BTreeMap<String, bool>,
    data: Option<serde_json::Value>,
}

impl Outcome {
    fn stat(&mut self, name: impl Into<String>, v: f64) {
        self.stats.insert(name.into(), Stat(v));
    }

    fn flag(&mut self, name: impl Into<String>, ok: bool) {
        self.flags.insert(name.into(), ok);
    }

    fn data<T: Serialize>(&mut self, value: &T) -> Result<()> {
        self.data = Some(serde_json::to_value(value)?);
        Ok(())
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Records of a run, its summary and the files written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

/// Executes every trial of `config`. Trials run in parallel on derived
/// streams; a single writer persists records in trial order to
/// `<out>/<experiment>.ndjson` when `out` is set.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut files = Vec::new();
    let sink = match &config.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}.ndjson", config.experiment));
            files.push(path.clone());
            Some(BufWriter::new(File::create(path)?))
        }
        None => None,
    };
    let (tx, rx) = mpsc::channel::<TrialRecord>();
    let writer = thread::spawn(move || ordered_writer(rx, sink));
    {
        use rayon::prelude::*;
        (0..config.trials).into_par_iter().for_each_with(tx, |tx, i| {
            let _ = tx.send(run_trial(config, i));
        });
    }
    let records = writer.join().map_err(|_| Error::Io("record writer panicked".into()))??;
    let summary = Summary::from_records(&records);
    if let Some(dir) = &config.out {
        let path = dir.join(format!("{}.summary.json", config.experiment));
        fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
        files.push(path);
        if config.experiment == Experiment::Esd {
            let stem = format!("{}_eigenvalues", config.experiment);
            files.extend(export_figure1(&records, dir, &stem)?.into_iter().map(|d| d.file));
            files.push(dir.join(format!("{stem}.meta.json")));
        }
    }
    Ok(RunOutput { records, summary, files })
}

fn ordered_writer(rx: mpsc::Receiver<TrialRecord>, mut sink: Option<BufWriter<File>>) -> Result<Vec<TrialRecord>> {
    let mut pending = BTreeMap::new();
    let mut records = Vec::new();
    for r in rx {
        pending.insert(r.trial, r);
        while let Some(r) = pending.remove(&records.len()) {
            if let Some(out) = sink.as_mut() {
                serde_json::to_writer(&mut *out, &r)?;
                out.write_all(b"\n")?;
            }
            records.push(r);
        }
    }
    if let Some(mut out) = sink {
        out.flush()?;
    }
    records.extend(pending.into_values());
    Ok(records)
}

/// Runs trial `trial` of `config` on the stream derived from `(seed, trial)`.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> TrialRecord {
    let started_ms = now_ms();
    let seed = derived_seed(config.seed, trial as u64);
    let mut rng = trial_stream(config.seed, trial as u64);
    let result = match config.experiment {
        Experiment::Sample => sample_trial(config, &mut rng),
        Experiment::Esd => esd_trial(config, &mut rng),
        Experiment::Reduce => reduce_trial(config, &mut rng),
        Experiment::LogdetCompare => logdet_trial(config, &mut rng),
        Experiment::Singvals => singvals_trial(config, &mut rng),
        Experiment::Smallball => smallball_trial(config, &mut rng),
        Experiment::Gap => gap_trial(config, &mut rng),
        Experiment::Talagrand => talagrand_trial(config, seed, &mut rng),
        Experiment::IdentitySuite => identity_trial(config, &mut rng),
    };
    let (outcome, error) = match result {
        Ok(o) => (o, None),
        Err(e) => (Outcome::default(), Some(e.to_string())),
    };
    TrialRecord {
        experiment: config.experiment,
        trial,
        seed,
        params: config.clone(),
        stats: outcome.stats,
        flags: outcome.flags,
        data: outcome.data,
        error,
        started_ms,
        finished_ms: now_ms(),
    }
}

fn sample_trial(c: &ExperimentConfig, rng: &mut Generator) -> Result<Outcome> {
    let model = c.row_model();
    let m = sample_row_sum_matrix(c.n, c.s, model, rng)?;
    let sums: Vec<i64> = m.row_iter().map(|r| r.sum() as i64).collect();
    let mut o = Outcome::default();
    o.stat("mean_entry", m.mean());
    o.stat("min_row_sum", *sums.iter().min().expect("n ≥ 1") as f64);
    o.stat("max_row_sum", *sums.iter().max().expect("n ≥ 1") as f64);
    match model {
        RowModel::FixedSum => o.flag("row_sums", sums.iter().all(|&r| r == c.s)),
        RowModel::UnionS => o.flag("row_sums", sums.iter().all(|&r| (r - c.s).abs() == 1)),
        RowModel::Iid => {}
    }
    Ok(o)
}

fn esd_trial(c: &ExperimentConfig, rng: &mut Generator) -> Result<Outcome> {
    let m = sample_row_sum_matrix(c.n, c.s, c.row_model(), rng)?;
    let sample = SpectrumSample::new(&m, c.s)?;
    let check = sample.check_against(&m);
    let spectrum = normalize_spectrum(&sample.eigenvalues, c.n, c.s)?;
    let ks_distance = ks_distance_to_circular(&spectrum.esd(), c.grid)?;
    let mut o = Outcome::default();
    o.stat("ks_distance", ks_distance);
    o.stat("trace_error", check.trace_error);
    if let Some(e) = check.log_det_error {
        o.stat("log_det_error", e);
    }
    if let Some(i) = spectrum.outlier_index {
        o.stat("outlier_re", spectrum.points[i].re);
        o.stat("outlier_im", spectrum.points[i].im);
    }
    o.flag("spectrum_check", check.passes(c.n));
    o.data(&EsdData::from_spectrum(&spectrum, ks_distance))?;
    Ok(o)
}

fn reduce_trial(c: &ExperimentConfig, rng: &mut Generator) -> Result<Outcome> {
    let m = sample_row_sum_matrix(c.n, c.s, RowModel::FixedSum, rng)?;
    let mut o = Outcome::default();
    reduction_outcome(&mut o, &m)?;
    Ok(o)
}

/// Relative gap between the distance-product and LU log-determinants of
/// `M − z√n·I`; `None` when the shifted matrix is numerically singular.
pub fn base_times_height_gap(m: &DMatrix<f64>, z: C64) -> Result<Option<f64>> {
    let rows = shifted_rows(m, None, z);
    let decomposition = match logdet_via_distances(&rows, z) {
        Ok(d) => d,
        Err(Error::Degenerate { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(log_abs_det(&rows_to_matrix(&rows)).map(|lu| relative_gap(decomposition.total, lu)))
}

fn reduction_outcome(o: &mut Outcome, m: &DMatrix<f64>) -> Result<()> {
    let tol = reduction_tolerance(m.nrows());
    let r = reduction_check(m, tol)?;
    o.stat("reduction_error", r.error);
    o.stat("reduction_schur_error", r.schur_error);
    o.stat("reduction_refined", r.refined as u8 as f64);
    o.flag("reduction", r.error <= tol);
    if let Some(ok) = r.charpoly_identity {
        o.flag("reduction_charpoly", ok);
    }
    Ok(())
}

fn logdet_trial(c: &ExperimentConfig, rng: &mut Generator) -> Result<Outcome> {
    let x = sample_row_sum_matrix(c.n, c.s, RowModel::UnionS, rng)?;
    let x_iid = sample_row_sum_matrix(c.n, c.s, RowModel::Iid, rng)?;
    let m = c.m_split.unwrap_or(default_split(c.n).m);
    let mut o = Outcome::default();
    for z in &c.z {
        match replacement_statistic_from(&x, &x_iid, None, z.0, m)? {
            crate::logdet::ReplacementOutcome::Value { statistic, constrained, .. } => {
                o.stat(format!("statistic@{z}"), statistic);
                o.stat(format!("abs_statistic@{z}"), statistic.abs());
                o.stat(format!("log_s2@{z}"), constrained.log_s2);
                if let Some(gap) = base_times_height_gap(&x, z.0)? {
                    o.stat(format!("base_times_height_gap@{z}"), gap);
                    o.flag(format!("base_times_height@{z}"), gap <= LOGDET_TOLERANCE);
                }
            }
            crate::logdet::ReplacementOutcome::Singular { .. } => o.stat(format!("singular@{z}"), 1.0),
        }
    }
    Ok(o)
}

fn singvals_trial(c: &ExperimentConfig, rng: &mut Generator) -> Result<Outcome> {
    let m = sample_row_sum_matrix(c.n, c.s, c.row_model(), rng)?;
    let sv = singular_values(&m)?;
    let mut o = Outcome::default();
    let smallest = sv.smallest();
    o.stat("sigma_min", smallest);
    o.stat("sigma_max", sv.largest());
    o.stat("sigma_min_sqrt_n", smallest * (c.n as f64).sqrt());
    for a in &c.a_exponent {
        let hit = smallest <= (c.n as f64).powf(-a);
        o.stat(format!("tail@A={a}"), hit as u8 as f64);
    }
    let k = c.k_or_default();
    o.flag("interlacing", interlacing_check(&m, k)?.holds);
    let sub = m.rows(0, c.n - k).clone_owned();
    match negative_second_moment_check(&sub) {
        Ok(r) => {
            o.stat("second_moment_gap", r.relative_gap);
            o.flag("negative_second_moment", r.relative_gap <= SECOND_MOMENT_TOLERANCE);
            o.flag("distance_bound", last_row_distance_bound(&sub)?.holds);
        }
        Err(Error::Degenerate { .. }) => o.stat("rank_deficient", 1.0),
        Err(e) => return Err(e),
    }
    Ok(o)
}

#[derive(Serialize)]
struct SmallBallData {
    points: Vec<[f64; 2]>,
    dim: usize,
    rho: String,
    rho_star: Vec<(i64, String)>,
}

fn smallball_trial(c: &ExperimentConfig, rng: &mut Generator) -> Result<Outcome> {
    let n = c.n;
    let low = c.beta.floor() as i64 + 1;
    let signed = |rng: &mut Generator| {
        let v = rng.random_range(low..low + 4) as f64;
        if rng.random::<bool>() {
            v
        } else {
            -v
        }
    };
    let values: Vec<f64> = (0..n).map(|_| signed(rng)).collect();
    let mut o = Outcome::default();
    let erdos = erdos_lo_check(&values, c.beta)?;
    o.stat("erdos_rho", to_f64(&erdos.rho));
    o.flag("erdos_lo", erdos.holds);
    for (dim, points) in [
        (1, values.iter().map(|&v| [v, 0.0]).collect::<Vec<_>>()),
        (2, (0..n).map(|_| [signed(rng), signed(rng)]).collect()),
    ] {
        let r = rho_relation_check(&points, dim, c.beta, c.s)?;
        o.stat(format!("rho_iid@{dim}d"), to_f64(&r.rho));
        o.stat(format!("rho_star_max@{dim}d"), r.rho_star_max);
        o.stat(format!("ratio@{dim}d"), r.ratio);
        o.flag(format!("conditioning@{dim}d"), r.holds);
        if dim == 1 {
            o.data(&SmallBallData {
                points,
                dim,
                rho: r.rho.to_string(),
                rho_star: r.conditioned.iter().map(|t| (t.s_bar, t.rho_star.to_string())).collect(),
            })?;
        }
    }
    Ok(o)
}

fn gap_trial(c: &ExperimentConfig, rng: &mut Generator) -> Result<Outcome> {
    const BOUND: i64 = 2;
    let rank = c.k_or_default();
    // generators 1, 5, 25, … keep the box injective
    let generators: Vec<Vec<BigRational>> =
        (0..rank).map(|j| vec![BigRational::from_integer((2 * BOUND + 1).pow(j as u32).into())]).collect();
    let gap = Gap::symmetric(generators, vec![BOUND; rank])?;
    let delta = c.beta;
    let values: Vec<Vec<f64>> = (0..c.n)
        .map(|_| {
            let k: Vec<i64> = (0..rank).map(|_| rng.random_range(-BOUND..=BOUND)).collect();
            let p = to_f64(&gap.point(&k)[0]);
            let noise = if delta > 0.0 { rng.random_range(-delta..=delta) * 0.99 } else { 0.0 };
            vec![p + noise]
        })
        .collect();
    let r = gap_pigeonhole_bound(&values, &gap, delta, c.s)?;
    let mut o = Outcome::default();
    o.stat("rho", to_f64(&r.rho));
    o.stat("bound", to_f64(&r.bound));
    o.stat("dilate_size", r.dilate_size as f64);
    o.flag("counting_bound", r.counting_bound_holds);
    o.flag("pigeonhole", r.holds);
    Ok(o)
}

fn talagrand_trial(c: &ExperimentConfig, seed: u64, rng: &mut Generator) -> Result<Outcome> {
    let model = c.row_model();
    let basis = random_complex_basis(c.n, c.k_or_default(), rng);
    let p = projection_complement(&basis, c.n)?;
    let table = tail_table(&p, c.s, None, &c.t_ladder, c.samples, model, UNION_TAIL_CONSTANT, seed)?;
    let mut o = Outcome::default();
    o.stat("center", table.center);
    o.stat("median", table.median);
    o.stat("fitted_constant", table.fitted_constant);
    for row in &table.rows {
        o.stat(format!("frequency@t={}", row.t), row.frequency);
        o.stat(format!("median_frequency@t={}", row.t), row.median_frequency);
        o.flag(format!("tail_bound@t={}", row.t), row.holds);
    }
    o.flag("monotone", table.is_monotone());
    if model == RowModel::Iid {
        let m = moment_bound_check(&p, &CVector::zeros(c.n), c.s, c.samples, seed.wrapping_add(1))?;
        o.stat("mean_y", m.mean_y);
        o.stat("mean_y_stderr", m.mean_stderr);
        o.stat("second_moment", m.second_moment);
        o.stat("second_moment_bound", m.bound);
        o.flag("mean_y", m.mean_ok);
        o.flag("second_moment", m.holds);
    }
    o.data(&table)?;
    Ok(o)
}

/// Nonsingular `c × c` sign matrix with i.i.d. fair entries.
fn nonsingular_sign_matrix(c: usize, rng: &mut Generator) -> Result<DMatrix<i64>> {
    for _ in 0..10_000 {
        let x = DMatrix::from_fn(c, c, |_, _| if rng.random::<bool>() { 1i64 } else { -1 });
        if bareiss_determinant(&x) != 0 {
            return Ok(x);
        }
    }
    Err(Error::Degenerate { index: 0, value: 0.0 })
}

fn identity_trial(c: &ExperimentConfig, rng: &mut Generator) -> Result<Outcome> {
    let n = c.n;
    let m = sample_row_sum_matrix(n, c.s, RowModel::FixedSum, rng)?;
    let mut o = Outcome::default();

    reduction_outcome(&mut o, &m)?;

    let z = c.z[0].0;
    match base_times_height_gap(&m, z)? {
        Some(gap) => {
            o.stat("base_times_height_gap", gap);
            o.flag("base_times_height", gap <= LOGDET_TOLERANCE);
        }
        None => o.stat("base_times_height_singular", 1.0),
    }

    let k = c.k_or_default().clamp(1, n - 1);
    o.flag("interlacing", interlacing_check(&m, k)?.holds);

    let wide = DMatrix::from_fn(n, n + 2, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
    match negative_second_moment_check(&wide) {
        Ok(r) => {
            o.stat("second_moment_gap", r.relative_gap);
            o.flag("negative_second_moment", r.relative_gap <= SECOND_MOMENT_TOLERANCE);
        }
        Err(Error::Degenerate { .. }) => o.stat("rank_deficient", 1.0),
        Err(e) => return Err(e),
    }

    let x = nonsingular_sign_matrix(n.min(7), rng)?;
    let a = DVector::from_fn(x.nrows(), |_, _| rng.random_range(-1.0..1.0));
    let r = cofactor_identity_check(&x, &a)?;
    o.stat("cofactor_residual", r.residual);
    o.flag("cofactor", r.residual <= COFACTOR_TOLERANCE);
    // the integer path must agree with the float matrix
    debug_assert_eq!(integer_matrix(&x.map(|v| v as f64))?, x);
    Ok(o)
}

/// Names of flags that failed in any record.
pub fn failed_flags(records: &[TrialRecord]) -> BTreeSet<String> {
    records.iter().flat_map(|r| r.failed_flags().map(str::to_string)).collect()
}
