use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use circlaw::experiments::{self, Experiment, ExperimentConfig, Shift};
use circlaw::sampler::RowModel;
use circlaw::Error;

const DEFAULT_OUT_DIR: &str = "circlaw-results";

#[derive(Parser)]
#[command(name = "circlaw", version, about = "Fixed-row-sum sign matrix experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw matrices and check their row sums
    Sample(RunArgs),
    /// Eigenvalues, normalized ESD and distance to the circular law
    Esd(RunArgs),
    /// Spectrum of M against {s} ∪ spectrum of the reduced matrix
    Reduce(RunArgs),
    /// Log-determinants of constrained versus i.i.d. rows under complex shifts
    LogdetCompare(RunArgs),
    /// Singular values, least-singular-value tail, interlacing and second moments
    Singvals(RunArgs),
    /// Exact small-ball probabilities and the conditioning inequality
    Smallball(RunArgs),
    /// GAP pigeonhole bound
    Gap(RunArgs),
    /// Distance from a random sign vector to a subspace: tails and moments
    Talagrand(RunArgs),
    /// Exact identities: reduction, base times height, interlacing,
    /// negative second moment, cofactors
    IdentitySuite(RunArgs),
    /// Run the experiment named in a configuration file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory
        #[arg(long, env = "CIRCLAW_OUT_DIR")]
        out: Option<PathBuf>,
    },
    /// Write normalized eigenvalues of esd records as CSV
    Export {
        /// NDJSON records; defaults to <out>/esd.ndjson
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long, env = "CIRCLAW_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(long, default_value = "figure1")]
        stem: String,
    },
}

#[derive(Args, Debug, Default)]
#[command(allow_negative_numbers = true)]
struct RunArgs {
    /// JSON configuration; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    s: Option<i64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// fixed-sum, union-s or iid
    #[arg(long)]
    model: Option<RowModel>,
    /// Complex shifts such as 1+0.5i, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    z: Option<Vec<Shift>>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    a_exponent: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    t_ladder: Option<Vec<f64>>,
    #[arg(long)]
    m_split: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory
    #[arg(long, env = "CIRCLAW_OUT_DIR")]
    out: Option<PathBuf>,
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

fn build_config(experiment: Experiment, a: RunArgs) -> Result<ExperimentConfig, Error> {
    let mut c = match &a.config {
        Some(path) => {
            let c = load_config(path)?;
            if c.experiment != experiment {
                return Err(Error::InvalidParameter {
                    name: "experiment",
                    reason: format!("configuration names `{}`, command is `{experiment}`", c.experiment),
                });
            }
            c
        }
        None => ExperimentConfig::new(experiment),
    };
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { c.$field = v; })* };
    }
    set!(n, s, trials, seed, z, beta, a_exponent, t_ladder, grid, samples);
    if a.model.is_some() {
        c.model = a.model;
    }
    if a.m_split.is_some() {
        c.m_split = a.m_split;
    }
    if a.k.is_some() {
        c.k = a.k;
    }
    if a.out.is_some() {
        c.out = a.out;
    }
    if c.out.is_none() {
        c.out = Some(DEFAULT_OUT_DIR.into());
    }
    Ok(c)
}

fn is_usage(e: &Error) -> bool {
    matches!(e, Error::InvalidParameter { .. } | Error::Parity { .. } | Error::Format(_))
}

fn execute(config: ExperimentConfig) -> Result<bool, Error> {
    let out = experiments::run(&config)?;
    print!("{}", out.summary.table());
    for f in &out.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(out.summary.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => build_config(Experiment::Sample, a).and_then(execute),
        Command::Esd(a) => build_config(Experiment::Esd, a).and_then(execute),
        Command::Reduce(a) => build_config(Experiment::Reduce, a).and_then(execute),
        Command::LogdetCompare(a) => build_config(Experiment::LogdetCompare, a).and_then(execute),
        Command::Singvals(a) => build_config(Experiment::Singvals, a).and_then(execute),
        Command::Smallball(a) => build_config(Experiment::Smallball, a).and_then(execute),
        Command::Gap(a) => build_config(Experiment::Gap, a).and_then(execute),
        Command::Talagrand(a) => build_config(Experiment::Talagrand, a).and_then(execute),
        Command::IdentitySuite(a) => build_config(Experiment::IdentitySuite, a).and_then(execute),
        Command::Run { config, out } => load_config(&config).and_then(|mut c| {
            if out.is_some() {
                c.out = out;
            }
            c.out.get_or_insert_with(|| DEFAULT_OUT_DIR.into());
            execute(c)
        }),
        Command::Export { records, out, stem } => (|| {
            let out = out.unwrap_or_else(|| DEFAULT_OUT_DIR.into());
            let path = records.unwrap_or_else(|| out.join("esd.ndjson"));
            let records = experiments::read_records(&path)?;
            let draws = experiments::export_figure1(&records, &out, &stem)?;
            if draws.is_empty() {
                eprintln!("no esd draws; wrote header-only {}", out.join(format!("{stem}.csv")).display());
            }
            for d in &draws {
                eprintln!("wrote {} ({} rows, outlier {:?})", d.file.display(), d.rows, d.outlier_index);
            }
            Ok(true)
        })(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: asserted invariants failed");
            ExitCode::from(1)
        }
        Err(e) if is_usage(&e) => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
