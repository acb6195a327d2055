//! Named experiments, their configuration, persisted trial records and
//! plot-data export.

mod config;
mod export;
mod record;
mod run;

pub use config::{Experiment, ExperimentConfig, Shift};
pub use export::{export_figure1, EsdData, ExportedDraw};
pub use record::{read_records, write_records, FlagSummary, Stat, StatSummary, Summary, TrialRecord};
pub use run::{
    base_times_height_gap, failed_flags, reduction_tolerance, run, run_trial, RunOutput,
    COFACTOR_TOLERANCE, LOGDET_TOLERANCE, SECOND_MOMENT_TOLERANCE, UNION_TAIL_CONSTANT,
};
