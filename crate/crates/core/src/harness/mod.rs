//! CSV ingestion, metrics, the export/import quality check, and the
//! command-line front end.

mod cli;
mod csv_table;
mod metrics;
mod qc;

pub use cli::{cli_dispatch, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
pub use csv_table::CsvTable;
pub use metrics::{compute_metric, MetricKind};
pub use qc::{run_qc_pipeline, run_qc_pipeline_with, QcCase, QcFailure, QcReport, QC_THRESHOLD};
