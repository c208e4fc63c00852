//! File formats, synthetic data and the cross-validation harness.

pub mod codec;
pub mod experiment;
pub mod generate;
pub mod io;

#[cfg(test)]
mod tests;

pub use codec::{decode_model, encode_model, Model, FORMAT_VERSION};
pub use experiment::{
    format_report, parse_report_json, preprocess, run_experiment, Algorithm, ExperimentConfig, Method, Preprocess,
    ReportFormat, ReportRow, Task,
};
pub use generate::{
    connected_log_density, generate_connected, generate_standin, GroundTruth, Profile, Standin, CONNECTED,
};
pub use io::{ingest_csv, parse_schema, read_csv, read_schema, write_csv, write_schema};
