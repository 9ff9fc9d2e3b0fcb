//! Configuration files and result persistence.

pub mod config;
pub mod output;

pub use config::{config_hash, load_config, parse_config, serialize_config};
pub use output::{
    emit_results, read_manifest, read_rows_csv, rows_to_csv, to_json_string, write_atomic, write_manifest, RunManifest,
};
