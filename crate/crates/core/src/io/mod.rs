//! Configuration files, CSV inputs and outputs, and run manifests.

mod config;
mod files;

pub use config::{parse_config, parse_variants, parse_variants_str, RunConfig};
pub use files::{
    load_competition_sample, load_weight_series, read_grid_csv, sha256_file, write_density_csv, write_grid_csv,
    write_trajectory_csv, GridTable, GridView, RunManifest, Strides,
};
