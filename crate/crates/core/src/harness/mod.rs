//! Command-line front end and file formats.
//!
//! Matrices are headerless row-major CSV at 17 significant digits. Traces carry the
//! header `iter,divergence,l2,gain,r_H,r_D,min_D`; each trace `run.csv` is accompanied
//! by `run.manifest.toml`, and `fit` also writes the final `run.H.csv` and `run.D.csv`.

mod cli;
pub mod io;
pub mod manifest;

pub use cli::{cli_main, EXIT_BAD_INPUT, EXIT_FAILURE, EXIT_INFEASIBLE, EXIT_MAX_ITERS, EXIT_OK, EXIT_USAGE};
pub use io::{read_cov, read_matrix, write_comparison, write_matrix, write_trace, write_vector, TRACE_HEADER};
pub use manifest::{manifest_path_for, sha256_file, sidecar, Artifact, ManifestConfig, RunManifest};
