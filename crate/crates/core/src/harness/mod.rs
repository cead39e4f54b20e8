//! Monte-Carlo experiment driver, configuration and result files.

pub mod config;
pub mod output;
pub mod reference;
pub mod selftest;
pub mod sweep;

pub use config::{apply_override, CsirMode, ExperimentConfig};
pub use output::{emit_results, read_csv, write_csv, write_json, write_plot_data, Curve, OutputFormat};
pub use reference::{siso_awgn_ber, siso_awgn_reference};
pub use selftest::{run_selftest, Check};
pub use sweep::{binomial_ci95, run_ber_sweep, run_point, run_trials, BerRecord, TrialOutcome};
