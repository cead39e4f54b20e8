//! Initial filters, the likelihood ascent search and its soft outputs.

pub mod filter;
pub mod las;
pub mod oracle;
pub mod soft;

pub use filter::{initial_solution, FilterKind, FilterPath, InitialFilter, InitialSolution};
pub use las::{
    best_k_symbol_candidate, k_symbol_substage, mlas_detect, one_symbol_stage, optimal_step, run_search,
    AppliedUpdate, DetectionStats, Detection, DetectorConfig, LasState, UpdateCandidate,
};
pub use oracle::{local_minimum_check, ml_oracle, ml_oracle_with_budget, ORACLE_BUDGET};
pub use soft::soft_outputs;
