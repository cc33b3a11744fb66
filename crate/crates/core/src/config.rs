//! Crate-wide resource limits and budgets.

use crate::pgl::DEFAULT_TABLE_LIMIT;
use crate::spectral::DEFAULT_DENSE_LIMIT;

/// Gates and budgets shared by the search, certification and verification
/// paths. Every limit is overridable from the CLI and recorded in output
/// files, so a run is reproducible from its config echo.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limits {
    /// Largest group order that may be enumerated into a table.
    pub table_limit: u64,
    /// Largest group order for dense-matrix operations (SVD oracle).
    pub dense_limit: usize,
    /// Relation-search budget: number of word evaluations.
    pub word_budget: u64,
    /// Exhaustive tuple-space budget: |Γ_p|^k scans.
    pub exhaustive_budget: u64,
    /// Lifted matrix-space budget: p^(4k) scans.
    pub lifted_budget: u64,
    /// Largest |K_n| for the direct-mode level norm.
    pub direct_limit: u64,
    /// Searches walk primes upward only this far.
    pub prime_ceiling: u32,
    /// Extra base-set size increments tried before advancing the prime.
    pub k_growth: u32,
    /// Override for the trace-moment order m (None = heuristic default).
    pub trace_order: Option<u32>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            table_limit: DEFAULT_TABLE_LIMIT,
            dense_limit: DEFAULT_DENSE_LIMIT,
            word_budget: 1_000_000_000,
            exhaustive_budget: 1_000_000,
            lifted_budget: 10_000_000,
            direct_limit: 100_000,
            prime_ceiling: 101,
            k_growth: 3,
            trace_order: None,
        }
    }
}
