//! Batch experiments: instance generators, the scheduler benchmark and the
//! two-engine agreement runner.

mod bench;
mod compare;
mod generate;

use thiserror::Error;

pub use bench::{
    random_tree_benchmark, scheduler_benchmark, summarize, write_csv, BenchmarkRecord,
    BenchmarkSummary, PolicyRun, TreeBenchConfig, CSV_HEADER, MAX_ORACLE_DEVIATION,
    REFERENCE_COUNTS,
};
pub use compare::{compare_engines, single_attribute_cases, AgreementReport, CaseOutcome};
pub use generate::{
    naive_bayes_pair, random_naive_bayes, random_polytree, random_polytree_with, seeded_rng,
    PolytreeConfig,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("asked for {wanted} observations but the network has {leaves} leaves")]
    NotEnoughLeaves { wanted: usize, leaves: usize },
    #[error(transparent)]
    Session(#[from] crate::session::SessionError),
}
