//! Library surface of the benchmark pipeline: bundle ingestion, run
//! records, and the generate/validate/report stages. The `contractbench`
//! binary is a thin command-line wrapper over these modules.

pub mod bundle;
pub mod pipeline;
pub mod records;
