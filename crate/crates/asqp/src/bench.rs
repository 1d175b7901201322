//! Benchmark harness: random instance generation, independent oracles,
//! timed suites with CSV output, and performance profiles.

pub mod generator;
pub mod oracle;
pub mod profile;
pub mod suite;

pub use generator::{generate, parse_seed, CountSpec, GeneratorSpec, ProblemStream};
pub use oracle::{oracle_enumerate, oracle_reference, oracle_solve, OracleKind, OracleSolution};
pub use profile::{dolan_more, write_profile, write_profile_file, ProfileCurve, ProfileTable};
pub use suite::{
    read_records, read_records_file, read_records_str, run_suite, run_suite_with, write_records,
    write_records_file, ErrorNormMode, RunRecord, SuiteOptions,
};
