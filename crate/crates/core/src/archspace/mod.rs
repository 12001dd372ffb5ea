//! Architecture spaces, isomorphism fingerprints, tabular benchmarks and
//! search.

pub mod arch;
pub mod benchmark;
pub mod fingerprint;
pub mod search;

pub use arch::{enumerate, enumerate_sss, enumerate_tss, Arch, SearchSpace, SssArch, TssArch, TssOp};
pub use benchmark::{load_benchmark, synthetic_benchmark, BenchEntry, LoadOptions, SynthMode, TabularBenchmark};
pub use fingerprint::{canonical_fingerprint, semantic_fingerprint};
pub use search::{run_search, Algorithm, Objective, SearchConfig, SearchResult};
