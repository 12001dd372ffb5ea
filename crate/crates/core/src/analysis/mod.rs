//! Rank correlation, top-k filtering, HCS and summary exports over
//! per-architecture metric tables.

pub mod hcs;
pub mod kendall;
pub mod stats;
pub mod table;

pub use hcs::{hcs, HcsParams};
pub use kendall::kendall_tau;
pub use stats::{
    boxplot_csv, boxplot_stats, edge_preference_csv, edge_preference_histogram, scatter_csv,
    size_brackets, BoxplotStats, Bracket,
};
pub use table::{correlation_matrix, CorrelationMatrix, MetricTable};
