//! Ranking comparison and experiment statistics.

pub mod dist;
pub mod power;
pub mod tau;
pub mod ttest;
pub mod tukey;

pub use dist::{noncentral_t_cdf, studentized_range_cdf, studentized_range_sf, t_quantile};
pub use power::{achieved_power, power_pairedt, PowerResult};
pub use tau::{kendall_tau, kendall_tau_maps, mean_tau_partition, tau_fisher_ci, TauPartition, TauResult, TauTable};
pub use ttest::{paired_t, PairedTResult};
pub use tukey::{
    tukey_hsd_paired, tukey_hsd_unpaired, tukey_paired_from_summary, tukey_unpaired_from_summary, Design,
    PairwiseComparison, TukeyResult,
};
