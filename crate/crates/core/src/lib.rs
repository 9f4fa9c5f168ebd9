//! Pooling and meta-evaluation toolkit for graded-relevance test collections.
//!
//! The crate covers the whole pipeline of a pooled collection:
//!
//! * [`pooling`] builds depth-k pools and orders them by pseudorelevance (PRI)
//!   or by a seeded shuffle (RND);
//! * [`measures`] scores runs with nDCG, Q, nERR and iRBU at a cutoff;
//! * [`agreement`] computes ordinal Krippendorff's α and quadratic weighted κ;
//! * [`rankstats`] holds Kendall's τ, Tukey HSD, paired t-tests, power analysis
//!   and the distribution functions they need;
//! * [`robustness`] runs leave-one-team-out and rank-range experiments;
//! * [`efficiency`] turns assessor activity logs into timing criteria.
//!
//! File formats live in [`io`]; domain types in [`model`].
//!
//! ```
//! use poolstat::measures::{Measure, MeasureConfig};
//!
//! // Levels of the ranked documents, then the topic's full level multiset.
//! let score = Measure::Ndcg
//!     .evaluate_levels(&[2, 0, 1], &[2, 1], &MeasureConfig::default())
//!     .unwrap();
//! assert!((score - 0.9639).abs() < 1e-4);
//! ```

pub mod agreement;
pub mod efficiency;
pub mod errors;
pub mod io;
pub mod measures;
pub mod model;
pub mod pooling;
pub mod rankstats;
pub mod robustness;

pub use errors::{PoolstatError, Result};
pub use model::{LabelMatrix, Qrels, RankedRun, RawLabel, ScoreMatrix, Strategy, Topic, VersionMap};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/pooling.md")]
    mod pooling {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/agreement.md")]
    mod agreement {}
    #[doc = include_str!("../../../book/src/rankstats.md")]
    mod rankstats {}
    #[doc = include_str!("../../../book/src/robustness.md")]
    mod robustness {}
    #[doc = include_str!("../../../book/src/efficiency.md")]
    mod efficiency {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
