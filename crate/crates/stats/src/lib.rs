//! Statistics kernel for tutoring-session analytics.
//!
//! Everything here is a pure function over slices: inter-rater agreement
//! (Cohen's kappa), internal consistency (Cronbach's alpha), Welch's
//! unequal-variance t-test with Bonferroni adjustment, and the Mann-Whitney
//! U test. All p-values are two-sided.

mod cronbach;
mod descriptive;
mod kappa;
mod mann_whitney;
pub mod special;
mod ttest;

pub use cronbach::cronbach_alpha;
pub use descriptive::{cohens_d, mean, sample_variance, standard_error};
pub use kappa::cohens_kappa;
pub use mann_whitney::{mann_whitney_u, MannWhitney, EXACT_THRESHOLD};
pub use ttest::{bonferroni, welch_t_test, Welch};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("input is empty")]
    EmptyInput,
    #[error("sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate variance: {0}")]
    DegenerateVariance(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;
