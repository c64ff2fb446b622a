//! Paired comparison of optimizer results: sign, signed-rank and t tests,
//! and the pairwise winner matrix.

mod compare;
pub mod special;
mod hypothesis;

use thiserror::Error;

pub use compare::{compare_pair, pairwise_matrix, MethodResult, PairwiseCell, Test};
pub use hypothesis::{paired_t_test, rank_diffs, sign_test, signed_rank_test, RankedDiffs, EXACT_SIGNED_RANK_MAX};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("no untied pairs")]
    Empty,
    #[error("all differences are zero")]
    AllZeroDiffs,
    #[error("differences have zero variance")]
    ZeroVariance,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("result arrays differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}
