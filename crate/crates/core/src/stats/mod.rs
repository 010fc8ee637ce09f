//! Vote tallies, agreement tiers, correlation and similarity between label
//! vectors, and label-reduction recommendations.

mod analysis;
mod correlation;
mod tally;

use thiserror::Error;

pub use analysis::{
    build_report, co_occurrence, label_vectors, pair_table, reduction_report, usage_distribution,
    AnalysisReport, CoOccurrenceMatrix, DemographicsSummary, Elimination, LabelVector, MergeLink,
    MergeSet, OtherSuggestion, PairRow, PairStats, ReductionRecommendation, ReductionThresholds,
    ReportInput, TierFilter, TierHistogram,
};
pub use correlation::{
    cosine_similarity, kendall_tau, p_value, pair_counts, pearson, ranks, spearman, Coefficient,
    PairCounts,
};
pub use tally::{agreement_tier, tally_posts, tally_votes, MajorityResult, Tier, VoteTally};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("cosine similarity undefined for a zero vector")]
    UndefinedSimilarity,
    #[error("coefficient {0} is outside [-1, 1]")]
    Domain(f64),
    #[error("post {0} has no judgments")]
    EmptyTally(String),
    #[error("no votes for the selected labels")]
    NoVotes,
}
