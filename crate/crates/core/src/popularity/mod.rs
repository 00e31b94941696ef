//! Popularity tiers and proxy correlations.

mod correlation;
mod tiers;

pub use correlation::{
    average_ranks, correlate, correlation_matrix, profile_metrics, CorrelationMethod, CorrelationReport, MetricColumn,
};
pub use tiers::{partition_tiers, RankedEntity, Tier, TierAssignment, TierBoundary};
