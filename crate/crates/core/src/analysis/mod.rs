//! Evaluation metrics and attention-region analysis.

mod attention;
mod metrics;

pub use attention::{
    aggregate_attention, attention_regions, group_name, AttentionHistogram, Region, RegionBands,
    RegionSet, BOTTOM_BAND, COMBINATIONS,
};
#[cfg(feature = "printed-f1")]
pub use metrics::printed_f1_ratio;
pub use metrics::{metrics, report_table, ConfusionCounts, Metric, MetricsReport, Ratio, REPORT_HEADER};
