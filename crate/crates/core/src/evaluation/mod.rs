//! Metrics, the cross-validated experiment grid, length-bucket analysis and
//! report files.

mod buckets;
mod grid;
mod metrics;
mod records;
mod report;

pub use buckets::{bucket_table, length_bucket_report, Bucket, BucketScore, BucketTable, DEFAULT_BUCKET_EDGES, LOW_CONFIDENCE_N};
pub use grid::{
    default_grid, grid_rows, instance_data, row_model_spec, run_grid, ExperimentReport, FoldScore, GridConfig, GridRow, InstancePrediction, MeanStd,
    RowModel, RowReport, Section, REPORT_SCHEMA_VERSION,
};
pub use metrics::*;
pub use records::{attach_llm, base_records, extract_all, InstanceRecord, LlmOutputs};
pub use report::{emit_report, render_table};
