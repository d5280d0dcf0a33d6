//! Configured end-to-end runs, repeated evaluation and report output.

pub mod config;
pub mod emit;
pub mod repeat;
pub mod report;
pub mod run;

pub use config::{CohortSource, MitigationSettings, RunConfig, SexFilter};
pub use emit::{emit_repeat, emit_report, EmitOptions};
pub use repeat::{repeat_evaluate, summarize, Welford};
pub use report::{
    external_reference, LosSummary, MetricSummary, Provenance, PsiSource, RepeatReport, RunReport, SexRepeat,
    SexReport, SexStats, SplitResult, StageSeeds, StatsReport, REPORT_FORMAT_VERSION,
};
pub use run::{
    dataset_summary, evaluate_model, load_records, los_summary, prepare, prepare_encoded, records_for_sex,
    run_mitigation, run_pipeline, stats_report, stats_summary, train_model, MitigationOutcome, PreparedData,
    DECISION_THRESHOLD,
};
