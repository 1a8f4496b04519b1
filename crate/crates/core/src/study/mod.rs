//! Two-condition reliance study: case assignment, counterbalanced sessions,
//! assessment logging and reliance metrics.

mod events;
mod metrics;
mod render;
mod session;

pub use events::{analyze_events, export_events, parse_events, AssessmentEvent};
pub use metrics::{
    compute_decision_ratios, compute_duration, compute_performance, study_f1, ConditionReport, DecisionCounts,
    DecisionRatios, DurationStats, PerformanceBlock, PerformanceRow, RelianceReport, ScopePerformance,
};
pub use render::render_report;
pub use session::{
    assign_cases, create_batch, create_session, Assessment, Case, CaseAssignment, CaseTruth, Condition, Phase,
    StudyConfig, StudySession, TruthTable, CASES_PER_CONDITION, RIGHT_PER_CONDITION,
};
