use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::events::{session_events, AssessmentEvent};
use super::session::{Condition, Phase, StudySession, TruthTable};
use crate::dataset::{Component, Label};
use crate::error::{Error, Result};

/// F1 on the impaired class. A subset with no impaired ground truth and no
/// impaired ratings scores 1.0. `None` for an empty subset.
pub fn study_f1(pairs: impl IntoIterator<Item = (Label, Label)>) -> Option<f64> {
    let (mut tp, mut fp, mut fn_, mut n) = (0usize, 0usize, 0usize, 0usize);
    for (rated, truth) in pairs {
        n += 1;
        match (rated, truth) {
            (Label::Impaired, Label::Impaired) => tp += 1,
            (Label::Impaired, Label::Correct) => fp += 1,
            (Label::Correct, Label::Impaired) => fn_ += 1,
            (Label::Correct, Label::Correct) => {}
        }
    }
    if n == 0 {
        None
    } else if tp + fp + fn_ == 0 {
        Some(1.0)
    } else {
        Some(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRow {
    pub n: usize,
    /// Initial labels against ground truth.
    pub human_f1: Option<f64>,
    /// Final labels against ground truth.
    pub human_ai_f1: Option<f64>,
    /// human_ai_f1 − human_f1.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScopePerformance {
    pub all: PerformanceRow,
    pub right_ai: PerformanceRow,
    pub wrong_ai: PerformanceRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceBlock {
    pub condition: Condition,
    pub pooled: ScopePerformance,
    pub per_component: Vec<(Component, ScopePerformance)>,
}

/// Initial/final label pair for one (session, case, component).
struct Decision {
    component: Component,
    initial: Label,
    final_: Label,
    ground_truth: Label,
    ai_right: bool,
}

fn decisions(events: &[&AssessmentEvent]) -> Vec<Decision> {
    let mut initial: HashMap<(&str, &str, Component), Label> = HashMap::new();
    for e in events.iter().filter(|e| e.phase == Phase::Initial) {
        initial.insert((&e.session, &e.case, e.component), e.label);
    }
    events
        .iter()
        .filter(|e| e.phase == Phase::Final)
        .filter_map(|e| {
            initial.get(&(e.session.as_str(), e.case.as_str(), e.component)).map(|&i| Decision {
                component: e.component,
                initial: i,
                final_: e.label,
                ground_truth: e.ground_truth,
                ai_right: e.ai_right(),
            })
        })
        .collect()
}

fn row<'a>(ds: impl Iterator<Item = &'a Decision> + Clone) -> PerformanceRow {
    let human_f1 = study_f1(ds.clone().map(|d| (d.initial, d.ground_truth)));
    let human_ai_f1 = study_f1(ds.clone().map(|d| (d.final_, d.ground_truth)));
    PerformanceRow { n: ds.count(), human_f1, human_ai_f1, delta: human_f1.zip(human_ai_f1).map(|(h, a)| a - h) }
}

fn scope(ds: &[&Decision]) -> ScopePerformance {
    ScopePerformance {
        all: row(ds.iter().copied()),
        right_ai: row(ds.iter().copied().filter(|d| d.ai_right)),
        wrong_ai: row(ds.iter().copied().filter(|d| !d.ai_right)),
    }
}

fn performance_block(condition: Condition, events: &[&AssessmentEvent]) -> PerformanceBlock {
    let ds = decisions(events);
    let all: Vec<&Decision> = ds.iter().collect();
    let per_component = Component::ALL
        .iter()
        .filter_map(|&c| {
            let sub: Vec<&Decision> = ds.iter().filter(|d| d.component == c).collect();
            (!sub.is_empty()).then(|| (c, scope(&sub)))
        })
        .collect();
    PerformanceBlock { condition, pooled: scope(&all), per_component }
}

/// Human and Human + AI F1 per condition for one complete session.
pub fn compute_performance(session: &StudySession, truth: &TruthTable) -> Result<Vec<PerformanceBlock>> {
    let missing = session.missing();
    if !missing.is_empty() {
        return Err(Error::Insufficient(format!(
            "session `{}` is incomplete: {} assessments missing",
            session.session_id,
            missing.len()
        )));
    }
    let events = session_events(std::slice::from_ref(session), truth)?;
    Ok(session
        .order
        .iter()
        .map(|&c| {
            let sub: Vec<&AssessmentEvent> = events.iter().filter(|e| e.condition == c).collect();
            performance_block(c, &sub)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionCounts {
    pub agree_right: usize,
    pub reject_wrong: usize,
    pub agree_wrong: usize,
    pub reject_right: usize,
}

impl DecisionCounts {
    pub fn total(&self) -> usize {
        self.agree_right + self.reject_wrong + self.agree_wrong + self.reject_right
    }

    pub fn tally<'a>(finals: impl IntoIterator<Item = &'a AssessmentEvent>) -> Self {
        let mut c = DecisionCounts::default();
        for e in finals {
            match (e.agrees_with_ai(), e.ai_right()) {
                (true, true) => c.agree_right += 1,
                (false, false) => c.reject_wrong += 1,
                (true, false) => c.agree_wrong += 1,
                (false, true) => c.reject_right += 1,
            }
        }
        c
    }
}

/// Fractions of all final decisions. A right decision accepts a right AI
/// output or rejects a wrong one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRatios {
    pub counts: DecisionCounts,
    pub right: f64,
    pub wrong: f64,
    pub agree_right: f64,
    pub reject_wrong: f64,
    pub agree_wrong: f64,
    pub reject_right: f64,
}

impl DecisionRatios {
    pub fn from_counts(counts: DecisionCounts) -> Result<Self> {
        let n = counts.total();
        if n == 0 {
            return Err(Error::Insufficient("no final decisions".into()));
        }
        let f = |k: usize| k as f64 / n as f64;
        Ok(Self {
            counts,
            right: f(counts.agree_right + counts.reject_wrong),
            wrong: f(counts.agree_wrong + counts.reject_right),
            agree_right: f(counts.agree_right),
            reject_wrong: f(counts.reject_wrong),
            agree_wrong: f(counts.agree_wrong),
            reject_right: f(counts.reject_right),
        })
    }
}

/// Ratios over the final decisions in `events`.
pub fn compute_decision_ratios(events: &[AssessmentEvent]) -> Result<DecisionRatios> {
    DecisionRatios::from_counts(DecisionCounts::tally(events.iter().filter(|e| e.phase == Phase::Final)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub n: usize,
    /// Mean seconds from video start to submission.
    pub mean_seconds: f64,
    pub mean_initial_seconds: Option<f64>,
    pub mean_final_seconds: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean assessment duration in `condition`.
pub fn compute_duration(events: &[AssessmentEvent], condition: Condition) -> Result<DurationStats> {
    let sub: Vec<&AssessmentEvent> = events.iter().filter(|e| e.condition == condition).collect();
    if let Some(bad) = sub.iter().find(|e| !(e.t_video_start.is_finite() && e.t_submit.is_finite())) {
        return Err(Error::validation(format!("assessment of `{}` has missing timestamps", bad.case)));
    }
    let d = |e: &&AssessmentEvent| e.t_submit - e.t_video_start;
    let mean_seconds =
        mean(sub.iter().map(d)).ok_or_else(|| Error::Insufficient(format!("no assessments under {condition}")))?;
    Ok(DurationStats {
        n: sub.len(),
        mean_seconds,
        mean_initial_seconds: mean(sub.iter().filter(|e| e.phase == Phase::Initial).map(d)),
        mean_final_seconds: mean(sub.iter().filter(|e| e.phase == Phase::Final).map(d)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub n_sessions: usize,
    pub performance: PerformanceBlock,
    pub decisions: DecisionRatios,
    pub duration: DurationStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelianceReport {
    pub n_sessions: usize,
    pub incomplete_sessions: Vec<String>,
    pub conditions: Vec<ConditionReport>,
}

pub(crate) fn build_report(
    events: &[&AssessmentEvent],
    n_sessions: usize,
    incomplete: Vec<String>,
) -> Result<RelianceReport> {
    let mut conditions = Vec::new();
    for condition in Condition::ALL {
        let sub: Vec<AssessmentEvent> =
            events.iter().filter(|e| e.condition == condition).map(|e| (*e).clone()).collect();
        if sub.is_empty() {
            continue;
        }
        let refs: Vec<&AssessmentEvent> = sub.iter().collect();
        let mut sessions: Vec<&str> = sub.iter().map(|e| e.session.as_str()).collect();
        sessions.sort_unstable();
        sessions.dedup();
        conditions.push(ConditionReport {
            condition,
            n_sessions: sessions.len(),
            performance: performance_block(condition, &refs),
            decisions: compute_decision_ratios(&sub)?,
            duration: compute_duration(&sub, condition)?,
        });
    }
    Ok(RelianceReport { n_sessions, incomplete_sessions: incomplete, conditions })
}
