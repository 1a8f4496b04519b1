use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::metrics::{build_report, RelianceReport};
use super::session::{Condition, Phase, StudySession, TruthTable};
use crate::dataset::{Component, Label};
use crate::error::{Error, Result};

/// One line of the session log export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentEvent {
    pub session: String,
    pub case: String,
    pub component: Component,
    pub phase: Phase,
    pub label: Label,
    pub t_video_start: f64,
    pub t_submit: f64,
    pub condition: Condition,
    pub ai_label: Label,
    pub ground_truth: Label,
}

impl AssessmentEvent {
    pub fn agrees_with_ai(&self) -> bool {
        self.label == self.ai_label
    }

    pub fn ai_right(&self) -> bool {
        self.ai_label == self.ground_truth
    }
}

/// Events for every logged assessment, sessions in input order, each log in
/// recording order.
pub fn session_events(sessions: &[StudySession], truth: &TruthTable) -> Result<Vec<AssessmentEvent>> {
    let mut out = Vec::new();
    for s in sessions {
        for a in &s.assessments {
            let condition = s
                .condition_of(&a.case_id)
                .ok_or_else(|| Error::NotFound(format!("case `{}` in session `{}`", a.case_id, s.session_id)))?;
            let t = truth.get(&a.case_id, a.component)?;
            out.push(AssessmentEvent {
                session: s.session_id.clone(),
                case: a.case_id.clone(),
                component: a.component,
                phase: a.phase,
                label: a.label,
                t_video_start: a.t_video_start,
                t_submit: a.t_submit,
                condition,
                ai_label: t.ai_label,
                ground_truth: t.ground_truth,
            });
        }
    }
    Ok(out)
}

/// JSON lines, one event per line, trailing newline.
pub fn export_events(sessions: &[StudySession], truth: &TruthTable) -> Result<String> {
    let mut text = String::new();
    for e in session_events(sessions, truth)? {
        text.push_str(&serde_json::to_string(&e).map_err(|e| Error::validation(e.to_string()))?);
        text.push('\n');
    }
    Ok(text)
}

/// Parses JSON lines; blank lines are skipped. Errors name the 1-based line.
pub fn parse_events(text: &str) -> Result<Vec<AssessmentEvent>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Parse { what: format!("event log line {}", i + 1), message: e.to_string() })
        })
        .collect()
}

/// A session is complete when every (case, component) it mentions has exactly one
/// initial and one final event, each condition-consistent, with valid timing.
fn session_complete(events: &[&AssessmentEvent]) -> bool {
    let mut seen: HashMap<(&str, Component), (usize, usize, Condition)> = HashMap::new();
    for e in events {
        if !(e.t_video_start.is_finite() && e.t_submit.is_finite() && e.t_submit >= e.t_video_start) {
            return false;
        }
        let entry = seen.entry((e.case.as_str(), e.component)).or_insert((0, 0, e.condition));
        if entry.2 != e.condition {
            return false;
        }
        match e.phase {
            Phase::Initial => entry.0 += 1,
            Phase::Final => entry.1 += 1,
        }
    }
    !seen.is_empty() && seen.values().all(|&(i, f, _)| i == 1 && f == 1)
}

/// Reliance report over the complete sessions in an event log. Incomplete
/// sessions are listed in the report and left out of every metric.
pub fn analyze_events(events: &[AssessmentEvent]) -> Result<RelianceReport> {
    let mut by_session: BTreeMap<&str, Vec<&AssessmentEvent>> = BTreeMap::new();
    for e in events {
        by_session.entry(e.session.as_str()).or_default().push(e);
    }
    let mut complete = Vec::new();
    let mut incomplete = Vec::new();
    for (id, evs) in &by_session {
        if session_complete(evs) {
            complete.extend(evs.iter().copied());
        } else {
            incomplete.push(id.to_string());
        }
    }
    if complete.is_empty() {
        return Err(Error::Insufficient("no complete sessions".into()));
    }
    build_report(&complete, by_session.len() - incomplete.len(), incomplete)
}
