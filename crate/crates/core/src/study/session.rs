use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Component, Label};
use crate::error::{Error, Result};
use crate::model::LosoReport;

pub const CASES_PER_CONDITION: usize = 8;
/// Cases per condition whose AI output is right; the rest are wrong.
pub const RIGHT_PER_CONDITION: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "FEATURES")]
    Features,
    #[serde(rename = "EXAMPLES_FEATURES")]
    ExamplesFeatures,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Features, Condition::ExamplesFeatures];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Features => "FEATURES",
            Condition::ExamplesFeatures => "EXAMPLES_FEATURES",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Condition::Features => "Features",
            Condition::ExamplesFeatures => "Examples + Features",
        }
    }

    pub fn other(self) -> Condition {
        match self {
            Condition::Features => Condition::ExamplesFeatures,
            Condition::ExamplesFeatures => Condition::Features,
        }
    }

    /// Whether neighbor-based explanations are shown.
    pub fn shows_examples(self) -> bool {
        self == Condition::ExamplesFeatures
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FEATURES" => Ok(Condition::Features),
            "EXAMPLES_FEATURES" | "EXAMPLES+FEATURES" => Ok(Condition::ExamplesFeatures),
            _ => Err(Error::validation(format!("unknown condition `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initial,
    Final,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Initial => "initial",
            Phase::Final => "final",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case {
    pub trial_id: String,
    /// The held-out AI output on the sampling component equals the ground truth.
    pub ai_output_right: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseAssignment {
    pub condition: Condition,
    pub cases: Vec<Case>,
}

impl CaseAssignment {
    pub fn contains(&self, trial_id: &str) -> bool {
        self.cases.iter().any(|c| c.trial_id == trial_id)
    }

    pub fn trial_ids(&self) -> Vec<&str> {
        self.cases.iter().map(|c| c.trial_id.as_str()).collect()
    }

    /// 8 distinct cases, 4 right and 4 wrong.
    pub fn is_valid(&self) -> bool {
        let distinct: HashSet<&str> = self.trial_ids().into_iter().collect();
        self.cases.len() == CASES_PER_CONDITION
            && distinct.len() == CASES_PER_CONDITION
            && self.cases.iter().filter(|c| c.ai_output_right).count() == RIGHT_PER_CONDITION
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    /// Component whose right/wrong flags drive case sampling.
    pub case_component: Component,
    /// Components a participant labels for every case.
    pub components: Vec<Component>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { case_component: Component::Rom, components: Component::ALL.to_vec() }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let distinct: HashSet<Component> = self.components.iter().copied().collect();
        if self.components.is_empty() || distinct.len() != self.components.len() {
            return Err(Error::Config("study components must be a non-empty list without repeats".into()));
        }
        Ok(())
    }
}

/// Two disjoint assignments of 4 right + 4 wrong cases, sampled without
/// replacement from the held-out predictions in `loso`.
pub fn assign_cases(loso: &LosoReport, seed: u64) -> Result<[CaseAssignment; 2]> {
    let mut right: Vec<&str> = loso.predictions.iter().filter(|p| p.right).map(|p| p.trial_id.as_str()).collect();
    let mut wrong: Vec<&str> = loso.predictions.iter().filter(|p| !p.right).map(|p| p.trial_id.as_str()).collect();
    let need = 2 * RIGHT_PER_CONDITION;
    let need_wrong = 2 * (CASES_PER_CONDITION - RIGHT_PER_CONDITION);
    if right.len() < need || wrong.len() < need_wrong {
        return Err(Error::Insufficient(format!(
            "case pool has {} right and {} wrong AI outputs; need at least {need} and {need_wrong}",
            right.len(),
            wrong.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    right.shuffle(&mut rng);
    wrong.shuffle(&mut rng);
    let per_wrong = CASES_PER_CONDITION - RIGHT_PER_CONDITION;
    let mut make = |condition: Condition, slot: usize| {
        let mut cases: Vec<Case> = right[slot * RIGHT_PER_CONDITION..(slot + 1) * RIGHT_PER_CONDITION]
            .iter()
            .map(|id| Case { trial_id: id.to_string(), ai_output_right: true })
            .chain(
                wrong[slot * per_wrong..(slot + 1) * per_wrong]
                    .iter()
                    .map(|id| Case { trial_id: id.to_string(), ai_output_right: false }),
            )
            .collect();
        cases.shuffle(&mut rng);
        CaseAssignment { condition, cases }
    };
    let first = make(Condition::Features, 0);
    let second = make(Condition::ExamplesFeatures, 1);
    Ok([first, second])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub session_id: String,
    pub case_id: String,
    pub component: Component,
    pub phase: Phase,
    pub label: Label,
    /// Seconds; supplied by the client.
    pub t_video_start: f64,
    pub t_submit: f64,
}

impl Assessment {
    pub fn duration(&self) -> f64 {
        self.t_submit - self.t_video_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySession {
    pub session_id: String,
    pub participant_id: String,
    pub seed: u64,
    pub config: StudyConfig,
    /// Conditions in the order the participant meets them.
    pub order: [Condition; 2],
    /// One assignment per condition, in `order`.
    pub assignments: [CaseAssignment; 2],
    pub assessments: Vec<Assessment>,
}

fn session_from_sets(
    participant_id: &str,
    seed: u64,
    config: &StudyConfig,
    order: [Condition; 2],
    sets: [Vec<Case>; 2],
) -> StudySession {
    let [first, second] = sets;
    StudySession {
        session_id: participant_id.to_string(),
        participant_id: participant_id.to_string(),
        seed,
        config: config.clone(),
        order,
        assignments: [
            CaseAssignment { condition: order[0], cases: first },
            CaseAssignment { condition: order[1], cases: second },
        ],
        assessments: Vec::new(),
    }
}

fn draw_order(rng: &mut ChaCha8Rng) -> [Condition; 2] {
    if rng.random_bool(0.5) {
        [Condition::Features, Condition::ExamplesFeatures]
    } else {
        [Condition::ExamplesFeatures, Condition::Features]
    }
}

/// Cases come from `assign_cases(truth, seed)`; the condition order is a seeded coin flip.
pub fn create_session(
    participant_id: &str,
    loso: &LosoReport,
    seed: u64,
    config: &StudyConfig,
) -> Result<StudySession> {
    config.validate()?;
    if loso.component != config.case_component {
        return Err(Error::validation(format!(
            "case sampling uses {}, LOSO record is for {}",
            config.case_component, loso.component
        )));
    }
    let [a, b] = assign_cases(loso, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let order = draw_order(&mut rng);
    Ok(session_from_sets(participant_id, seed, config, order, [a.cases, b.cases]))
}

fn pair_seed(seed: u64, pair: usize) -> u64 {
    seed ^ (pair as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Sessions for a batch, built in pairs: the second member of a pair meets the
/// conditions in the opposite order and sees each case set under the other
/// condition. A trailing unpaired participant gets an independent session.
pub fn create_batch(
    participants: &[String],
    loso: &LosoReport,
    seed: u64,
    config: &StudyConfig,
) -> Result<Vec<StudySession>> {
    let distinct: HashSet<&String> = participants.iter().collect();
    if distinct.len() != participants.len() {
        return Err(Error::Duplicate("participant ids in a batch must be unique".into()));
    }
    let mut out = Vec::with_capacity(participants.len());
    for (pair, members) in participants.chunks(2).enumerate() {
        let s = pair_seed(seed, pair);
        let first = create_session(&members[0], loso, s, config)?;
        if let Some(second_id) = members.get(1) {
            let [x, y] = first.assignments.clone();
            // x.cases stays with x.condition's opposite and vice versa.
            let order = [first.order[1], first.order[0]];
            let sets = [x.cases, y.cases];
            out.push(first);
            out.push(session_from_sets(second_id, s, config, order, sets));
        } else {
            out.push(first);
        }
    }
    Ok(out)
}

impl StudySession {
    pub fn assignment(&self, condition: Condition) -> &CaseAssignment {
        if self.assignments[0].condition == condition {
            &self.assignments[0]
        } else {
            &self.assignments[1]
        }
    }

    pub fn condition_of(&self, case_id: &str) -> Option<Condition> {
        self.assignments.iter().find(|a| a.contains(case_id)).map(|a| a.condition)
    }

    /// Cases in presentation order.
    pub fn cases(&self) -> impl Iterator<Item = (Condition, &Case)> {
        self.assignments.iter().flat_map(|a| a.cases.iter().map(move |c| (a.condition, c)))
    }

    fn find(&self, case_id: &str, component: Component, phase: Phase) -> Option<&Assessment> {
        self.assessments.iter().find(|a| a.case_id == case_id && a.component == component && a.phase == phase)
    }

    /// Appends an assessment after checking membership, phase order, duplicates
    /// and timestamps. The session is unchanged on error.
    pub fn record_assessment(&mut self, assessment: Assessment) -> Result<()> {
        if assessment.session_id != self.session_id {
            return Err(Error::validation(format!(
                "assessment for session `{}` sent to session `{}`",
                assessment.session_id, self.session_id
            )));
        }
        if self.condition_of(&assessment.case_id).is_none() {
            return Err(Error::NotFound(format!("case `{}` in session `{}`", assessment.case_id, self.session_id)));
        }
        if !self.config.components.contains(&assessment.component) {
            return Err(Error::validation(format!("component {} is not assessed in this study", assessment.component)));
        }
        if !assessment.t_video_start.is_finite() || !assessment.t_submit.is_finite() {
            return Err(Error::validation("timestamps must be finite"));
        }
        if assessment.t_submit < assessment.t_video_start {
            return Err(Error::validation(format!(
                "t_submit {} precedes t_video_start {}",
                assessment.t_submit, assessment.t_video_start
            )));
        }
        if self.find(&assessment.case_id, assessment.component, assessment.phase).is_some() {
            return Err(Error::Duplicate(format!(
                "{} assessment of `{}` ({}) already recorded",
                assessment.phase, assessment.case_id, assessment.component
            )));
        }
        if assessment.phase == Phase::Final {
            let initial = self.find(&assessment.case_id, assessment.component, Phase::Initial).ok_or_else(|| {
                Error::PhaseOrder(format!(
                    "final assessment of `{}` ({}) before its initial assessment",
                    assessment.case_id, assessment.component
                ))
            })?;
            if assessment.t_submit < initial.t_submit {
                return Err(Error::PhaseOrder(format!(
                    "final assessment of `{}` submitted before its initial assessment",
                    assessment.case_id
                )));
            }
        }
        self.assessments.push(assessment);
        Ok(())
    }

    /// Every case has an initial and a final assessment for every component.
    pub fn is_complete(&self) -> bool {
        self.missing().is_empty()
    }

    /// (case, component, phase) triples not yet recorded.
    pub fn missing(&self) -> Vec<(String, Component, Phase)> {
        let mut out = Vec::new();
        for (_, case) in self.cases() {
            for &component in &self.config.components {
                for phase in [Phase::Initial, Phase::Final] {
                    if self.find(&case.trial_id, component, phase).is_none() {
                        out.push((case.trial_id.clone(), component, phase));
                    }
                }
            }
        }
        out
    }
}

/// Ground truth and held-out AI output for one (trial, component).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseTruth {
    pub ground_truth: Label,
    pub ai_label: Label,
}

impl CaseTruth {
    pub fn ai_right(&self) -> bool {
        self.ai_label == self.ground_truth
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthTable {
    entries: HashMap<(String, Component), CaseTruth>,
}

impl TruthTable {
    pub fn from_loso<'a>(reports: impl IntoIterator<Item = &'a LosoReport>) -> Self {
        let mut entries = HashMap::new();
        for r in reports {
            for p in &r.predictions {
                entries.insert(
                    (p.trial_id.clone(), r.component),
                    CaseTruth { ground_truth: p.ground_truth, ai_label: p.predicted },
                );
            }
        }
        Self { entries }
    }

    pub fn insert(&mut self, trial_id: &str, component: Component, truth: CaseTruth) {
        self.entries.insert((trial_id.to_string(), component), truth);
    }

    pub fn get(&self, trial_id: &str, component: Component) -> Result<CaseTruth> {
        self.entries
            .get(&(trial_id.to_string(), component))
            .copied()
            .ok_or_else(|| Error::NotFound(format!("held-out AI output for `{trial_id}` ({component})")))
    }
}
