//! Exercise-trial data model, JSON persistence, synthetic cohorts and
//! leave-one-subject-out splitting.

mod io;
mod split;
mod synth;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use io::{dataset_from_json, dataset_to_json, load_dataset, save_dataset, SCHEMA_VERSION};
pub use split::{loso_splits, LosoSplit};
pub use synth::{generate_synthetic, SynthConfig, SECOND_ANNOTATOR};

pub type Point3 = [f64; 3];

/// Tracked skeleton joints, in on-disk column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Head,
    Spine,
    ShoulderLeft,
    ShoulderRight,
    ElbowLeft,
    ElbowRight,
    WristLeft,
    WristRight,
}

impl Joint {
    pub const COUNT: usize = 8;

    pub const ALL: [Joint; Joint::COUNT] = [
        Joint::Head,
        Joint::Spine,
        Joint::ShoulderLeft,
        Joint::ShoulderRight,
        Joint::ElbowLeft,
        Joint::ElbowRight,
        Joint::WristLeft,
        Joint::WristRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::Head => "head",
            Joint::Spine => "spine",
            Joint::ShoulderLeft => "shoulder_left",
            Joint::ShoulderRight => "shoulder_right",
            Joint::ElbowLeft => "elbow_left",
            Joint::ElbowRight => "elbow_right",
            Joint::WristLeft => "wrist_left",
            Joint::WristRight => "wrist_right",
        }
    }

    pub fn shoulder(side: Laterality) -> Joint {
        match side {
            Laterality::Left => Joint::ShoulderLeft,
            Laterality::Right => Joint::ShoulderRight,
        }
    }

    pub fn elbow(side: Laterality) -> Joint {
        match side {
            Laterality::Left => Joint::ElbowLeft,
            Laterality::Right => Joint::ElbowRight,
        }
    }

    pub fn wrist(side: Laterality) -> Joint {
        match side {
            Laterality::Left => Joint::WristLeft,
            Laterality::Right => Joint::WristRight,
        }
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Joint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "head" => Joint::Head,
            "spine" => Joint::Spine,
            "shoulder_left" | "shoulder_l" => Joint::ShoulderLeft,
            "shoulder_right" | "shoulder_r" => Joint::ShoulderRight,
            "elbow_left" | "elbow_l" => Joint::ElbowLeft,
            "elbow_right" | "elbow_r" => Joint::ElbowRight,
            "wrist_left" | "wrist_l" => Joint::WristLeft,
            "wrist_right" | "wrist_r" => Joint::WristRight,
            other => return Err(Error::UnknownJoint(other.to_string())),
        })
    }
}

/// One skeleton sample: a timestamp plus the position of every joint in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct JointFrame {
    pub time_s: f64,
    pub positions: [Point3; Joint::COUNT],
}

impl JointFrame {
    pub fn get(&self, joint: Joint) -> Point3 {
        self.positions[joint.index()]
    }

    pub fn set(&mut self, joint: Joint, p: Point3) {
        self.positions[joint.index()] = p;
    }
}

const FRAME_WIDTH: usize = 1 + 3 * Joint::COUNT;

// Frames are stored as flat rows: [t, x1, y1, z1, ..., x8, y8, z8].
impl Serialize for JointFrame {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(FRAME_WIDTH))?;
        seq.serialize_element(&self.time_s)?;
        for p in &self.positions {
            for v in p {
                seq.serialize_element(v)?;
            }
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for JointFrame {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct FrameVisitor;

        impl<'de> Visitor<'de> for FrameVisitor {
            type Value = JointFrame;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "an array of {FRAME_WIDTH} numbers")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<JointFrame, A::Error> {
                let mut row = [0.0f64; FRAME_WIDTH];
                for (i, slot) in row.iter_mut().enumerate() {
                    *slot = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(i, &self))?;
                }
                if seq.next_element::<f64>()?.is_some() {
                    return Err(de::Error::invalid_length(FRAME_WIDTH + 1, &self));
                }
                let mut positions = [[0.0; 3]; Joint::COUNT];
                for (j, p) in positions.iter_mut().enumerate() {
                    p.copy_from_slice(&row[1 + 3 * j..4 + 3 * j]);
                }
                Ok(JointFrame { time_s: row[0], positions })
            }
        }

        deserializer.deserialize_seq(FrameVisitor)
    }
}

/// Which limb of the subject performed a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Affected,
    Unaffected,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Affected => Side::Unaffected,
            Side::Unaffected => Side::Affected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Laterality {
    Left,
    Right,
}

impl Laterality {
    pub fn opposite(self) -> Laterality {
        match self {
            Laterality::Left => Laterality::Right,
            Laterality::Right => Laterality::Left,
        }
    }
}

/// Performance component under assessment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    /// Range of motion: how closely the target position is reached.
    #[serde(rename = "ROM")]
    Rom,
    /// Compensation: unnecessary compensatory joint movement.
    #[serde(rename = "COMP")]
    Comp,
}

impl Component {
    pub const ALL: [Component; 2] = [Component::Rom, Component::Comp];

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Rom => "ROM",
            Component::Comp => "COMP",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ROM" => Ok(Component::Rom),
            "COMP" | "COMPENSATION" => Ok(Component::Comp),
            _ => Err(Error::Config(format!("unknown component `{s}` (expected ROM or COMP)"))),
        }
    }
}

/// Binary assessment outcome for one performance component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Correct,
    Impaired,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Correct, Label::Impaired];

    /// Output-class index used by the classifier.
    pub fn class_index(self) -> usize {
        match self {
            Label::Correct => 0,
            Label::Impaired => 1,
        }
    }

    pub fn from_class_index(i: usize) -> Label {
        if i == 0 {
            Label::Correct
        } else {
            Label::Impaired
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Correct => Label::Impaired,
            Label::Impaired => Label::Correct,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Correct => "correct",
            Label::Impaired => "impaired",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correct" => Ok(Label::Correct),
            "impaired" => Ok(Label::Impaired),
            _ => Err(Error::validation(format!("unknown label `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExerciseTrial {
    pub trial_id: String,
    pub subject_id: String,
    pub side: Side,
    pub trial_index: u32,
    pub frames: Vec<JointFrame>,
}

impl ExerciseTrial {
    pub fn series(&self, joint: Joint) -> impl Iterator<Item = Point3> + '_ {
        self.frames.iter().map(move |f| f.get(joint))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    /// Functional ability, 1 = unimpaired.
    pub status_score: f64,
    pub affected_side: Laterality,
    pub description: String,
}

impl SubjectProfile {
    /// Arm used for a trial on the given side.
    pub fn arm_for(&self, side: Side) -> Laterality {
        match side {
            Side::Affected => self.affected_side,
            Side::Unaffected => self.affected_side.opposite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub trial_id: String,
    pub component: Component,
    pub annotator_id: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub ground_truth_annotator: String,
    pub subjects: Vec<SubjectProfile>,
    pub trials: Vec<ExerciseTrial>,
    pub annotations: Vec<Annotation>,
}

impl Dataset {
    /// Checks every dataset invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let mut subject_ids = HashSet::new();
        for s in &self.subjects {
            if !subject_ids.insert(s.subject_id.as_str()) {
                return Err(Error::validation(format!("duplicate subject `{}`", s.subject_id)));
            }
            if !(0.0..=1.0).contains(&s.status_score) {
                return Err(Error::validation(format!(
                    "subject `{}` status_score {} outside [0, 1]",
                    s.subject_id, s.status_score
                )));
            }
        }

        let mut trial_ids = HashSet::new();
        for t in &self.trials {
            if !trial_ids.insert(t.trial_id.as_str()) {
                return Err(Error::validation(format!("duplicate trial `{}`", t.trial_id)));
            }
            if !subject_ids.contains(t.subject_id.as_str()) {
                return Err(Error::validation(format!(
                    "trial `{}` references unknown subject `{}`",
                    t.trial_id, t.subject_id
                )));
            }
            if t.trial_index < 1 {
                return Err(Error::validation(format!("trial `{}` has trial_index 0", t.trial_id)));
            }
            validate_frames(t)?;
        }

        let mut seen = HashSet::new();
        for a in &self.annotations {
            if !trial_ids.contains(a.trial_id.as_str()) {
                return Err(Error::validation(format!("annotation references unknown trial `{}`", a.trial_id)));
            }
            if !seen.insert((a.trial_id.as_str(), a.component, a.annotator_id.as_str())) {
                return Err(Error::validation(format!(
                    "duplicate annotation for trial `{}`, {}, annotator `{}`",
                    a.trial_id, a.component, a.annotator_id
                )));
            }
        }

        for t in &self.trials {
            for c in Component::ALL {
                if !seen.contains(&(t.trial_id.as_str(), c, self.ground_truth_annotator.as_str())) {
                    return Err(Error::validation(format!(
                        "trial `{}` has no ground-truth {} label from `{}`",
                        t.trial_id, c, self.ground_truth_annotator
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn subject(&self, subject_id: &str) -> Option<&SubjectProfile> {
        self.subjects.iter().find(|s| s.subject_id == subject_id)
    }

    pub fn trial(&self, trial_id: &str) -> Option<&ExerciseTrial> {
        self.trials.iter().find(|t| t.trial_id == trial_id)
    }

    pub fn subject_ids(&self) -> Vec<&str> {
        self.subjects.iter().map(|s| s.subject_id.as_str()).collect()
    }

    /// Ground-truth labels for one component, keyed by trial id.
    pub fn ground_truth(&self, component: Component) -> HashMap<&str, Label> {
        self.annotations
            .iter()
            .filter(|a| a.component == component && a.annotator_id == self.ground_truth_annotator)
            .map(|a| (a.trial_id.as_str(), a.label))
            .collect()
    }

    pub fn ground_truth_label(&self, trial_id: &str, component: Component) -> Option<Label> {
        self.annotations
            .iter()
            .find(|a| {
                a.trial_id == trial_id && a.component == component && a.annotator_id == self.ground_truth_annotator
            })
            .map(|a| a.label)
    }

    /// True when every annotator of this trial/component gave the same label.
    pub fn annotators_agree(&self, trial_id: &str, component: Component) -> Option<bool> {
        let mut labels =
            self.annotations.iter().filter(|a| a.trial_id == trial_id && a.component == component).map(|a| a.label);
        let first = labels.next()?;
        Some(labels.all(|l| l == first))
    }

    /// The same subject's matching trial on the other side, if recorded.
    pub fn counterpart(&self, trial: &ExerciseTrial) -> Option<&ExerciseTrial> {
        self.trials.iter().find(|t| {
            t.subject_id == trial.subject_id && t.side == trial.side.opposite() && t.trial_index == trial.trial_index
        })
    }
}

fn validate_frames(t: &ExerciseTrial) -> Result<()> {
    if t.frames.len() < 2 {
        return Err(Error::validation(format!(
            "trial `{}` has {} frames (need at least 2)",
            t.trial_id,
            t.frames.len()
        )));
    }
    let mut prev: Option<f64> = None;
    for (i, f) in t.frames.iter().enumerate() {
        if !f.time_s.is_finite() || f.time_s < 0.0 {
            return Err(Error::validation(format!("trial `{}` frame {i} has invalid time {}", t.trial_id, f.time_s)));
        }
        if let Some(p) = prev {
            if f.time_s <= p {
                return Err(Error::validation(format!(
                    "trial `{}` frame {i} time not strictly increasing",
                    t.trial_id
                )));
            }
        }
        prev = Some(f.time_s);
        if f.positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!("trial `{}` frame {i} has non-finite coordinates", t.trial_id)));
        }
    }
    Ok(())
}
