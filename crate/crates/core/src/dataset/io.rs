use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Annotation, Dataset, ExerciseTrial, SubjectProfile};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct DatasetDocRef<'a> {
    schema_version: u32,
    ground_truth_annotator: &'a str,
    subjects: &'a [SubjectProfile],
    trials: &'a [ExerciseTrial],
    annotations: &'a [Annotation],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetDoc {
    schema_version: u32,
    ground_truth_annotator: String,
    subjects: Vec<SubjectProfile>,
    trials: Vec<ExerciseTrial>,
    annotations: Vec<Annotation>,
}

/// Serializes a dataset to its canonical JSON document.
pub fn dataset_to_json(dataset: &Dataset) -> Result<String> {
    let doc = DatasetDocRef {
        schema_version: SCHEMA_VERSION,
        ground_truth_annotator: &dataset.ground_truth_annotator,
        subjects: &dataset.subjects,
        trials: &dataset.trials,
        annotations: &dataset.annotations,
    };
    serde_json::to_string(&doc).map_err(|e| Error::Parse { what: "dataset".into(), message: e.to_string() })
}

/// Parses and validates a dataset document.
pub fn dataset_from_json(text: &str) -> Result<Dataset> {
    let doc: DatasetDoc =
        serde_json::from_str(text).map_err(|e| Error::Parse { what: "dataset".into(), message: e.to_string() })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::validation(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    let dataset = Dataset {
        ground_truth_annotator: doc.ground_truth_annotator,
        subjects: doc.subjects,
        trials: doc.trials,
        annotations: doc.annotations,
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    dataset_from_json(&text)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = dataset_to_json(dataset)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SynthConfig};

    #[test]
    fn empty_document_loads() {
        let text = r#"{"schema_version":1,"ground_truth_annotator":"gt","subjects":[],"trials":[],"annotations":[]}"#;
        let d = dataset_from_json(text).unwrap();
        assert!(d.trials.is_empty());
        assert!(d.subjects.is_empty());
    }

    #[test]
    fn malformed_document_is_parse_error() {
        assert!(matches!(dataset_from_json("{not json"), Err(Error::Parse { .. })));
        assert!(matches!(dataset_from_json(r#"{"schema_version":1}"#), Err(Error::Parse { .. })));
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let text = r#"{"schema_version":2,"ground_truth_annotator":"gt","subjects":[],"trials":[],"annotations":[]}"#;
        assert!(matches!(dataset_from_json(text), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_subject_in_file_rejected() {
        let text = r#"{"schema_version":1,"ground_truth_annotator":"gt","subjects":[],
            "trials":[{"trial_id":"t","subject_id":"nobody","side":"affected","trial_index":1,
            "frames":[[0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0],
                      [1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]]}],
            "annotations":[]}"#;
        let err = dataset_from_json(text).unwrap_err();
        assert!(err.to_string().contains("unknown subject"), "{err}");
    }

    #[test]
    fn one_subject_round_trip() {
        let cfg = SynthConfig { n_subjects: 1, trials_per_side: 2, frames_per_trial: 10, ..Default::default() };
        let d = generate_synthetic(&cfg, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        save_dataset(&d, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back.subjects.len(), 1);
        assert_eq!(back, d);
        assert_eq!(dataset_to_json(&back).unwrap(), std::fs::read_to_string(&path).unwrap());
    }

    #[test]
    fn save_to_missing_directory_is_io_error() {
        let d = Dataset::default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("no").join("such").join("d.json");
        assert!(matches!(save_dataset(&d, path), Err(Error::Io { .. })));
    }
}
