use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// One leave-one-subject-out fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LosoSplit {
    pub train_subjects: Vec<String>,
    pub test_subject: String,
}

/// One split per subject, in dataset subject order.
pub fn loso_splits(dataset: &Dataset) -> Result<Vec<LosoSplit>> {
    let ids = dataset.subject_ids();
    if ids.len() < 2 {
        return Err(Error::Insufficient(format!(
            "leave-one-subject-out needs at least 2 subjects, dataset has {}",
            ids.len()
        )));
    }
    Ok(ids
        .iter()
        .map(|&test| LosoSplit {
            train_subjects: ids.iter().filter(|&&s| s != test).map(|s| s.to_string()).collect(),
            test_subject: test.to_string(),
        })
        .collect())
}
