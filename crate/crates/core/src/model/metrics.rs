use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn tally(predicted: &[Label], truth: &[Label], positive: Label) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::DimensionMismatch { expected: truth.len(), actual: predicted.len() });
        }
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == positive, t == positive) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    /// 2PR / (P + R); zero when precision and recall are both zero or undefined.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if self.tp == 0 || denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.tp + self.fp + self.fn_ + self.tn;
        if n == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / n as f64
        }
    }
}

pub fn f1_score(predicted: &[Label], truth: &[Label], positive: Label) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::Insufficient("F1 needs at least one prediction".into()));
    }
    Ok(Confusion::tally(predicted, truth, positive)?.f1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Correct as C, Impaired as I};

    #[test]
    fn perfect_predictions() {
        let y = [I, C, I, C];
        assert_eq!(f1_score(&y, &y, I).unwrap(), 1.0);
    }

    #[test]
    fn hand_counts() {
        // TP=3, FP=1, FN=2 → P = 0.75, R = 0.6, F1 = 2/3
        let pred = [I, I, I, I, C, C, C];
        let truth = [I, I, I, C, I, I, C];
        let c = Confusion::tally(&pred, &truth, I).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (3, 1, 2, 1));
        let (p, r) = (0.75, 0.6);
        let want = 2.0 * p * r / (p + r);
        assert!((f1_score(&pred, &truth, I).unwrap() - want).abs() < 1e-15);
        assert!((want - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_positives_anywhere_is_zero() {
        assert_eq!(f1_score(&[C, C], &[C, C], I).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_and_empty() {
        assert!(f1_score(&[C], &[C, I], I).is_err());
        assert!(f1_score(&[], &[], I).is_err());
    }
}
