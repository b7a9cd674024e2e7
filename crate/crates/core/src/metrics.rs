//! Micro-averaged precision, recall and F1 over non-`O` relation candidates.
//!
//! A prediction is a true positive when it names the gold non-`O` label. A
//! non-`O` prediction that is wrong (or whose gold label is `O`) is a false
//! positive; a gold non-`O` label that is missed is a false negative. A wrong
//! non-`O` prediction for a non-`O` gold counts as both.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::NONE_LABEL;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

/// Scores are percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub total: LabelCounts,
    pub per_label: BTreeMap<String, LabelCounts>,
}

pub fn evaluate<P: AsRef<str>, G: AsRef<str>>(predictions: &[P], gold: &[G]) -> Result<EvalReport> {
    if predictions.len() != gold.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    let mut per_label: BTreeMap<String, LabelCounts> = BTreeMap::new();
    for (p, g) in predictions.iter().zip(gold) {
        let (p, g) = (p.as_ref(), g.as_ref());
        if p == g {
            if p != NONE_LABEL {
                per_label.entry(p.to_owned()).or_default().true_positive += 1;
            }
            continue;
        }
        if p != NONE_LABEL {
            per_label.entry(p.to_owned()).or_default().false_positive += 1;
        }
        if g != NONE_LABEL {
            per_label.entry(g.to_owned()).or_default().false_negative += 1;
        }
    }
    let total = per_label.values().fold(LabelCounts::default(), |acc, c| LabelCounts {
        true_positive: acc.true_positive + c.true_positive,
        false_positive: acc.false_positive + c.false_positive,
        false_negative: acc.false_negative + c.false_negative,
    });
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
    let precision = ratio(total.true_positive, total.true_positive + total.false_positive);
    let recall = ratio(total.true_positive, total.true_positive + total.false_negative);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalReport {
        precision,
        recall,
        f1,
        total,
        per_label,
    })
}

impl EvalReport {
    /// Fixed-width text table, one row per label plus the micro total.
    pub fn table(&self) -> String {
        let mut out = format!("{:<24} {:>6} {:>6} {:>6}\n", "label", "tp", "fp", "fn");
        for (label, c) in &self.per_label {
            out += &format!(
                "{:<24} {:>6} {:>6} {:>6}\n",
                label, c.true_positive, c.false_positive, c.false_negative
            );
        }
        out += &format!(
            "{:<24} {:>6} {:>6} {:>6}\nP {:.2}  R {:.2}  F1 {:.2}\n",
            "micro",
            self.total.true_positive,
            self.total.false_positive,
            self.total.false_negative,
            self.precision,
            self.recall,
            self.f1
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let gold = ["a", "O", "b", "a"];
        let r = evaluate(&gold, &gold).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (100.0, 100.0, 100.0));
    }

    #[test]
    fn hand_counted_case() {
        // 3 non-O predictions, 2 correct; 4 gold non-O.
        let pred = ["a", "b", "c", "O", "O"];
        let gold = ["a", "b", "O", "a", "b"];
        let r = evaluate(&pred, &gold).unwrap();
        assert_eq!(r.total.true_positive, 2);
        assert_eq!(r.total.false_positive, 1);
        assert_eq!(r.total.false_negative, 2);
        assert!((r.precision - 66.666_666_666_666_67).abs() < 1e-9);
        assert!((r.recall - 50.0).abs() < 1e-12);
        assert!((r.f1 - 57.142_857_142_857_14).abs() < 1e-9);
    }

    #[test]
    fn all_none_predictions() {
        let r = evaluate(&["O", "O"], &["a", "O"]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(evaluate(&["a"], &["a", "b"]).is_err());
    }

    fn label() -> impl Strategy<Value = String> {
        prop_oneof![Just("O".to_string()), Just("a".to_string()), Just("b".to_string()), Just("c".to_string())]
    }

    proptest! {
        #[test]
        fn permutation_invariant(pairs in prop::collection::vec((label(), label()), 0..40), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let split = |v: &[(String, String)]| -> (Vec<String>, Vec<String>) { v.iter().cloned().unzip() };
            let (p1, g1) = split(&pairs);
            let (p2, g2) = split(&shuffled);
            prop_assert_eq!(evaluate(&p1, &g1).unwrap(), evaluate(&p2, &g2).unwrap());
        }

        #[test]
        fn f1_is_harmonic_mean(pairs in prop::collection::vec((label(), label()), 0..40)) {
            let (p, g): (Vec<String>, Vec<String>) = pairs.into_iter().unzip();
            let r = evaluate(&p, &g).unwrap();
            if r.precision + r.recall > 0.0 {
                prop_assert!((r.f1 - 2.0 * r.precision * r.recall / (r.precision + r.recall)).abs() < 1e-9);
            } else {
                prop_assert_eq!(r.f1, 0.0);
            }
        }
    }
}
