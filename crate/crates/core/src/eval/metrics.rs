use serde::{Deserialize, Serialize};

/// Per-class precision, recall and F-measure with raw counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f,
            tp,
            fp,
            fn_,
        }
    }

    /// Number of positive examples.
    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }
}

/// Per-class scores for `scores[sample][class]` against `labels[sample][class]`.
/// A prediction is positive when its score exceeds `threshold`.
pub fn f_measure(scores: &[Vec<f64>], labels: &[Vec<bool>], threshold: f64) -> Vec<Prf> {
    let n_classes = scores.first().map_or(0, Vec::len);
    assert_eq!(scores.len(), labels.len(), "score/label sample count");
    (0..n_classes)
        .map(|k| {
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for (s, l) in scores.iter().zip(labels) {
                match (s[k] > threshold, l[k]) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            Prf::from_counts(tp, fp, fn_)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counts() {
        let p = Prf::from_counts(2, 1, 1);
        assert!((p.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.f - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let labels = vec![vec![true, false], vec![false, true], vec![true, true]];
        let perfect: Vec<Vec<f64>> = labels
            .iter()
            .map(|r| r.iter().map(|&b| if b { 0.9 } else { 0.1 }).collect())
            .collect();
        assert!(f_measure(&perfect, &labels, 0.5).iter().all(|p| p.f == 1.0));
        let none = vec![vec![0.1, 0.2]; 3];
        assert!(f_measure(&none, &labels, 0.5).iter().all(|p| p.f == 0.0));
    }

    #[test]
    fn threshold_is_strict() {
        let r = f_measure(&[vec![0.5]], &[vec![true]], 0.5);
        assert_eq!(r[0].tp, 0);
    }
}
