use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::base::BaseClassifier;
use super::linalg::{dot, normalized, sigmoid, Matrix};
use super::lr::LrModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proto,
    Dfsl,
    Lr,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Proto => "proto",
            Method::Dfsl => "dfsl",
            Method::Lr => "lr",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proto" | "prototype" => Ok(Self::Proto),
            "dfsl" => Ok(Self::Dfsl),
            "lr" => Ok(Self::Lr),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

/// How one novel class is scored.
#[derive(Debug, Clone, PartialEq)]
pub enum NovelModel {
    /// Extra row of the cosine classifier.
    Weight(Vec<f64>),
    Lr(LrModel),
}

/// Scores over base classes followed by one column per novel model.
pub fn predict_joint(base: &BaseClassifier, novel: &[NovelModel], queries: &Matrix) -> Result<Matrix> {
    let base_scores = base.scores(queries)?;
    let nb = base.n_classes();
    let mut rows = Vec::with_capacity(novel.len());
    for m in novel {
        if let NovelModel::Weight(w) = m {
            if w.len() != queries.cols {
                return Err(Error::DimensionMismatch {
                    expected: queries.cols,
                    got: w.len(),
                });
            }
            rows.push(Some(normalized(w).map_err(|_| Error::ZeroNorm("novel weight".into()))?));
        } else {
            rows.push(None);
        }
    }
    let cols = nb + novel.len();
    let mut out = Matrix::zeros(queries.rows, cols);
    for (q, z) in queries.iter_rows().enumerate() {
        let row = out.row_mut(q);
        row[..nb].copy_from_slice(base_scores.row(q));
        for (j, m) in novel.iter().enumerate() {
            row[nb + j] = match (m, &rows[j]) {
                (_, Some(w)) => sigmoid(base.scale * dot(w, z)),
                (NovelModel::Lr(lr), None) => lr.predict(z),
                (NovelModel::Weight(_), None) => unreachable!(),
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> BaseClassifier {
        BaseClassifier {
            classes: vec!["a".into(), "b".into()],
            weights: Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap(),
            scale: 10.0,
            center: None,
        }
    }

    #[test]
    fn no_novel_equals_base() {
        let q = Matrix::from_rows(&[vec![0.6, 0.8, 0.0]]).unwrap();
        let b = base();
        assert_eq!(predict_joint(&b, &[], &q).unwrap(), b.scores(&q).unwrap());
    }

    #[test]
    fn self_query_scores_sigmoid_scale() {
        let q = Matrix::from_rows(&[vec![0.0, 0.6, 0.8], vec![1.0, 0.0, 0.0]]).unwrap();
        let out = predict_joint(
            &base(),
            &[NovelModel::Weight(vec![0.0, 0.6, 0.8]), NovelModel::Lr(LrModel::Prior { p: 0.3 })],
            &q,
        )
        .unwrap();
        assert_eq!((out.rows, out.cols), (2, 4));
        assert!((out.row(0)[2] - sigmoid(10.0)).abs() < 1e-12);
        assert_eq!(out.row(1)[3], 0.3);
    }

    #[test]
    fn weight_scale_invariance() {
        let q = Matrix::from_rows(&[vec![0.3, -0.2, 0.9]]).unwrap();
        let w = vec![0.1, 0.5, -0.3];
        let a = predict_joint(&base(), &[NovelModel::Weight(w.clone())], &q).unwrap();
        let w2: Vec<f64> = w.iter().map(|v| v * 7.5).collect();
        let b = predict_joint(&base(), &[NovelModel::Weight(w2)], &q).unwrap();
        assert!((a.row(0)[2] - b.row(0)[2]).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_is_error() {
        let q = Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(predict_joint(&base(), &[NovelModel::Weight(vec![0.0; 3])], &q).is_err());
    }
}
