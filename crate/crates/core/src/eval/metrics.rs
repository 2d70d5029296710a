use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{off_diagonal_pairs, CausalGraph};

/// Confusion counts over ordered off-diagonal pairs and derived rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Empty denominators give 0 for FPR, precision and recall; F is 0 when
/// `TP = 0`.
pub fn score(predicted: &CausalGraph, truth: &CausalGraph) -> Result<GraphMetrics> {
    let n = truth.n_nodes();
    if predicted.n_nodes() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: predicted.n_nodes(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (i, j) in off_diagonal_pairs(n) {
        match (predicted.has_edge(i, j), truth.has_edge(i, j)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f_score = if tp == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(GraphMetrics {
        tp,
        fp,
        tn,
        fn_,
        fpr: ratio(fp, fp + tn),
        precision,
        recall,
        f_score,
    })
}
