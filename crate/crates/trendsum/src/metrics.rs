//! Evaluation metrics: precision/recall/F1 for binary labels and the
//! tie-corrected Kendall rank correlation (tau-b).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Precision, recall and F1 for binary predictions.
///
/// Conventions: with no predicted positives, precision is 1 if there are
/// also no actual positives, else 0; recall mirrors that for actual
/// positives; F1 is 0 whenever precision + recall is 0.
pub fn precision_recall_f1(pred: &[u8], gold: &[u8]) -> Result<(f64, f64, f64)> {
    if pred.len() != gold.len() {
        return Err(Error::DimensionMismatch { expected: gold.len(), got: pred.len() });
    }
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fne = 0.0;
    for (&p, &g) in pred.iter().zip(gold) {
        match (p != 0, g != 0) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fne += 1.0,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0.0 {
        if tp + fne == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp / (tp + fp)
    };
    let recall = if tp + fne == 0.0 {
        if tp + fp == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp / (tp + fne)
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((precision, recall, f1))
}

/// Kendall rank correlation with tie correction (tau-b), by explicit pair
/// counting: tau_b = (C - D) / sqrt((C + D + Tx) (C + D + Ty)) where Tx/Ty
/// count pairs tied only in x / only in y. Errors when either input is
/// entirely tied (the correlation is undefined).
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: ys.len(), got: xs.len() });
    }
    let n = xs.len();
    let mut concordant = 0.0f64;
    let mut discordant = 0.0f64;
    let mut tied_x = 0.0f64;
    let mut tied_y = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = xs[i].partial_cmp(&xs[j]).ok_or(Error::UndefinedCorrelation)?;
            let dy = ys[i].partial_cmp(&ys[j]).ok_or(Error::UndefinedCorrelation)?;
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {}
                (Equal, _) => tied_x += 1.0,
                (_, Equal) => tied_y += 1.0,
                (a, b) if a == b => concordant += 1.0,
                _ => discordant += 1.0,
            }
        }
    }
    let denom_x = concordant + discordant + tied_x;
    let denom_y = concordant + discordant + tied_y;
    if denom_x == 0.0 || denom_y == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((concordant - discordant) / (denom_x * denom_y).sqrt())
}

/// Evaluation summary for one trained scenario model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub classifier: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub kendall_tau: f64,
    pub n_examples: usize,
    pub seed: u64,
}
