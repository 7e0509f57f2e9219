//! Detection rates, coefficient-recovery rates and BIC.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub tpr: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub f1: f64,
}

/// Rates of a flagged set against the true influential set among `n`
/// observations. `f1 = 2 tpr / (2 tpr + fpr + fnr)`.
pub fn detection_metrics(flags: &[usize], truth: &[usize], n: usize) -> Result<DetectionMetrics> {
    if truth.is_empty() {
        return Err(invalid("true positive rate is undefined without influential points"));
    }
    if truth.len() >= n {
        return Err(invalid("every observation is influential; false positive rate is undefined"));
    }
    let fpr = false_positive_rate(flags, truth, n)?;
    let hits = count_in(flags, truth);
    let tpr = hits as f64 / truth.len() as f64;
    let fnr = 1.0 - tpr;
    Ok(DetectionMetrics {
        tpr,
        fpr,
        fnr,
        f1: 2.0 * tpr / (2.0 * tpr + fpr + fnr),
    })
}

/// Fraction of non-influential observations that were flagged.
pub fn false_positive_rate(flags: &[usize], truth: &[usize], n: usize) -> Result<f64> {
    if let Some(&bad) = flags.iter().chain(truth).find(|&&t| t >= n) {
        return Err(invalid(format!("index {bad} out of range (n = {n})")));
    }
    let negatives = n - truth.len();
    if negatives == 0 {
        return Err(invalid("no non-influential observations"));
    }
    let false_hits = flags.len() - count_in(flags, truth);
    Ok(false_hits as f64 / negatives as f64)
}

fn count_in(flags: &[usize], truth: &[usize]) -> usize {
    flags.iter().filter(|f| truth.contains(f)).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    /// `||beta_hat - beta||_2`.
    pub err: f64,
    pub tpr_vs: f64,
    pub fpr_vs: f64,
}

/// Estimation error and support recovery of `beta_hat`.
pub fn fit_metrics(beta_hat: &Array1<f64>, beta: &Array1<f64>) -> Result<FitMetrics> {
    if beta_hat.len() != beta.len() {
        return Err(invalid(format!(
            "coefficient lengths differ: {} vs {}",
            beta_hat.len(),
            beta.len()
        )));
    }
    let support = beta.iter().filter(|v| **v != 0.0).count();
    if support == 0 {
        return Err(invalid("true support is empty; variable-selection rate is undefined"));
    }
    let nulls = beta.len() - support;
    let (mut tp, mut fp) = (0usize, 0usize);
    for (b_hat, b) in beta_hat.iter().zip(beta) {
        if *b_hat != 0.0 {
            if *b != 0.0 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let err = (beta_hat - beta).mapv(|v| v * v).sum().sqrt();
    Ok(FitMetrics {
        err,
        tpr_vs: tp as f64 / support as f64,
        fpr_vs: if nulls == 0 { 0.0 } else { fp as f64 / nulls as f64 },
    })
}

/// `n log(rss / n) + k log(n)`.
pub fn bic(rss: f64, n: usize, k: usize) -> Result<f64> {
    if !(rss > 0.0 && rss.is_finite()) || n == 0 {
        return Err(invalid("BIC needs a positive residual sum of squares and n >= 1"));
    }
    let n = n as f64;
    Ok(n * (rss / n).ln() + k as f64 * n.ln())
}
