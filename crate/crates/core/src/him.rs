//! Leave-one-out influence measure and the single-pass detector built on it.
//!
//! With location/scale held fixed, deleting observation `k` moves the
//! marginal correlation vector by `(Z_k - mean_{t != k} Z_t) / n`, so
//! `n^2 D_k = p^-1 ||Z_k - mean_{t != k} Z_t||^2` and all `n` statistics
//! cost one pass over `Z`.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::chi2_fdr::{bh_select, PValueSet};
use crate::error::{invalid, Result};
use crate::exec::Exec;
use crate::report::{DetectionReport, Method, ObservationRecord};
use crate::robust_stats::{mean_sq_dist, refit_correlation, Dataset, EstimatorMode, InfluenceMatrix};

/// How the leave-one-out correlation vector is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HimMode {
    /// Location/scale estimated once on all observations.
    Fixed,
    /// Location/scale re-estimated on the sample with observation `k` removed.
    #[default]
    Refit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HimScores {
    /// `n^2 D_k` for every observation.
    pub statistics: Vec<f64>,
    pub pvalues: PValueSet,
}

/// `n^2 D_k` under fixed standardization.
pub fn him_statistic(z: &InfluenceMatrix, k: usize) -> Result<f64> {
    let n = z.n();
    if n < 3 {
        return Err(invalid("leave-one-out statistic needs at least 3 observations"));
    }
    if k >= n {
        return Err(invalid(format!("observation {k} out of range (n = {n})")));
    }
    let total = z.total_sum();
    Ok(loo_statistic(z, &total, k))
}

fn loo_statistic(z: &InfluenceMatrix, total: &Array1<f64>, k: usize) -> f64 {
    let row = z.row_slice(k);
    let denom = (z.n() - 1) as f64;
    let others: Vec<f64> = total
        .iter()
        .zip(row)
        .map(|(s, v)| (s - v) / denom)
        .collect();
    mean_sq_dist(row, &others)
}

pub fn him_statistics(z: &InfluenceMatrix, exec: Exec) -> Result<Vec<f64>> {
    if z.n() < 3 {
        return Err(invalid("leave-one-out statistic needs at least 3 observations"));
    }
    let total = z.total_sum();
    Ok(exec.map_range(z.n(), |k| loo_statistic(z, &total, k)))
}

/// `n^2 D_k` with location/scale re-estimated without observation `k`.
pub fn him_statistic_refit(data: &Dataset, mode: EstimatorMode, k: usize) -> Result<f64> {
    let n = data.n();
    if k >= n {
        return Err(invalid(format!("observation {k} out of range (n = {n})")));
    }
    let all: Vec<usize> = (0..n).collect();
    let full = refit_correlation(data, mode, &all)?;
    refit_against(data, mode, &full, k)
}

fn refit_against(data: &Dataset, mode: EstimatorMode, full: &Array1<f64>, k: usize) -> Result<f64> {
    let n = data.n();
    let rows: Vec<usize> = (0..n).filter(|&t| t != k).collect();
    let loo = refit_correlation(data, mode, &rows)?;
    let d = mean_sq_dist(full.as_slice().expect("contiguous"), loo.as_slice().expect("contiguous"));
    Ok((n * n) as f64 * d)
}

pub fn him_statistics_refit(data: &Dataset, mode: EstimatorMode, exec: Exec) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..data.n()).collect();
    let full = refit_correlation(data, mode, &all)?;
    exec.map_range(data.n(), |k| refit_against(data, mode, &full, k))
        .into_iter()
        .collect()
}

pub fn him_scores(z: &InfluenceMatrix, exec: Exec) -> Result<HimScores> {
    let statistics = him_statistics(z, exec)?;
    let pvalues = PValueSet::from_chi2_1(&statistics)?;
    Ok(HimScores { statistics, pvalues })
}

fn report_from_scores(scores: HimScores, n: usize, p: usize, alpha0: f64) -> Result<DetectionReport> {
    let bh = bh_select(&scores.pvalues, alpha0)?;
    let mask = bh.mask(n);
    let records = (0..n)
        .map(|i| ObservationRecord {
            index: i,
            t_min: None,
            t_max: None,
            statistic: Some(scores.statistics[i]),
            p_value: Some(scores.pvalues.as_slice()[i]),
            influential: mask[i],
            clean_member: false,
        })
        .collect();
    Ok(DetectionReport {
        method: Method::Him,
        n,
        p,
        alpha0,
        records,
        influential: bh.rejected,
        clean_set: None,
        rounds_used: 1,
        hit_iteration_cap: false,
        config: None,
        timings: None,
    })
}

/// Single-pass detector: fixed-standardization statistics, chi2(1) p-values,
/// BH at `alpha0`.
pub fn him_detect(z: &InfluenceMatrix, alpha0: f64, exec: Exec) -> Result<DetectionReport> {
    let scores = him_scores(z, exec)?;
    report_from_scores(scores, z.n(), z.p(), alpha0)
}

/// Single-pass detector on raw data with the chosen leave-one-out variant.
pub fn him_detect_data(
    data: &Dataset,
    estimator: EstimatorMode,
    mode: HimMode,
    alpha0: f64,
    exec: Exec,
) -> Result<DetectionReport> {
    match mode {
        HimMode::Fixed => {
            let z = crate::robust_stats::standardize_with(data, estimator, None, exec)?;
            him_detect(&z, alpha0, exec)
        }
        HimMode::Refit => {
            let statistics = him_statistics_refit(data, estimator, exec)?;
            let pvalues = PValueSet::from_chi2_1(&statistics)?;
            report_from_scores(HimScores { statistics, pvalues }, data.n(), data.p(), alpha0)
        }
    }
}
