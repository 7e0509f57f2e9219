//! The Min-Max-Checking detector and the single-statistic detectors.
//!
//! A clean set is estimated by alternating two steps on a shrinking working
//! set. The Min step removes observations whose smallest group-deletion
//! statistic is still significant; those are influential even in the most
//! favourable subset, so swamping cannot explain them. The Max step then flags
//! observations whose largest statistic is significant; once the unflagged
//! part is at least `c * n` it is taken as clean. Every other observation is
//! finally tested against the clean set.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chi2_fdr::{bh_select, chi2_1_sf, PValueSet};
use crate::error::{invalid, MipError, Result};
use crate::exec::Exec;
use crate::report::{DetectionReport, Method, ObservationRecord, Timings};
use crate::robust_stats::{mean_sq_dist, standardize_with, Dataset, EstimatorMode, InfluenceMatrix};
use crate::subsample::{min_max_all, subset_size, MinMaxStats, SubsetParams};

/// How the Min step picks observations to remove.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinStepMode {
    /// Benjamini-Hochberg at level `alpha`.
    #[default]
    Bh,
    /// The `l0` smallest p-values, every round.
    TopL0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MipConfig {
    /// Random subsets per observation.
    pub m: usize,
    /// Subset fraction; `n_sub = floor(k_sub * n_U) + 1`.
    pub k_sub: f64,
    /// Level of the Min and Max steps.
    pub alpha: f64,
    /// FDR level of the checking step (and of the single-statistic detectors).
    pub alpha0: f64,
    /// Stop once the Max step leaves at least `c * n` observations.
    pub c: f64,
    /// Fallback removal count; `max(1, ceil(0.05 n))` when unset.
    pub l0: Option<usize>,
    pub max_rounds: usize,
    pub seed: u64,
    pub estimator: EstimatorMode,
    pub min_step_mode: MinStepMode,
    pub shared_subsets: bool,
    /// Re-estimate location/scale on the clean set before checking.
    pub restandardize_clean: bool,
    /// Keep `n_sub` at its full-data value instead of recomputing it from
    /// the current working set.
    pub fixed_n_sub: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for MipConfig {
    fn default() -> Self {
        Self {
            m: 100,
            k_sub: 0.5,
            alpha: 0.05,
            alpha0: 0.05,
            c: 0.5,
            l0: None,
            max_rounds: 20,
            seed: 0,
            estimator: EstimatorMode::Robust,
            min_step_mode: MinStepMode::Bh,
            shared_subsets: false,
            restandardize_clean: false,
            fixed_n_sub: false,
            exec: Exec::default(),
        }
    }
}

impl MipConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if self.m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        if !open_unit(self.k_sub) {
            return Err(invalid(format!("k_sub = {} must lie in (0, 1)", self.k_sub)));
        }
        if !open_unit(self.alpha) || !open_unit(self.alpha0) {
            return Err(invalid("alpha and alpha0 must lie in (0, 1)"));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(invalid(format!("c = {} must lie in (0, 1]", self.c)));
        }
        if self.l0 == Some(0) {
            return Err(invalid("l0 must be at least 1"));
        }
        if self.max_rounds == 0 {
            return Err(invalid("max_rounds must be at least 1"));
        }
        Ok(())
    }

    /// Fallback removal count for a sample of size `n`.
    pub fn l0_for(&self, n: usize) -> usize {
        self.l0
            .unwrap_or_else(|| ((0.05 * n as f64).ceil() as usize).max(1))
    }

    fn params(&self, n_sub: usize, round: u32) -> SubsetParams {
        SubsetParams {
            m: self.m,
            n_sub,
            seed: self.seed,
            round,
            shared: self.shared_subsets,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    Min,
    Max,
}

/// Observations set aside by one step. Max-step entries record the flagged
/// set of that round; only Min-step entries shrink the working set.
#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    pub round: usize,
    pub step: Step,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanSetResult {
    /// Estimated clean set, ascending.
    pub clean: Vec<usize>,
    pub removed: Vec<Removal>,
    /// The Max-step flags of the final round: in the working set but not clean.
    pub max_excluded: Vec<usize>,
    pub rounds_used: usize,
    pub hit_iteration_cap: bool,
    /// Min and Max statistics of the first pass over the full data, indexed
    /// by observation.
    pub first_pass: Vec<MinMaxStats>,
}

impl CleanSetResult {
    /// Everything removed by Min steps, ascending.
    pub fn min_removed(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .removed
            .iter()
            .filter(|r| r.step == Step::Min)
            .flat_map(|r| r.indices.iter().copied())
            .collect();
        all.sort_unstable();
        all
    }
}

fn working_n_sub(cfg: &MipConfig, n: usize, n_u: usize) -> Result<usize> {
    let n_sub = if cfg.fixed_n_sub {
        subset_size(n, cfg.k_sub)
    } else {
        subset_size(n_u, cfg.k_sub)
    };
    if n_u < n_sub + 2 {
        return Err(MipError::DegenerateShrinkage {
            remaining: n_u,
            required: n_sub + 2,
        });
    }
    Ok(n_sub)
}

fn pvalues_of(stats: &[f64]) -> Result<PValueSet> {
    PValueSet::from_chi2_1(stats)
}

/// Positions (into `stats`) of the `l` largest statistics, i.e. the smallest
/// p-values without underflow ties; ties go to the lower position.
fn top_positions(stats: &[f64], l: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| stats[b].total_cmp(&stats[a]).then(a.cmp(&b)));
    order.truncate(l.min(stats.len()));
    order.sort_unstable();
    order
}

/// Estimates a clean set with the alternating Min/Max procedure.
///
/// Round `j` draws Min-step subsets under round key `2j` and Max-step subsets
/// under `2j + 1`, so no subsets are reused. When the Min step rejects nothing
/// after a failed stop test, the `l0` most significant observations are
/// removed instead so that every repeat makes progress. If `max_rounds` is
/// reached the last round's candidate is returned with `hit_iteration_cap`.
pub fn min_max_clean_set(z: &InfluenceMatrix, cfg: &MipConfig) -> Result<CleanSetResult> {
    cfg.validate()?;
    let n = z.n();
    let target = cfg.c * n as f64;
    let l0 = cfg.l0_for(n);
    let mut working: Vec<usize> = (0..n).collect();
    let mut removed = Vec::new();
    let mut first_pass = Vec::new();
    let mut candidate: Option<(Vec<usize>, Vec<usize>)> = None;

    for round in 0..cfg.max_rounds {
        let n_sub = working_n_sub(cfg, n, working.len())?;
        let stats = min_max_all(z, &working, &cfg.params(n_sub, 2 * round as u32), cfg.exec)?;
        let t_min: Vec<f64> = stats.iter().map(|s| s.t_min).collect();
        if round == 0 {
            first_pass = stats;
        }
        let drop_pos = match cfg.min_step_mode {
            MinStepMode::TopL0 => top_positions(&t_min, l0),
            MinStepMode::Bh => {
                let bh = bh_select(&pvalues_of(&t_min)?, cfg.alpha)?;
                if bh.rejected.is_empty() && round > 0 {
                    top_positions(&t_min, l0)
                } else {
                    bh.rejected
                }
            }
        };
        let dropped: Vec<usize> = drop_pos.iter().map(|&i| working[i]).collect();
        if !dropped.is_empty() {
            working.retain(|t| dropped.binary_search(t).is_err());
        }
        removed.push(Removal {
            round,
            step: Step::Min,
            indices: dropped,
        });

        let n_sub = working_n_sub(cfg, n, working.len())?;
        let stats = min_max_all(z, &working, &cfg.params(n_sub, 2 * round as u32 + 1), cfg.exec)?;
        let t_max: Vec<f64> = stats.iter().map(|s| s.t_max).collect();
        let bh = bh_select(&pvalues_of(&t_max)?, cfg.alpha)?;
        let flagged: Vec<usize> = bh.rejected.iter().map(|&i| working[i]).collect();
        let clean: Vec<usize> = working
            .iter()
            .copied()
            .filter(|t| flagged.binary_search(t).is_err())
            .collect();
        removed.push(Removal {
            round,
            step: Step::Max,
            indices: flagged.clone(),
        });
        if clean.len() as f64 >= target {
            return Ok(CleanSetResult {
                clean,
                removed,
                max_excluded: flagged,
                rounds_used: round + 1,
                hit_iteration_cap: false,
                first_pass,
            });
        }
        candidate = Some((clean, flagged));
    }

    let (clean, max_excluded) = candidate.expect("at least one round");
    Ok(CleanSetResult {
        clean,
        removed,
        max_excluded,
        rounds_used: cfg.max_rounds,
        hit_iteration_cap: true,
        first_pass,
    })
}

/// Column sums over `set`, as a plain vector.
fn set_mean(z: &InfluenceMatrix, set: &[usize]) -> Vec<f64> {
    let len = set.len() as f64;
    z.row_sum(set).iter().map(|s| s / len).collect()
}

/// `n_c^2 D_i = p^-1 ||Z_i - mean_{S_c} Z||^2` for each `i` in `targets`.
pub fn checking_statistics(
    z: &InfluenceMatrix,
    clean: &[usize],
    targets: &[usize],
    exec: Exec,
) -> Result<Vec<f64>> {
    validate_set(z, clean, "clean set")?;
    let mean = set_mean(z, clean);
    Ok(exec.map_slice(targets, |&i| mean_sq_dist(z.row_slice(i), &mean)))
}

/// Leave-one-out version for members of the clean set: each member is
/// compared with the mean of the other members. Used for diagnostics only.
pub fn clean_member_statistics(z: &InfluenceMatrix, clean: &[usize], exec: Exec) -> Result<Vec<f64>> {
    validate_set(z, clean, "clean set")?;
    if clean.len() < 2 {
        return Err(invalid("clean set needs at least two members"));
    }
    let total = z.row_sum(clean);
    let denom = (clean.len() - 1) as f64;
    Ok(exec.map_slice(clean, |&i| {
        let row = z.row_slice(i);
        let others: Vec<f64> = total.iter().zip(row).map(|(s, v)| (s - v) / denom).collect();
        mean_sq_dist(row, &others)
    }))
}

fn validate_set(z: &InfluenceMatrix, set: &[usize], what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(invalid(format!("{what} is empty")));
    }
    if let Some(&bad) = set.iter().find(|&&t| t >= z.n()) {
        return Err(invalid(format!("{what} index {bad} out of range")));
    }
    Ok(())
}

/// Tests every observation outside `clean` against it, with BH at `alpha0`.
pub fn checking_step(z: &InfluenceMatrix, clean: &[usize], alpha0: f64, exec: Exec) -> Result<DetectionReport> {
    let n = z.n();
    let mut sorted = clean.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut is_clean = vec![false; n];
    validate_set(z, &sorted, "clean set")?;
    for &t in &sorted {
        is_clean[t] = true;
    }
    let suspects: Vec<usize> = (0..n).filter(|&i| !is_clean[i]).collect();
    let stats = checking_statistics(z, &sorted, &suspects, exec)?;
    let pvals = pvalues_of(&stats)?;
    let bh = bh_select(&pvals, alpha0)?;
    let influential: Vec<usize> = bh.rejected.iter().map(|&i| suspects[i]).collect();

    let mut records: Vec<ObservationRecord> = (0..n)
        .map(|i| ObservationRecord {
            index: i,
            t_min: None,
            t_max: None,
            statistic: None,
            p_value: None,
            influential: false,
            clean_member: is_clean[i],
        })
        .collect();
    for (pos, &i) in suspects.iter().enumerate() {
        records[i].statistic = Some(stats[pos]);
        records[i].p_value = Some(pvals.as_slice()[pos]);
    }
    for &i in &influential {
        records[i].influential = true;
    }
    Ok(DetectionReport {
        method: Method::Mip,
        n,
        p: z.p(),
        alpha0,
        records,
        influential,
        clean_set: Some(sorted),
        rounds_used: 0,
        hit_iteration_cap: false,
        config: None,
        timings: None,
    })
}

/// The configuration as recorded in reports: the execution policy never
/// changes results, so it is normalized away.
fn config_echo(cfg: &MipConfig) -> MipConfig {
    MipConfig {
        exec: Exec::default(),
        ..cfg.clone()
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Full pipeline on raw data: standardize, estimate the clean set, check.
pub fn mip_detect(data: &Dataset, cfg: &MipConfig) -> Result<DetectionReport> {
    cfg.validate()?;
    let start = Instant::now();
    let z = standardize_with(data, cfg.estimator, None, cfg.exec)?;
    let standardize_ms = ms_since(start);
    let mut report = mip_detect_standardized(&z, Some(data), cfg)?;
    if let Some(t) = report.timings.as_mut() {
        t.standardize_ms = standardize_ms;
    }
    Ok(report)
}

/// Pipeline on a prebuilt influence matrix. `data` is needed only when
/// `cfg.restandardize_clean` is set.
pub fn mip_detect_standardized(
    z: &InfluenceMatrix,
    data: Option<&Dataset>,
    cfg: &MipConfig,
) -> Result<DetectionReport> {
    let start = Instant::now();
    let clean = min_max_clean_set(z, cfg)?;
    let detect_ms = ms_since(start);

    let start = Instant::now();
    let mut report = if cfg.restandardize_clean {
        let data = data.ok_or_else(|| invalid("re-standardizing on the clean set needs the raw data"))?;
        let z_clean = standardize_with(data, cfg.estimator, Some(&clean.clean), cfg.exec)?;
        checking_step(&z_clean, &clean.clean, cfg.alpha0, cfg.exec)?
    } else {
        checking_step(z, &clean.clean, cfg.alpha0, cfg.exec)?
    };
    let checking_ms = ms_since(start);

    for (rec, s) in report.records.iter_mut().zip(&clean.first_pass) {
        rec.t_min = Some(s.t_min);
        rec.t_max = Some(s.t_max);
    }
    report.rounds_used = clean.rounds_used;
    report.hit_iteration_cap = clean.hit_iteration_cap;
    report.config = Some(config_echo(cfg));
    report.timings = Some(Timings {
        standardize_ms: 0.0,
        detect_ms,
        checking_ms,
    });
    Ok(report)
}

fn first_pass(z: &InfluenceMatrix, cfg: &MipConfig) -> Result<Vec<MinMaxStats>> {
    cfg.validate()?;
    let all: Vec<usize> = (0..z.n()).collect();
    let n_sub = working_n_sub(cfg, z.n(), z.n())?;
    min_max_all(z, &all, &cfg.params(n_sub, 0), cfg.exec)
}

fn base_report(method: Method, z: &InfluenceMatrix, cfg: &MipConfig, stats: &[MinMaxStats]) -> DetectionReport {
    let records = stats
        .iter()
        .enumerate()
        .map(|(i, s)| ObservationRecord {
            index: i,
            t_min: Some(s.t_min),
            t_max: Some(s.t_max),
            statistic: None,
            p_value: None,
            influential: false,
            clean_member: false,
        })
        .collect();
    DetectionReport {
        method,
        n: z.n(),
        p: z.p(),
        alpha0: cfg.alpha0,
        records,
        influential: Vec::new(),
        clean_set: None,
        rounds_used: 1,
        hit_iteration_cap: false,
        config: Some(config_echo(cfg)),
        timings: None,
    }
}

/// Single pass of Max statistics on the full data with BH at `alpha0`.
///
/// Uses the same subsets as the first Min step of [`min_max_clean_set`], so
/// its `t_max` values equal those reported by [`mip_detect`].
pub fn max_detect(z: &InfluenceMatrix, cfg: &MipConfig) -> Result<DetectionReport> {
    let stats = first_pass(z, cfg)?;
    let t_max: Vec<f64> = stats.iter().map(|s| s.t_max).collect();
    let pvals = pvalues_of(&t_max)?;
    let bh = bh_select(&pvals, cfg.alpha0)?;
    let mut report = base_report(Method::MaxOnly, z, cfg, &stats);
    for (i, rec) in report.records.iter_mut().enumerate() {
        rec.statistic = Some(t_max[i]);
        rec.p_value = Some(pvals.as_slice()[i]);
    }
    for &i in &bh.rejected {
        report.records[i].influential = true;
    }
    report.influential = bh.rejected;
    Ok(report)
}

/// Repeated Min steps: each round tests the current working set with BH at
/// `alpha0` and removes the rejections, until a round rejects nothing.
///
/// Each record carries the statistic and p-value from the last round in
/// which that observation was tested.
pub fn min_multiround_detect(z: &InfluenceMatrix, cfg: &MipConfig) -> Result<DetectionReport> {
    let stats = first_pass(z, cfg)?;
    let mut report = base_report(Method::MinMultiRound, z, cfg, &stats);
    let n = z.n();
    let mut working: Vec<usize> = (0..n).collect();
    let mut flagged = Vec::new();
    let mut rounds_used = 0;
    let mut hit_cap = true;

    for round in 0..cfg.max_rounds {
        let t_min: Vec<f64> = if round == 0 {
            stats.iter().map(|s| s.t_min).collect()
        } else {
            let n_sub = working_n_sub(cfg, n, working.len())?;
            min_max_all(z, &working, &cfg.params(n_sub, round as u32), cfg.exec)?
                .iter()
                .map(|s| s.t_min)
                .collect()
        };
        rounds_used = round + 1;
        let pvals = pvalues_of(&t_min)?;
        for (pos, &i) in working.iter().enumerate() {
            report.records[i].statistic = Some(t_min[pos]);
            report.records[i].p_value = Some(pvals.as_slice()[pos]);
        }
        let bh = bh_select(&pvals, cfg.alpha0)?;
        if bh.rejected.is_empty() {
            hit_cap = false;
            break;
        }
        let dropped: Vec<usize> = bh.rejected.iter().map(|&i| working[i]).collect();
        working.retain(|t| dropped.binary_search(t).is_err());
        flagged.extend(dropped);
    }

    flagged.sort_unstable();
    for &i in &flagged {
        report.records[i].influential = true;
    }
    report.influential = flagged;
    report.rounds_used = rounds_used;
    report.hit_iteration_cap = hit_cap;
    Ok(report)
}

/// `chi2(1)` p-value of a statistic, for callers assembling their own tables.
pub fn p_value(statistic: f64) -> Result<f64> {
    chi2_1_sf(statistic)
}
