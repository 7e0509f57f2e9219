//! Monte-Carlo experiment runner.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, MipError, Result};
use crate::exec::Exec;
use crate::him::{him_detect_data, HimMode};
use crate::mip::{max_detect, min_multiround_detect, mip_detect_standardized, MipConfig};
use crate::rng::{stream_key, Domain};
use crate::robust_stats::{standardize_with, Dataset};
use crate::simbench::generators::{generate, LabeledDataset, ScenarioKind, ScenarioSpec};
use crate::simbench::lasso::{lasso_fit, LassoOptions};
use crate::simbench::metrics::{detection_metrics, false_positive_rate, fit_metrics, FitMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodTag {
    #[serde(rename = "MIP")]
    Mip,
    #[serde(rename = "HIM")]
    Him,
    MaxOnly,
    MinMultiRound,
    /// No detection; the downstream fit uses every observation.
    Full,
}

impl MethodTag {
    pub fn name(self) -> &'static str {
        match self {
            MethodTag::Mip => "MIP",
            MethodTag::Him => "HIM",
            MethodTag::MaxOnly => "MaxOnly",
            MethodTag::MinMultiRound => "MinMultiRound",
            MethodTag::Full => "Full",
        }
    }
}

impl std::str::FromStr for MethodTag {
    type Err = MipError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mip" => Ok(Self::Mip),
            "him" => Ok(Self::Him),
            "maxonly" | "max" => Ok(Self::MaxOnly),
            "minmultiround" | "min" => Ok(Self::MinMultiRound),
            "full" => Ok(Self::Full),
            other => Err(invalid(format!(
                "unknown method '{other}' (expected MIP, HIM, MaxOnly, MinMultiRound or Full)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ScenarioKind,
    pub n: usize,
    pub p: usize,
    pub n_inf: usize,
    pub mu_grid: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<MethodTag>,
    /// Detector settings; the seed is replaced per replicate.
    pub mip: MipConfig,
    pub him_mode: HimMode,
    /// Lasso settings for the downstream fit; no fit metrics when `None`.
    pub fit: Option<LassoOptions>,
    pub exec: Exec,
}

impl ExperimentSpec {
    pub fn new(kind: ScenarioKind, mu_grid: Vec<f64>, methods: Vec<MethodTag>) -> Self {
        Self {
            kind,
            n: 100,
            p: 1000,
            n_inf: 10,
            mu_grid,
            reps: 20,
            seed: 0,
            methods,
            mip: MipConfig::default(),
            him_mode: HimMode::default(),
            fit: None,
            exec: Exec::default(),
        }
    }

    fn scenario(&self, mu: f64, rep: usize) -> ScenarioSpec {
        ScenarioSpec {
            kind: self.kind,
            n: self.n,
            p: self.p,
            n_inf: if self.kind == ScenarioKind::Null { 0 } else { self.n_inf },
            mu,
            seed: self.rep_seed(rep),
        }
    }

    /// Replicate seeds do not depend on `mu`, so every grid point sees the
    /// same base draws.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        stream_key(self.seed, Domain::Replicate, [rep as u64, 0, 0])
    }
}

/// One method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub method: MethodTag,
    pub mu: f64,
    pub rep: usize,
    pub flags: Vec<usize>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub f1: Option<f64>,
    pub fit: Option<FitMetrics>,
    pub rounds_used: usize,
}

/// Means over replicates for one (method, mu) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub mu: f64,
    pub tpr_inf: Option<f64>,
    pub fpr_inf: Option<f64>,
    pub f1: Option<f64>,
    pub err: Option<f64>,
    pub tpr_vs: Option<f64>,
    pub fpr_vs: Option<f64>,
    /// Replicates that produced a detection result.
    pub reps: usize,
    pub failures: usize,
}

fn detect(
    method: MethodTag,
    labeled: &LabeledDataset,
    z: &std::result::Result<crate::robust_stats::InfluenceMatrix, MipError>,
    spec: &ExperimentSpec,
    cfg: &MipConfig,
) -> Result<(Vec<usize>, usize)> {
    let z = || z.as_ref().map_err(Clone::clone);
    let report = match method {
        MethodTag::Full => return Ok((Vec::new(), 0)),
        MethodTag::Mip => mip_detect_standardized(z()?, Some(&labeled.data), cfg)?,
        MethodTag::MaxOnly => max_detect(z()?, cfg)?,
        MethodTag::MinMultiRound => min_multiround_detect(z()?, cfg)?,
        MethodTag::Him => him_detect_data(&labeled.data, cfg.estimator, spec.him_mode, cfg.alpha0, cfg.exec)?,
    };
    Ok((report.influential, report.rounds_used))
}

fn without_rows(data: &Dataset, flags: &[usize]) -> Result<Dataset> {
    let keep: Vec<usize> = (0..data.n()).filter(|i| flags.binary_search(i).is_err()).collect();
    data.select_rows(&keep)
}

/// Runs every method on replicate `rep` at signal strength `mu`.
pub fn run_replicate(spec: &ExperimentSpec, mu: f64, rep: usize) -> Result<Vec<Result<RepOutcome>>> {
    let scenario = spec.scenario(mu, rep);
    let labeled = generate(&scenario)?;
    let cfg = MipConfig {
        seed: scenario.seed,
        ..spec.mip.clone()
    };
    let needs_z = spec
        .methods
        .iter()
        .any(|m| matches!(m, MethodTag::Mip | MethodTag::MaxOnly | MethodTag::MinMultiRound));
    let z = if needs_z {
        standardize_with(&labeled.data, cfg.estimator, None, cfg.exec)
    } else {
        Err(invalid("not standardized"))
    };
    let n = labeled.data.n();

    Ok(spec
        .methods
        .iter()
        .map(|&method| {
            let (flags, rounds_used) = detect(method, &labeled, &z, spec, &cfg)?;
            let (tpr, fpr, f1) = match method {
                MethodTag::Full => (None, None, None),
                _ if labeled.truth.is_empty() => (None, Some(false_positive_rate(&flags, &labeled.truth, n)?), None),
                _ => {
                    let m = detection_metrics(&flags, &labeled.truth, n)?;
                    (Some(m.tpr), Some(m.fpr), Some(m.f1))
                }
            };
            let fit = spec.fit.as_ref().and_then(|opts| {
                let opts = LassoOptions {
                    seed: scenario.seed,
                    ..opts.clone()
                };
                // A fit can fail when detection removed most rows; that
                // leaves the fit metrics of this replicate undefined.
                let cleaned = without_rows(&labeled.data, &flags).ok()?;
                let fit = lasso_fit(&cleaned, &opts).ok()?;
                fit_metrics(&fit.beta, &labeled.beta).ok()
            });
            Ok(RepOutcome {
                method,
                mu,
                rep,
                flags,
                tpr,
                fpr,
                f1,
                fit,
                rounds_used,
            })
        })
        .collect())
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, count) = values.flatten().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Aggregates replicate outcomes for one method at one `mu`.
pub fn summarize(method: MethodTag, mu: f64, outcomes: &[&Result<RepOutcome>]) -> MetricRow {
    let ok: Vec<&RepOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    MetricRow {
        method: method.name().to_string(),
        mu,
        tpr_inf: mean_of(ok.iter().map(|o| o.tpr)),
        fpr_inf: mean_of(ok.iter().map(|o| o.fpr)),
        f1: mean_of(ok.iter().map(|o| o.f1)),
        err: mean_of(ok.iter().map(|o| o.fit.map(|f| f.err))),
        tpr_vs: mean_of(ok.iter().map(|o| o.fit.map(|f| f.tpr_vs))),
        fpr_vs: mean_of(ok.iter().map(|o| o.fit.map(|f| f.fpr_vs))),
        reps: ok.len(),
        failures: outcomes.len() - ok.len(),
    }
}

/// Every replicate outcome, grouped by grid point then replicate.
pub fn run_outcomes(spec: &ExperimentSpec) -> Result<Vec<Vec<Vec<Result<RepOutcome>>>>> {
    if spec.reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    if spec.methods.is_empty() || spec.mu_grid.is_empty() {
        return Err(invalid("need at least one method and one grid value"));
    }
    spec.mip.validate()?;
    spec.mu_grid
        .iter()
        .map(|&mu| {
            spec.exec
                .map_range(spec.reps, |rep| run_replicate(spec, mu, rep))
                .into_iter()
                .collect()
        })
        .collect()
}

/// Mean metrics per (mu, method), ordered by grid value then by the order of
/// `spec.methods`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<MetricRow>> {
    let outcomes = run_outcomes(spec)?;
    let mut rows = Vec::new();
    for (&mu, per_rep) in spec.mu_grid.iter().zip(&outcomes) {
        for (m, &method) in spec.methods.iter().enumerate() {
            let cell: Vec<&Result<RepOutcome>> = per_rep.iter().map(|r| &r[m]).collect();
            rows.push(summarize(method, mu, &cell));
        }
    }
    Ok(rows)
}
