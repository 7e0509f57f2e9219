//! Per-observation detection output shared by every detector.

use serde::{Deserialize, Serialize};

use crate::mip::MipConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MIP")]
    Mip,
    #[serde(rename = "HIM")]
    Him,
    #[serde(rename = "MaxOnly")]
    MaxOnly,
    #[serde(rename = "MinMultiRound")]
    MinMultiRound,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mip => "MIP",
            Method::Him => "HIM",
            Method::MaxOnly => "MaxOnly",
            Method::MinMultiRound => "MinMultiRound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    /// 0-based observation index.
    pub index: usize,
    /// Min statistic from the first pass over the full data.
    pub t_min: Option<f64>,
    /// Max statistic from the first pass over the full data.
    pub t_max: Option<f64>,
    /// The statistic the final decision was based on (checking statistic for
    /// MIP, leave-one-out statistic for HIM, ...). Absent when the observation
    /// was never tested, e.g. clean-set members in MIP.
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub influential: bool,
    pub clean_member: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub standardize_ms: f64,
    pub detect_ms: f64,
    pub checking_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub method: Method,
    pub n: usize,
    pub p: usize,
    pub alpha0: f64,
    pub records: Vec<ObservationRecord>,
    /// Indices flagged influential, ascending.
    pub influential: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clean_set: Option<Vec<usize>>,
    pub rounds_used: usize,
    pub hit_iteration_cap: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<MipConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl DetectionReport {
    pub fn flag_mask(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.influential).collect()
    }

    /// Removes wall-clock measurements so the report is a pure function of
    /// its inputs.
    pub fn without_timings(mut self) -> Self {
        self.timings = None;
        self
    }
}
