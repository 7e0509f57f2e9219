//! Data generators for the masking and swamping experiments.
//!
//! Base rows come from one random stream per row and contamination from a
//! separate stream, so replacing the first `n_inf` rows leaves every other
//! row bitwise identical to the uncontaminated draw.

use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{stream, Domain};
use crate::robust_stats::Dataset;

/// Autoregressive correlation between neighbouring predictors.
pub const AR_RHO: f64 = 0.4;
/// Variance of the noise added to influential rows.
const INF_NOISE_VAR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Null,
    Example1,
    Example2,
}

impl std::str::FromStr for ScenarioKind {
    type Err = crate::error::MipError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "null" | "0" => Ok(Self::Null),
            "1" | "example1" => Ok(Self::Example1),
            "2" | "example2" => Ok(Self::Example2),
            other => Err(invalid(format!("unknown scenario '{other}' (expected 1, 2 or null)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n: usize,
    pub p: usize,
    /// Number of influential rows; ignored for the null scenario.
    pub n_inf: usize,
    pub mu: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, mu: f64, seed: u64) -> Self {
        Self {
            kind,
            n: 100,
            p: 1000,
            n_inf: 10,
            mu,
            seed,
        }
    }

    pub fn with_size(mut self, n: usize, p: usize) -> Self {
        self.n = n;
        self.p = p;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n < 4 || self.p < 5 {
            return Err(invalid(format!("scenario needs n >= 4 and p >= 5, got n = {}, p = {}", self.n, self.p)));
        }
        if self.kind != ScenarioKind::Null && 2 * self.n_inf >= self.n {
            return Err(invalid(format!(
                "n_inf = {} must be below half of n = {}",
                self.n_inf, self.n
            )));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(invalid(format!("mu = {} must be finite and non-negative", self.mu)));
        }
        Ok(())
    }
}

/// Simulated data together with the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: Dataset,
    /// Influential rows, ascending (always `0..n_inf`).
    pub truth: Vec<usize>,
    pub beta: Array1<f64>,
}

fn leading_beta(p: usize, head: &[f64]) -> Array1<f64> {
    let mut beta = Array1::zeros(p);
    for (b, &v) in beta.iter_mut().zip(head) {
        *b = v;
    }
    beta
}

/// Rows with AR(0.4) correlation across columns and `y = X beta + eps`.
pub fn gen_base(n: usize, p: usize, beta: &Array1<f64>, seed: u64) -> Result<Dataset> {
    if beta.len() != p {
        return Err(invalid(format!("beta has length {}, expected p = {p}", beta.len())));
    }
    let innovation = (1.0 - AR_RHO * AR_RHO).sqrt();
    let mut x = Array2::zeros((n, p));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let mut rng = stream(seed, Domain::Base, [i as u64, 0, 0]);
        let mut prev: f64 = rng.sample(StandardNormal);
        x[[i, 0]] = prev;
        for j in 1..p {
            let xi: f64 = rng.sample(StandardNormal);
            prev = AR_RHO * prev + innovation * xi;
            x[[i, j]] = prev;
        }
        let eps: f64 = rng.sample(StandardNormal);
        y[i] = x.row(i).dot(beta) + eps;
    }
    Dataset::new(y, x)
}

const EXAMPLE1_BETA: [f64; 5] = [0.4, 0.5, 0.5, 0.6, 0.4];
const EXAMPLE2_BETA: [f64; 5] = [0.2, 0.4, 0.5, 0.3, 0.2];

/// Clean data with Example 1's coefficients.
pub fn gen_null(spec: &ScenarioSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let beta = leading_beta(spec.p, &EXAMPLE1_BETA);
    let data = gen_base(spec.n, spec.p, &beta, spec.seed)?;
    Ok(LabeledDataset {
        data,
        truth: Vec::new(),
        beta,
    })
}

/// Clustered near-copies of the most extreme response (masking).
///
/// Row `i` (1-based) becomes `X_{i0} + i/p` on 10 random coordinates with
/// response `Y_{i0} + sign(Y_{i0}) mu + eps i/p`. The shift follows the sign
/// of `Y_{i0}` so the cluster moves away from the bulk for either sign.
pub fn gen_example1(spec: &ScenarioSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let beta = leading_beta(p, &EXAMPLE1_BETA);
    let base = gen_base(n, p, &beta, spec.seed)?;
    let (mut y, mut x) = base.into_parts();
    let i0 = (0..n)
        .max_by(|&a, &b| y[a].abs().total_cmp(&y[b].abs()).then(b.cmp(&a)))
        .expect("n >= 4");
    let (y0, x0) = (y[i0], x.row(i0).to_owned());
    let shift = if y0 < 0.0 { -spec.mu } else { spec.mu };
    let noise = Normal::new(0.0, INF_NOISE_VAR.sqrt()).expect("valid normal");
    let set_size = 10.min(p);
    for i in 0..spec.n_inf {
        let mut rng = stream(spec.seed, Domain::Contamination, [i as u64, 0, 0]);
        let step = (i + 1) as f64 / p as f64;
        let mut row = x0.clone();
        for j in index::sample(&mut rng, p, set_size) {
            row[j] += step;
        }
        x.row_mut(i).assign(&row);
        y[i] = y0 + shift + noise.sample(&mut rng) * step;
    }
    Ok(LabeledDataset {
        data: Dataset::new(y, x)?,
        truth: (0..spec.n_inf).collect(),
        beta,
    })
}

/// Influential rows with shifted predictors and random response signs
/// (swamping).
pub fn gen_example2(spec: &ScenarioSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    if p < 20 {
        return Err(invalid(format!("example 2 needs p >= 20, got {p}")));
    }
    let beta = leading_beta(p, &EXAMPLE2_BETA);
    let base = gen_base(n, p, &beta, spec.seed)?;
    let (mut y, mut x) = base.into_parts();
    let mut beta_tilde = beta.clone();
    for j in 1..=20 {
        beta_tilde[p - 21 + j] += j as f64 * 0.005 * spec.mu;
    }
    let shifted_from = p * 9 / 10;
    let noise = Normal::new(0.0, INF_NOISE_VAR.sqrt()).expect("valid normal");
    for i in 0..spec.n_inf {
        let mut rng = stream(spec.seed, Domain::Contamination, [i as u64, 0, 0]);
        let mut row = Array1::zeros(p);
        for (j, v) in row.iter_mut().enumerate() {
            let xi: f64 = rng.sample(StandardNormal);
            *v = if j >= shifted_from { 0.5 * spec.mu + xi } else { xi };
        }
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        y[i] = sign * (row.dot(&beta_tilde) + noise.sample(&mut rng));
        x.row_mut(i).assign(&row);
    }
    Ok(LabeledDataset {
        data: Dataset::new(y, x)?,
        truth: (0..spec.n_inf).collect(),
        beta,
    })
}

pub fn generate(spec: &ScenarioSpec) -> Result<LabeledDataset> {
    match spec.kind {
        ScenarioKind::Null => gen_null(spec),
        ScenarioKind::Example1 => gen_example1(spec),
        ScenarioKind::Example2 => gen_example2(spec),
    }
}
