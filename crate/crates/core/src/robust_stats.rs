//! Location/scale estimation and the standardized influence matrix.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, MipError, Result};
use crate::exec::Exec;

/// Normal-consistency factor for the median absolute deviation.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// Response vector and predictor matrix (one row per observation).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Array1<f64>,
    x: Array2<f64>,
}

impl Dataset {
    pub fn new(y: Array1<f64>, x: Array2<f64>) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n {
            return Err(MipError::InvalidData(format!(
                "response has {n} entries but the predictor matrix has {} rows",
                x.nrows()
            )));
        }
        if n < 4 {
            return Err(MipError::InvalidData(format!(
                "need at least 4 observations, got {n}"
            )));
        }
        if x.ncols() == 0 {
            return Err(MipError::InvalidData("no predictor columns".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(MipError::InvalidData(format!(
                "non-finite response at row {i}"
            )));
        }
        if let Some(((i, j), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(MipError::InvalidData(format!(
                "non-finite predictor at row {i}, column {j}"
            )));
        }
        // Row access assumes row-major storage.
        let x = if x.is_standard_layout() {
            x
        } else {
            x.as_standard_layout().into_owned()
        };
        Ok(Self { y, x })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    /// The observations at `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(invalid(format!("row {bad} out of range")));
        }
        Self::new(self.y.select(Axis(0), rows), self.x.select(Axis(0), rows))
    }

    pub fn into_parts(self) -> (Array1<f64>, Array2<f64>) {
        (self.y, self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    /// Arithmetic mean and unbiased standard deviation.
    Sample,
    /// Median and MAD scaled by [`MAD_CONSISTENCY`].
    #[default]
    Robust,
}

/// Median of a finite, non-empty slice. Even lengths average the two central
/// order statistics.
pub fn median(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(invalid("median of an empty vector"));
    }
    let mut buf = v.to_vec();
    Ok(median_in_place(&mut buf))
}

fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    let mid = n / 2;
    let (left, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// `1.4826 * median(|v - median(v)|)`. A constant vector yields 0.
pub fn mad_scale(v: &[f64]) -> Result<f64> {
    let center = median(v)?;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - center).abs()).collect();
    Ok(MAD_CONSISTENCY * median_in_place(&mut dev))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_sd(v: &[f64], m: f64) -> f64 {
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (v.len() as f64 - 1.0)).sqrt()
}

/// Location and scale of `v` under `mode`.
pub fn location_scale(v: &[f64], mode: EstimatorMode) -> Result<(f64, f64)> {
    if v.is_empty() {
        return Err(invalid("location/scale of an empty vector"));
    }
    match mode {
        EstimatorMode::Sample => {
            if v.len() < 2 {
                return Err(invalid("sample standard deviation needs two values"));
            }
            let m = mean(v);
            Ok((m, sample_sd(v, m)))
        }
        EstimatorMode::Robust => {
            let mut buf = v.to_vec();
            let center = median_in_place(&mut buf);
            for x in buf.iter_mut() {
                *x = (*x - center).abs();
            }
            Ok((center, MAD_CONSISTENCY * median_in_place(&mut buf)))
        }
    }
}

/// The standardized product matrix `Z[t][j] = yhat[t] * xhat[t][j]`.
///
/// Immutable once built; safe to share across threads.
#[derive(Debug, Clone)]
pub struct InfluenceMatrix {
    z: Array2<f64>,
    yhat: Array1<f64>,
    xhat: Array2<f64>,
    y_location: f64,
    y_scale: f64,
    x_location: Array1<f64>,
    x_scale: Array1<f64>,
    mode: EstimatorMode,
}

/// Standardizes with location/scale estimated on all rows.
pub fn standardize(data: &Dataset, mode: EstimatorMode) -> Result<InfluenceMatrix> {
    standardize_with(data, mode, None, Exec::default())
}

/// Standardizes every row of `data` using location/scale estimated only on
/// `reference_rows` (all rows when `None`).
pub fn standardize_with(
    data: &Dataset,
    mode: EstimatorMode,
    reference_rows: Option<&[usize]>,
    exec: Exec,
) -> Result<InfluenceMatrix> {
    let (n, p) = (data.n(), data.p());
    let rows: Vec<usize> = match reference_rows {
        Some(r) => {
            if r.len() < 2 {
                return Err(invalid("need at least two reference rows"));
            }
            if let Some(&bad) = r.iter().find(|&&i| i >= n) {
                return Err(invalid(format!("reference row {bad} out of range")));
            }
            r.to_vec()
        }
        None => (0..n).collect(),
    };

    let y_ref: Vec<f64> = rows.iter().map(|&i| data.y[i]).collect();
    let (y_location, y_scale) = location_scale(&y_ref, mode)?;
    if !(y_scale > 0.0 && y_scale.is_finite()) {
        return Err(MipError::DegenerateColumn { column: None });
    }

    let x = data.x();
    let estimates = exec.map_range(p, |j| {
        let col: Vec<f64> = rows.iter().map(|&i| x[[i, j]]).collect();
        location_scale(&col, mode)
    });
    let mut x_location = Array1::zeros(p);
    let mut x_scale = Array1::zeros(p);
    for (j, est) in estimates.into_iter().enumerate() {
        let (loc, scale) = est?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(MipError::DegenerateColumn { column: Some(j) });
        }
        x_location[j] = loc;
        x_scale[j] = scale;
    }

    let yhat = data.y.mapv(|v| (v - y_location) / y_scale);
    let mut xhat = x.clone();
    for mut row in xhat.rows_mut() {
        for ((v, &loc), &scale) in row.iter_mut().zip(&x_location).zip(&x_scale) {
            *v = (*v - loc) / scale;
        }
    }
    let mut z = xhat.clone();
    for (mut row, &yt) in z.rows_mut().into_iter().zip(&yhat) {
        row.mapv_inplace(|v| yt * v);
    }
    debug_assert_eq!(z.dim(), (n, p));

    Ok(InfluenceMatrix {
        z,
        yhat,
        xhat,
        y_location,
        y_scale,
        x_location,
        x_scale,
        mode,
    })
}

impl InfluenceMatrix {
    /// Builds an influence matrix directly from `Z` rows, for callers that
    /// already hold standardized products. Location/scale are recorded as the
    /// identity and `yhat` as all ones.
    pub fn from_products(z: Array2<f64>) -> Result<Self> {
        let (n, p) = z.dim();
        if n == 0 || p == 0 {
            return Err(invalid("empty influence matrix"));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite entry in influence matrix"));
        }
        let z = if z.is_standard_layout() {
            z
        } else {
            z.as_standard_layout().into_owned()
        };
        Ok(Self {
            xhat: z.clone(),
            z,
            yhat: Array1::ones(n),
            y_location: 0.0,
            y_scale: 1.0,
            x_location: Array1::zeros(p),
            x_scale: Array1::ones(p),
            mode: EstimatorMode::Sample,
        })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn row(&self, t: usize) -> ArrayView1<'_, f64> {
        self.z.row(t)
    }

    /// Contiguous row slice (the matrix is always in standard layout).
    pub(crate) fn row_slice(&self, t: usize) -> &[f64] {
        let p = self.p();
        &self.z.as_slice().expect("standard layout")[t * p..(t + 1) * p]
    }

    pub fn yhat(&self) -> &Array1<f64> {
        &self.yhat
    }

    pub fn xhat(&self) -> &Array2<f64> {
        &self.xhat
    }

    pub fn y_location(&self) -> f64 {
        self.y_location
    }

    pub fn y_scale(&self) -> f64 {
        self.y_scale
    }

    pub fn x_location(&self) -> &Array1<f64> {
        &self.x_location
    }

    pub fn x_scale(&self) -> &Array1<f64> {
        &self.x_scale
    }

    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }

    /// Column sums of `Z` over `set`.
    pub fn row_sum(&self, set: &[usize]) -> Array1<f64> {
        let mut acc = vec![0.0; self.p()];
        for &t in set {
            for (a, v) in acc.iter_mut().zip(self.row_slice(t)) {
                *a += v;
            }
        }
        Array1::from(acc)
    }

    /// Column sums of `Z` over all rows.
    pub fn total_sum(&self) -> Array1<f64> {
        self.z.sum_axis(Axis(0))
    }

    /// Mean of the rows of `Z` over `set`: the vector of marginal correlation
    /// estimates computed from the observations in `set`.
    pub fn marginal_correlation(&self, set: &[usize]) -> Result<Array1<f64>> {
        if set.is_empty() {
            return Err(invalid("marginal correlation over an empty index set"));
        }
        if let Some(&bad) = set.iter().find(|&&t| t >= self.n()) {
            return Err(invalid(format!("index {bad} out of range")));
        }
        Ok(self.row_sum(set) / set.len() as f64)
    }
}

/// Marginal correlation vector computed entirely from the observations in
/// `rows`: location and scale are re-estimated on those rows before the
/// products are averaged.
pub fn refit_correlation(data: &Dataset, mode: EstimatorMode, rows: &[usize]) -> Result<Array1<f64>> {
    if rows.len() < 2 {
        return Err(invalid("need at least two rows to estimate a correlation"));
    }
    let y_ref: Vec<f64> = rows.iter().map(|&i| data.y[i]).collect();
    let (y_loc, y_scale) = location_scale(&y_ref, mode)?;
    if !(y_scale > 0.0 && y_scale.is_finite()) {
        return Err(MipError::DegenerateColumn { column: None });
    }
    let yhat: Vec<f64> = y_ref.iter().map(|v| (v - y_loc) / y_scale).collect();
    let x = data.x();
    let mut out = Array1::zeros(data.p());
    let mut col = vec![0.0; rows.len()];
    for j in 0..data.p() {
        for (c, &i) in col.iter_mut().zip(rows) {
            *c = x[[i, j]];
        }
        let (loc, scale) = location_scale(&col, mode)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(MipError::DegenerateColumn { column: Some(j) });
        }
        let s: f64 = col.iter().zip(&yhat).map(|(v, yt)| yt * (v - loc)).sum();
        out[j] = s / (scale * rows.len() as f64);
    }
    Ok(out)
}

/// `p^-1 * ||a - b||^2`.
pub(crate) fn mean_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    ss / a.len() as f64
}
