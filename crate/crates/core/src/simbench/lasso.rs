//! Lasso by cyclic coordinate descent with cross-validated penalty.
//!
//! Minimizes `(2n)^-1 ||y - b0 - X beta||^2 + lambda ||beta||_1`. The
//! intercept is handled by centering `y` and the columns of `X`; columns are
//! not rescaled.
//!
//! Like glmnet, a path stops early once the fit is nearly saturated: when the
//! fraction of deviance explained exceeds `max_dev_ratio`, or grows by less
//! than `min_dev_change` of itself from one penalty to the next. In `p > n`
//! problems the tail of the grid is otherwise dominated by very slow
//! convergence towards an interpolating fit.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, MipError, Result};
use crate::rng::{stream, Domain};
use crate::robust_stats::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    pub n_lambda: usize,
    /// Smallest penalty as a fraction of `lambda_max`.
    pub lambda_ratio: f64,
    pub folds: usize,
    /// Converged once no coefficient moves more than this in a full sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
    pub max_dev_ratio: f64,
    pub min_dev_change: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            n_lambda: 50,
            lambda_ratio: 1e-3,
            folds: 5,
            tol: 1e-7,
            max_sweeps: 100_000,
            seed: 0,
            max_dev_ratio: 0.999,
            min_dev_change: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub beta: Array1<f64>,
    pub intercept: f64,
    /// The selected penalty.
    pub lambda: f64,
    /// Indices of non-zero coefficients.
    pub support: Vec<usize>,
    /// The penalties actually fitted; a prefix of the requested grid.
    pub lambdas: Vec<f64>,
    /// Mean squared prediction error across folds, per penalty.
    pub cv_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdResult {
    pub beta: Array1<f64>,
    pub sweeps: usize,
    /// Objective value after every sweep.
    pub objective: Vec<f64>,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Centered design stored column by column.
struct Design {
    cols: Array2<f64>,
    col_sq: Vec<f64>,
    n: usize,
}

impl Design {
    fn new(x_centered: &Array2<f64>) -> Self {
        let n = x_centered.nrows();
        let cols = x_centered.t().as_standard_layout().into_owned();
        let col_sq = cols
            .rows()
            .into_iter()
            .map(|c| c.dot(&c) / n as f64)
            .collect();
        Self { cols, col_sq, n }
    }

    fn p(&self) -> usize {
        self.cols.nrows()
    }
}

fn objective(resid: &[f64], beta: &Array1<f64>, lambda: f64) -> f64 {
    let n = resid.len() as f64;
    0.5 * resid.iter().map(|r| r * r).sum::<f64>() / n + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// `max_j |x_j^T y| / n` on centered data: the smallest penalty with an
/// all-zero solution.
pub fn lambda_max(x_centered: &Array2<f64>, y_centered: &Array1<f64>) -> f64 {
    let n = x_centered.nrows() as f64;
    x_centered
        .t()
        .dot(y_centered)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs() / n))
}

/// `count` log-spaced values from `lmax` down to `ratio * lmax`.
pub fn lambda_grid(lmax: f64, count: usize, ratio: f64) -> Vec<f64> {
    if count == 1 {
        return vec![lmax];
    }
    let step = ratio.ln() / (count - 1) as f64;
    (0..count).map(|i| lmax * (step * i as f64).exp()).collect()
}

/// Coordinate descent at a single penalty on centered inputs.
pub fn coordinate_descent(
    x_centered: &Array2<f64>,
    y_centered: &Array1<f64>,
    lambda: f64,
    warm: Option<&Array1<f64>>,
    opts: &LassoOptions,
) -> Result<CdResult> {
    let design = Design::new(x_centered);
    solve(&design, y_centered, lambda, warm, opts)
}

fn solve(
    design: &Design,
    y: &Array1<f64>,
    lambda: f64,
    warm: Option<&Array1<f64>>,
    opts: &LassoOptions,
) -> Result<CdResult> {
    let (n, p) = (design.n, design.p());
    let mut beta = warm.cloned().unwrap_or_else(|| Array1::zeros(p));
    let mut resid: Vec<f64> = y.to_vec();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (r, x) in resid.iter_mut().zip(design.cols.row(j)) {
                *r -= x * b;
            }
        }
    }

    let mut trace = Vec::new();
    let mut sweeps = 0;
    let mut active: Option<Vec<usize>> = None;
    loop {
        if sweeps == opts.max_sweeps {
            return Err(MipError::NoConvergence { sweeps });
        }
        sweeps += 1;
        let mut max_change = 0.0f64;
        let all: Vec<usize>;
        let coords: &[usize] = match &active {
            Some(a) => a,
            None => {
                all = (0..p).collect();
                &all
            }
        };
        for &j in coords {
            let cj = design.col_sq[j];
            if cj == 0.0 {
                continue;
            }
            let col = design.cols.row(j);
            let col = col.as_slice().expect("standard layout");
            let grad: f64 = col.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n as f64;
            let old = beta[j];
            let new = soft_threshold(grad + cj * old, lambda) / cj;
            if new != old {
                let delta = new - old;
                for (r, x) in resid.iter_mut().zip(col) {
                    *r -= x * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        trace.push(objective(&resid, &beta, lambda));

        match (active.is_some(), max_change < opts.tol) {
            // Active set settled: confirm with a full sweep.
            (true, true) => active = None,
            (true, false) => {}
            (false, true) => break,
            (false, false) => {
                active = Some((0..p).filter(|&j| beta[j] != 0.0).collect());
            }
        }
    }
    Ok(CdResult {
        beta,
        sweeps,
        objective: trace,
    })
}

fn center(x: &Array2<f64>, y: &Array1<f64>) -> (Array2<f64>, Array1<f64>, Array1<f64>, f64) {
    let x_mean = x.mean_axis(Axis(0)).expect("non-empty");
    let y_mean = y.mean().expect("non-empty");
    let xc = x - &x_mean;
    let yc = y.mapv(|v| v - y_mean);
    (xc, yc, x_mean, y_mean)
}

/// Warm-started fits along `lambdas`, stopping early near saturation. Never
/// stops before the fifth penalty.
fn path(design: &Design, y: &Array1<f64>, lambdas: &[f64], opts: &LassoOptions) -> Result<Vec<Array1<f64>>> {
    let total: f64 = y.iter().map(|v| v * v).sum();
    let mut out: Vec<Array1<f64>> = Vec::with_capacity(lambdas.len());
    let mut prev_ratio = 0.0;
    for (l, &lambda) in lambdas.iter().enumerate() {
        let fit = solve(design, y, lambda, out.last(), opts)?;
        let fitted = design.cols.t().dot(&fit.beta);
        let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
        let ratio = if total > 0.0 { 1.0 - rss / total } else { 1.0 };
        out.push(fit.beta);
        if l + 1 >= 5 && (ratio > opts.max_dev_ratio || ratio - prev_ratio < opts.min_dev_change * ratio) {
            break;
        }
        prev_ratio = ratio;
    }
    Ok(out)
}

/// Cross-validated Lasso: the penalty minimizing mean squared prediction
/// error over `folds` random folds, refitted on all rows.
pub fn lasso_fit(data: &Dataset, opts: &LassoOptions) -> Result<LassoFit> {
    let n = data.n();
    if opts.folds < 2 || n < 2 * opts.folds {
        return Err(invalid(format!("{} folds need at least {} rows, got {n}", opts.folds, 2 * opts.folds)));
    }
    if opts.n_lambda == 0 || !(opts.lambda_ratio > 0.0 && opts.lambda_ratio < 1.0) {
        return Err(invalid("lambda grid needs at least one value and a ratio in (0, 1)"));
    }
    let (x, y) = (data.x(), data.y());
    let (xc, yc, _, _) = center(x, y);
    let lmax = lambda_max(&xc, &yc);
    if lmax == 0.0 {
        return Err(invalid("response is uncorrelated with every predictor"));
    }
    let grid = lambda_grid(lmax, opts.n_lambda, opts.lambda_ratio);
    let full_design = Design::new(&xc);
    let full_path = path(&full_design, &yc, &grid, opts)?;
    let mut usable = full_path.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(opts.seed, Domain::CrossValidation, [0, 0, 0]));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % opts.folds;
    }

    let mut sq_err = vec![0.0; usable];
    for fold in 0..opts.folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        let (xt, yt, x_mean, y_mean) = center(&x.select(Axis(0), &train), &y.select(Axis(0), &train));
        let betas = path(&Design::new(&xt), &yt, &grid[..usable], opts)?;
        // Only penalties reached by every fold are compared.
        usable = usable.min(betas.len());
        for (err, beta) in sq_err.iter_mut().zip(&betas) {
            let b0 = y_mean - x_mean.dot(beta);
            for &i in &test {
                let r = y[i] - b0 - x.row(i).dot(beta);
                *err += r * r;
            }
        }
    }
    let cv_error: Vec<f64> = sq_err[..usable].iter().map(|e| e / n as f64).collect();
    let best = cv_error
        .iter()
        .enumerate()
        .fold(0, |b, (i, e)| if *e < cv_error[b] { i } else { b });

    let (_, _, x_mean, y_mean) = center(x, y);
    let beta = full_path[best].clone();
    let lambdas = grid[..usable].to_vec();
    let support = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    Ok(LassoFit {
        intercept: y_mean - x_mean.dot(&beta),
        beta,
        lambda: lambdas[best],
        support,
        lambdas,
        cv_error,
    })
}
