//! Chi-square(1) tail probabilities and the Benjamini-Hochberg step-up rule.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Smallest p-value reported on a log scale.
pub const P_FLOOR: f64 = 1e-300;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SERIES_CUTOFF: f64 = 2.0;

/// Complementary error function for `x >= 0`.
///
/// Below [`SERIES_CUTOFF`] uses the positive-term series
/// `erf(x) = 2/sqrt(pi) * exp(-x^2) * sum 2^n x^(2n+1) / (2n+1)!!`; above it,
/// the Laplace continued fraction evaluated with the modified Lentz method.
/// Both branches converge to machine precision; the switch point keeps the
/// cancellation in `1 - erf(x)` below 1e-13 relative.
pub fn erfc(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < SERIES_CUTOFF {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    // f = x + (1/2)/(x + (2/2)/(x + (3/2)/(x + ...)))
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for i in 1..10_000 {
        let a = 0.5 * i as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    0.5 * FRAC_2_SQRT_PI * (-x * x).exp() / f
}

/// `P(chi2(1) > t) = erfc(sqrt(t / 2))`.
pub fn chi2_1_sf(t: f64) -> Result<f64> {
    if !t.is_finite() || t < 0.0 {
        return Err(invalid(format!("chi-square statistic must be finite and >= 0, got {t}")));
    }
    Ok(erfc((0.5 * t).sqrt()))
}

/// The `level` quantile of chi2(1), found by bisection on the survival function.
pub fn chi2_1_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("quantile level must lie in (0, 1), got {level}")));
    }
    let target = 1.0 - level;
    let sf = |t: f64| erfc((0.5 * t).sqrt());
    let mut lo = 0.0;
    let mut hi = 1.0;
    while sf(hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sf(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `log10(max(p, 1e-300))`.
pub fn log10_p(p: f64) -> f64 {
    p.max(P_FLOOR).log10()
}

/// P-values aligned with observation indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueSet(Vec<f64>);

impl PValueSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(invalid(format!("p-value {v} at position {i} is outside [0, 1]")));
        }
        Ok(Self(values))
    }

    /// Chi-square(1) upper-tail p-values of `statistics`.
    pub fn from_chi2_1(statistics: &[f64]) -> Result<Self> {
        statistics
            .iter()
            .map(|&t| chi2_1_sf(t))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BhResult {
    /// Positions (ascending) whose p-value is at or below the threshold.
    pub rejected: Vec<usize>,
    /// Largest ordered p-value `p_(k)` with `p_(k) <= k * alpha0 / n`; `None`
    /// when no such `k` exists.
    pub threshold: Option<f64>,
    pub alpha0: f64,
}

impl BhResult {
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.rejected {
            m[i] = true;
        }
        m
    }
}

/// Benjamini-Hochberg step-up selection at FDR level `alpha0`.
///
/// Tied p-values share one decision: every position with `p <= threshold` is
/// rejected.
pub fn bh_select(p: &PValueSet, alpha0: f64) -> Result<BhResult> {
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(invalid(format!("FDR level must lie in (0, 1), got {alpha0}")));
    }
    let values = p.as_slice();
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let threshold = order
        .iter()
        .enumerate()
        .rev()
        .find(|&(rank, &i)| values[i] <= (rank + 1) as f64 * alpha0 / n as f64)
        .map(|(_, &i)| values[i]);

    let rejected = match threshold {
        Some(q) => (0..n).filter(|&i| values[i] <= q).collect(),
        None => Vec::new(),
    };
    Ok(BhResult {
        rejected,
        threshold,
        alpha0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// CDF of chi2(1) by adaptive Simpson on the substituted density
    /// `2/sqrt(2 pi) exp(-u^2/2)`, `u` in `[0, sqrt(t)]`.
    fn cdf_quadrature(t: f64) -> f64 {
        fn f(u: f64) -> f64 {
            (2.0 / (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * u * u).exp()
        }
        fn simpson(a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn adapt(a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (l, r) = (simpson(a, m), simpson(m, b));
            if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
                l + r + (l + r - whole) / 15.0
            } else {
                adapt(a, m, l, 0.5 * tol, depth - 1) + adapt(m, b, r, 0.5 * tol, depth - 1)
            }
        }
        let b = t.sqrt();
        adapt(0.0, b, simpson(0.0, b), 1e-15, 50)
    }

    #[test]
    fn sf_reference_points() {
        assert_eq!(chi2_1_sf(0.0).unwrap(), 1.0);
        assert!((chi2_1_sf(3.841458821).unwrap() - 0.05).abs() < 1e-6);
        assert!((chi2_1_sf(1.0).unwrap() - 0.3173105).abs() < 1e-6);
        // 2 * (1 - Phi(1)) to 17 digits.
        assert!((chi2_1_sf(1.0).unwrap() - 0.317_310_507_862_914_15).abs() < 1e-15);
    }

    #[test]
    fn sf_rejects_bad_input() {
        assert!(chi2_1_sf(-1e-9).is_err());
        assert!(chi2_1_sf(f64::NAN).is_err());
        assert!(chi2_1_sf(f64::INFINITY).is_err());
    }

    #[test]
    fn sf_complements_quadrature_cdf() {
        for i in 0..=200 {
            let t = i as f64 * 0.25;
            let sf = chi2_1_sf(t).unwrap();
            let cdf = cdf_quadrature(t);
            assert!((sf + cdf - 1.0).abs() < 1e-12, "t={t}: {sf} + {cdf}");
        }
    }

    #[test]
    fn sf_tail_relative_accuracy() {
        // Asymptotic expansion of erfc for large x gives an independent check
        // of the continued-fraction branch deep in the tail.
        for t in [60.0f64, 100.0, 150.0, 200.0] {
            let x = (0.5 * t).sqrt();
            let mut series = 1.0;
            let mut term = 1.0;
            for k in 1..25 {
                term *= -((2 * k - 1) as f64) / (2.0 * x * x);
                series += term;
            }
            let asym = (-x * x).exp() / (x * std::f64::consts::PI.sqrt()) * series;
            let got = chi2_1_sf(t).unwrap();
            assert!(((got - asym) / asym).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn sf_is_strictly_decreasing() {
        let mut prev = chi2_1_sf(0.0).unwrap();
        for i in 1..2000 {
            let cur = chi2_1_sf(i as f64 * 0.05).unwrap();
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn quantile_reference_points() {
        assert!((chi2_1_quantile(0.95).unwrap() - 3.8414588).abs() < 1e-5);
        assert!((chi2_1_quantile(0.5).unwrap() - 0.4549364).abs() < 1e-5);
        assert!(chi2_1_quantile(0.0).is_err());
        assert!(chi2_1_quantile(1.0).is_err());
    }

    #[test]
    fn quantile_round_trip() {
        for i in 1..100 {
            let q = i as f64 / 100.0;
            let t = chi2_1_quantile(q).unwrap();
            assert!((chi2_1_sf(t).unwrap() - (1.0 - q)).abs() < 1e-9);
        }
    }

    #[test]
    fn log10_clamps() {
        assert_eq!(log10_p(1.0), 0.0);
        assert_eq!(log10_p(0.0), -300.0);
    }

    fn bh(p: &[f64], a: f64) -> Vec<usize> {
        bh_select(&PValueSet::new(p.to_vec()).unwrap(), a)
            .unwrap()
            .rejected
    }

    /// Tries every cut point `k` and keeps the largest one satisfying the
    /// step-up condition.
    fn brute_force_step_up(p: &[f64], a: f64) -> Vec<usize> {
        let n = p.len();
        let mut best: Option<f64> = None;
        for k in 1..=n {
            // k-th smallest value
            for &cand in p {
                let below = p.iter().filter(|&&v| v < cand).count();
                let at_or_below = p.iter().filter(|&&v| v <= cand).count();
                if below < k && k <= at_or_below && cand <= k as f64 * a / n as f64 {
                    best = Some(best.map_or(cand, |b: f64| b.max(cand)));
                }
            }
        }
        match best {
            Some(q) => (0..n).filter(|&i| p[i] <= q).collect(),
            None => vec![],
        }
    }

    #[test]
    fn bh_small_cases() {
        assert!(bh(&[1.0, 1.0, 1.0], 0.05).is_empty());
        assert_eq!(bh(&[0.001, 0.2, 0.9, 0.04], 0.05), vec![0]);
        assert_eq!(bh(&[0.01, 0.001, 0.0125], 0.05), vec![0, 1, 2]);
        assert!(bh(&[], 0.05).is_empty());
        let r = bh_select(&PValueSet::new(vec![0.5, 0.7]).unwrap(), 0.05).unwrap();
        assert_eq!(r.threshold, None);
        assert!(bh_select(&PValueSet::new(vec![0.5]).unwrap(), 1.0).is_err());
        assert!(PValueSet::new(vec![0.5, 1.5]).is_err());
        assert!(PValueSet::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn bh_ties_share_a_decision() {
        // Sorted: 0.01, 0.02, 0.02, 0.02 with n = 4, alpha = 0.08:
        // rank 4 bound 0.08 admits the tie block.
        assert_eq!(bh(&[0.02, 0.01, 0.02, 0.02], 0.08), vec![0, 1, 2, 3]);
        // A tie straddling a bound is rejected together or not at all.
        let r = bh(&[0.03, 0.03, 0.9], 0.06);
        assert!(r.is_empty() || r == vec![0, 1]);
    }

    proptest! {
        #[test]
        fn bh_matches_brute_force(
            p in proptest::collection::vec(prop_oneof![0.0f64..0.02, 0.0f64..1.0], 1..50),
            a in 0.01f64..0.3,
        ) {
            prop_assert_eq!(bh(&p, a), brute_force_step_up(&p, a));
        }

        #[test]
        fn lowering_a_p_value_never_shrinks_the_rejection_set(
            p in proptest::collection::vec(0.0f64..0.2, 1..40),
            idx in any::<prop::sample::Index>(),
            factor in 0.0f64..1.0,
        ) {
            let before = bh(&p, 0.1);
            let mut q = p.clone();
            let i = idx.index(q.len());
            q[i] *= factor;
            let after = bh(&q, 0.1);
            for r in before {
                prop_assert!(after.contains(&r));
            }
        }
    }
}
