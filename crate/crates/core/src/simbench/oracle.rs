//! Ground-truth decomposition of the group-deletion statistic.
//!
//! With subset `A_r` split into its non-influential part `B_r` and
//! influential part `O_r`,
//! `mean_{A_r} Z - Z_k = W_non + W_inf - Z_k` where `W_non` and `W_inf` are
//! the sums over `B_r` and `O_r` divided by `|A_r|`. `p^-1 ||W_inf||^2` is
//! the joint effect of the influential points in the subset; its extremes
//! over the plan are `F_min` and `F_max`.

use crate::chi2_fdr::chi2_1_quantile;
use crate::error::{invalid, Result};
use crate::robust_stats::InfluenceMatrix;
use crate::subsample::{point_energy, SubsetPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetTerms {
    /// `p^-1 ||W_inf||^2`.
    pub influential_effect: f64,
    /// `p^-1 ||mean_{B_r} Z||^2`, zero when `B_r` is empty.
    pub clean_effect: f64,
    /// `p^-1 ||W_non + W_inf - Z_k||^2`, rebuilt from the two parts.
    pub reconstructed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleDecomposition {
    pub e_k: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub j_max: f64,
    pub subsets: Vec<SubsetTerms>,
}

impl OracleDecomposition {
    /// `E_k^{1/2} - (chi2_{1-alpha}(1))^{1/2} - F_min^{1/2}`; positive when
    /// the target stands out in every subset at level `alpha`.
    pub fn max_unmask_margin(&self, alpha: f64) -> Result<f64> {
        let q = chi2_1_quantile(1.0 - alpha)?;
        Ok(self.e_k.sqrt() - q.sqrt() - self.f_min.sqrt())
    }
}

fn sq_norm_scaled(v: &[f64], scale: f64) -> f64 {
    v.iter().map(|x| (x / scale).powi(2)).sum::<f64>() / v.len() as f64
}

/// Decomposes every subset of `plan` using the true influential set.
pub fn oracle_decomposition(z: &InfluenceMatrix, truth: &[usize], plan: &SubsetPlan) -> Result<OracleDecomposition> {
    let k = plan.target;
    if plan.subsets.is_empty() {
        return Err(invalid("plan has no subsets"));
    }
    let mut truth = truth.to_vec();
    truth.sort_unstable();
    let p = z.p();
    let zk = z.row_slice(k);
    let mut subsets = Vec::with_capacity(plan.subsets.len());
    for a in &plan.subsets {
        let size = a.len() as f64;
        let mut w_non = vec![0.0; p];
        let mut w_inf = vec![0.0; p];
        let mut clean_count = 0usize;
        for &t in a {
            let (dst, is_clean) = if truth.binary_search(&t).is_ok() {
                (&mut w_inf, false)
            } else {
                (&mut w_non, true)
            };
            clean_count += is_clean as usize;
            for (d, v) in dst.iter_mut().zip(z.row_slice(t)) {
                *d += v;
            }
        }
        let reconstructed = w_non
            .iter()
            .zip(&w_inf)
            .zip(zk)
            .map(|((a_, b), c)| (a_ / size + b / size - c).powi(2))
            .sum::<f64>()
            / p as f64;
        subsets.push(SubsetTerms {
            influential_effect: sq_norm_scaled(&w_inf, size),
            clean_effect: if clean_count == 0 {
                0.0
            } else {
                sq_norm_scaled(&w_non, clean_count as f64)
            },
            reconstructed,
        });
    }
    let f = |s: &SubsetTerms| s.influential_effect;
    Ok(OracleDecomposition {
        e_k: point_energy(z, k)?,
        f_min: subsets.iter().map(f).fold(f64::INFINITY, f64::min),
        f_max: subsets.iter().map(f).fold(f64::NEG_INFINITY, f64::max),
        j_max: subsets.iter().map(|s| s.clean_effect).fold(f64::NEG_INFINITY, f64::max),
        subsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robust_stats::{standardize, EstimatorMode};
    use crate::simbench::generators::{gen_example1, ScenarioKind, ScenarioSpec};
    use crate::subsample::{draw_subsets, group_statistic};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_z(n: usize, p: usize, seed: u64) -> InfluenceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        InfluenceMatrix::from_products(Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal)))
            .unwrap()
    }

    #[test]
    fn no_truth_means_no_influential_effect() {
        let z = random_z(20, 5, 1);
        let all: Vec<usize> = (0..20).collect();
        let plan = draw_subsets(&all, 3, 10, 11, 2, 0).unwrap();
        let d = oracle_decomposition(&z, &[], &plan).unwrap();
        assert_eq!((d.f_min, d.f_max), (0.0, 0.0));
    }

    #[test]
    fn reconstruction_matches_group_statistic() {
        let z = random_z(30, 8, 2);
        let all: Vec<usize> = (0..30).collect();
        let plan = draw_subsets(&all, 7, 25, 16, 3, 0).unwrap();
        let d = oracle_decomposition(&z, &[0, 1, 2, 3, 4], &plan).unwrap();
        for (terms, a) in d.subsets.iter().zip(&plan.subsets) {
            let direct = group_statistic(&z, a, 7, 16).unwrap();
            assert!(((terms.reconstructed - direct) / direct).abs() < 1e-10);
        }
        assert!(d.f_min <= d.f_max);
    }

    #[test]
    fn strong_masking_example_satisfies_the_unmask_inequality() {
        let spec = ScenarioSpec::new(ScenarioKind::Example1, 7.0, 31).with_size(100, 1000);
        let labeled = gen_example1(&spec).unwrap();
        let z = standardize(&labeled.data, EstimatorMode::Robust).unwrap();
        let all: Vec<usize> = (0..100).collect();
        let mut holds = 0;
        for &k in &labeled.truth {
            let plan = draw_subsets(&all, k, 100, 51, 31, 0).unwrap();
            let d = oracle_decomposition(&z, &labeled.truth, &plan).unwrap();
            if d.max_unmask_margin(0.05).unwrap() > 0.0 {
                holds += 1;
            }
        }
        assert!(holds >= 9, "inequality held for {holds} of 10 planted points");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn joint_effect_is_bounded_by_the_strongest_point(seed in 0u64..10_000, n_inf in 0usize..10, k in 0usize..40) {
            let z = random_z(40, 6, seed);
            let truth: Vec<usize> = (0..n_inf).collect();
            let all: Vec<usize> = (0..40).collect();
            // n * k_sub = 20 = |A_r|
            let plan = draw_subsets(&all, k, 20, 21, seed, 0).unwrap();
            let d = oracle_decomposition(&z, &truth, &plan).unwrap();
            let max_e = truth.iter().map(|&t| point_energy(&z, t).unwrap()).fold(0.0, f64::max);
            let r_inf = n_inf as f64 / 20.0;
            proptest::prop_assert!(d.f_min <= d.f_max);
            proptest::prop_assert!(d.f_max <= r_inf * r_inf * max_e * (1.0 + 1e-12));
        }
    }
}
