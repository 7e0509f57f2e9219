//! Random group deletion.
//!
//! For a target observation `k`, `m` subsets `A_r` of size `n_sub - 1` are
//! drawn from the working set without `k`. Because marginal correlations are
//! row means of `Z`, adding `k` to `A_r` moves them by
//! `(Z_k - mean_{A_r} Z) / n_sub`, which gives
//! `n_sub^2 D_{r,k} = p^-1 ||mean_{A_r} Z - Z_k||^2`. The Min and Max
//! statistics are the extremes of that quantity over the `m` subsets.

use ndarray::Array1;
use rand::seq::index;

use crate::error::{invalid, Result};
use crate::exec::Exec;
use crate::rng::{stream, Domain};
use crate::robust_stats::InfluenceMatrix;

/// `n_sub = floor(k_sub * n_u) + 1` for a working set of size `n_u`.
pub fn subset_size(n_u: usize, k_sub: f64) -> usize {
    (k_sub * n_u as f64).floor() as usize + 1
}

/// The random subsets drawn for one target observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPlan {
    pub target: usize,
    pub n_sub: usize,
    /// Each subset is sorted and excludes `target`.
    pub subsets: Vec<Vec<usize>>,
    /// Column sums of `Z` over each subset, once [`SubsetPlan::cache_sums`]
    /// has been called.
    pub column_sums: Option<Vec<Array1<f64>>>,
    pub seed: u64,
    pub round: u32,
}

impl SubsetPlan {
    pub fn cache_sums(&mut self, z: &InfluenceMatrix) {
        self.column_sums = Some(self.subsets.iter().map(|s| z.row_sum(s)).collect());
    }

    /// `n_sub^2 D_{r,k}` for every subset in the plan.
    pub fn statistics(&self, z: &InfluenceMatrix) -> Vec<f64> {
        let a = (self.n_sub - 1) as f64;
        let zk = z.row_slice(self.target);
        match &self.column_sums {
            Some(sums) => sums
                .iter()
                .map(|s| statistic_from_sum(s.as_slice().expect("contiguous"), a, zk))
                .collect(),
            None => {
                let mut buf = vec![0.0; z.p()];
                self.subsets
                    .iter()
                    .map(|s| {
                        accumulate(z, s, &mut buf);
                        statistic_from_sum(&buf, a, zk)
                    })
                    .collect()
            }
        }
    }
}

fn pool_without(active: &[usize], k: usize) -> Vec<usize> {
    active.iter().copied().filter(|&t| t != k).collect()
}

fn check_sizes(pool_len: usize, m: usize, n_sub: usize) -> Result<()> {
    if m == 0 {
        return Err(invalid("need at least one subset"));
    }
    if n_sub < 2 {
        return Err(invalid(format!("subset size n_sub = {n_sub} must be at least 2")));
    }
    if n_sub - 1 > pool_len {
        return Err(invalid(format!(
            "subsets of size {} cannot be drawn from {pool_len} candidates",
            n_sub - 1
        )));
    }
    Ok(())
}

fn draw_one(pool: &[usize], size: usize, seed: u64, domain: Domain, counters: [u64; 3]) -> Vec<usize> {
    let mut rng = stream(seed, domain, counters);
    let mut s: Vec<usize> = index::sample(&mut rng, pool.len(), size)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    s.sort_unstable();
    s
}

/// Draws `m` subsets of size `n_sub - 1` from `active \ {k}`.
///
/// Indices within a subset are distinct; subsets are independent of each
/// other. Subset `r` depends only on `(seed, k, round, r)`.
pub fn draw_subsets(
    active: &[usize],
    k: usize,
    m: usize,
    n_sub: usize,
    seed: u64,
    round: u32,
) -> Result<SubsetPlan> {
    let pool = pool_without(active, k);
    check_sizes(pool.len(), m, n_sub)?;
    let subsets = (0..m)
        .map(|r| draw_one(&pool, n_sub - 1, seed, Domain::Subset, [k as u64, round as u64, r as u64]))
        .collect();
    Ok(SubsetPlan {
        target: k,
        n_sub,
        subsets,
        column_sums: None,
        seed,
        round,
    })
}

fn accumulate(z: &InfluenceMatrix, set: &[usize], buf: &mut [f64]) {
    buf.iter_mut().for_each(|v| *v = 0.0);
    for &t in set {
        for (b, v) in buf.iter_mut().zip(z.row_slice(t)) {
            *b += v;
        }
    }
}

fn statistic_from_sum(sum: &[f64], a: f64, zk: &[f64]) -> f64 {
    let ss: f64 = sum
        .iter()
        .zip(zk)
        .map(|(s, v)| {
            let d = s / a - v;
            d * d
        })
        .sum();
    ss / zk.len() as f64
}

/// `n_sub^2 D_{r,k}` for one subset.
pub fn group_statistic(z: &InfluenceMatrix, subset: &[usize], k: usize, n_sub: usize) -> Result<f64> {
    if k >= z.n() {
        return Err(invalid(format!("observation {k} out of range")));
    }
    if subset.is_empty() || subset.len() + 1 != n_sub {
        return Err(invalid(format!(
            "subset has {} members, expected n_sub - 1 = {}",
            subset.len(),
            n_sub.saturating_sub(1)
        )));
    }
    if subset.contains(&k) {
        return Err(invalid(format!("subset contains the target observation {k}")));
    }
    if let Some(&bad) = subset.iter().find(|&&t| t >= z.n()) {
        return Err(invalid(format!("subset index {bad} out of range")));
    }
    let mut buf = vec![0.0; z.p()];
    accumulate(z, subset, &mut buf);
    Ok(statistic_from_sum(&buf, subset.len() as f64, z.row_slice(k)))
}

/// `E_k = p^-1 ||Z_k||^2`.
pub fn point_energy(z: &InfluenceMatrix, k: usize) -> Result<f64> {
    if k >= z.n() {
        return Err(invalid(format!("observation {k} out of range")));
    }
    let row = z.row_slice(k);
    Ok(row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxStats {
    pub t_min: f64,
    pub t_max: f64,
    /// Per-subset values, retained only by the single-target entry point.
    pub values: Option<Vec<f64>>,
}

impl MinMaxStats {
    fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let (t_min, t_max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self {
            t_min,
            t_max,
            values: None,
        }
    }
}

/// Sampling parameters for one pass of Min/Max statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetParams {
    pub m: usize,
    pub n_sub: usize,
    pub seed: u64,
    pub round: u32,
    /// Draw one pool of subsets for the whole pass and give each target the
    /// first `m` that exclude it.
    pub shared: bool,
}

/// Min and Max statistics of one target, keeping the per-subset values.
pub fn min_max_statistics(
    z: &InfluenceMatrix,
    active: &[usize],
    k: usize,
    params: &SubsetParams,
) -> Result<MinMaxStats> {
    let values = if params.shared {
        let pool = SharedPool::draw(z, active, params)?;
        pool.values_for(z, active, k, params)?
    } else {
        draw_subsets(active, k, params.m, params.n_sub, params.seed, params.round)?.statistics(z)
    };
    let mut stats = MinMaxStats::from_values(values.iter().copied());
    stats.values = Some(values);
    Ok(stats)
}

/// Min and Max statistics of every observation in `active`, in that order.
pub fn min_max_all(
    z: &InfluenceMatrix,
    active: &[usize],
    params: &SubsetParams,
    exec: Exec,
) -> Result<Vec<MinMaxStats>> {
    check_sizes(active.len().saturating_sub(1), params.m, params.n_sub)?;
    if params.shared {
        let pool = SharedPool::draw(z, active, params)?;
        exec.map_slice(active, |&k| {
            pool.values_for(z, active, k, params)
                .map(MinMaxStats::from_values)
        })
        .into_iter()
        .collect()
    } else {
        let a = (params.n_sub - 1) as f64;
        exec.map_slice(active, |&k| {
            let pool = pool_without(active, k);
            let zk = z.row_slice(k);
            let mut buf = vec![0.0; z.p()];
            let values = (0..params.m).map(|r| {
                let s = draw_one(
                    &pool,
                    params.n_sub - 1,
                    params.seed,
                    Domain::Subset,
                    [k as u64, params.round as u64, r as u64],
                );
                accumulate(z, &s, &mut buf);
                statistic_from_sum(&buf, a, zk)
            });
            Ok(MinMaxStats::from_values(values))
        })
        .into_iter()
        .collect()
    }
}

/// One pool of subsets drawn from the whole working set, with cached sums.
struct SharedPool {
    subsets: Vec<Vec<usize>>,
    sums: Vec<Vec<f64>>,
}

impl SharedPool {
    /// Pool size; with `n_sub - 1` about half the working set, each target is
    /// excluded from roughly half the draws.
    fn pool_size(m: usize) -> usize {
        3 * m
    }

    fn draw(z: &InfluenceMatrix, active: &[usize], params: &SubsetParams) -> Result<Self> {
        check_sizes(active.len().saturating_sub(1), params.m, params.n_sub)?;
        let subsets: Vec<Vec<usize>> = (0..Self::pool_size(params.m))
            .map(|r| {
                draw_one(
                    active,
                    params.n_sub - 1,
                    params.seed,
                    Domain::SharedSubset,
                    [params.round as u64, r as u64, 0],
                )
            })
            .collect();
        let sums = subsets
            .iter()
            .map(|s| {
                let mut buf = vec![0.0; z.p()];
                accumulate(z, s, &mut buf);
                buf
            })
            .collect();
        Ok(Self { subsets, sums })
    }

    fn values_for(
        &self,
        z: &InfluenceMatrix,
        active: &[usize],
        k: usize,
        params: &SubsetParams,
    ) -> Result<Vec<f64>> {
        let a = (params.n_sub - 1) as f64;
        let zk = z.row_slice(k);
        let usable: Vec<f64> = self
            .subsets
            .iter()
            .zip(&self.sums)
            .filter(|(s, _)| s.binary_search(&k).is_err())
            .take(params.m)
            .map(|(_, sum)| statistic_from_sum(sum, a, zk))
            .collect();
        if usable.len() == params.m {
            Ok(usable)
        } else {
            // Not enough draws excluded k: fall back to a dedicated plan.
            Ok(draw_subsets(active, k, params.m, params.n_sub, params.seed, params.round)?.statistics(z))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_z(n: usize, p: usize, seed: u64) -> InfluenceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        InfluenceMatrix::from_products(Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal)))
            .unwrap()
    }

    fn params(m: usize, n_sub: usize, shared: bool) -> SubsetParams {
        SubsetParams {
            m,
            n_sub,
            seed: 99,
            round: 0,
            shared,
        }
    }

    #[test]
    fn subset_size_rule() {
        assert_eq!(subset_size(100, 0.5), 51);
        assert_eq!(subset_size(99, 0.5), 50);
        assert_eq!(subset_size(10, 0.3), 4);
    }

    #[test]
    fn forced_subset_when_pool_is_exact() {
        let active: Vec<usize> = (0..8).collect();
        let plan = draw_subsets(&active, 3, 5, 8, 1, 0).unwrap();
        for s in &plan.subsets {
            assert_eq!(s, &vec![0, 1, 2, 4, 5, 6, 7]);
        }
        assert!(draw_subsets(&active, 3, 5, 9, 1, 0).is_err());
        assert!(draw_subsets(&active, 3, 0, 4, 1, 0).is_err());
    }

    #[test]
    fn plans_are_deterministic_and_well_formed() {
        let active: Vec<usize> = (0..30).step_by(2).collect();
        let a = draw_subsets(&active, 4, 20, 6, 42, 3).unwrap();
        let b = draw_subsets(&active, 4, 20, 6, 42, 3).unwrap();
        assert_eq!(a, b);
        let c = draw_subsets(&active, 4, 20, 6, 42, 4).unwrap();
        assert_ne!(a.subsets, c.subsets);
        for s in &a.subsets {
            assert_eq!(s.len(), 5);
            assert!(!s.contains(&4));
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|t| active.contains(t)));
        }
    }

    #[test]
    fn inclusion_frequency_is_uniform() {
        let active: Vec<usize> = (0..20).collect();
        let plan = draw_subsets(&active, 0, 10_000, 11, 7, 0).unwrap();
        let mut counts = [0usize; 20];
        for s in &plan.subsets {
            for &t in s {
                counts[t] += 1;
            }
        }
        assert_eq!(counts[0], 0);
        for &c in &counts[1..] {
            let f = c as f64 / 10_000.0;
            assert!((f - 10.0 / 19.0).abs() < 0.02, "frequency {f}");
        }
    }

    #[test]
    fn group_statistic_cases() {
        let z = InfluenceMatrix::from_products(array![[1.0], [1.0], [4.0], [1.0]]).unwrap();
        assert_eq!(group_statistic(&z, &[0, 1], 2, 3).unwrap(), 9.0);
        assert_eq!(group_statistic(&z, &[0, 1], 3, 3).unwrap(), 0.0);
        assert!(group_statistic(&z, &[0, 2], 2, 3).is_err());
        assert!(group_statistic(&z, &[0, 1], 2, 4).is_err());
    }

    #[test]
    fn identity_matches_two_set_recomputation() {
        let z = random_z(30, 12, 1);
        let active: Vec<usize> = (0..30).collect();
        for k in [0usize, 7, 29] {
            let plan = draw_subsets(&active, k, 5, 13, 5, 0).unwrap();
            for s in &plan.subsets {
                let mut with_k = s.clone();
                with_k.push(k);
                let diff = z.marginal_correlation(&with_k).unwrap() - z.marginal_correlation(s).unwrap();
                let direct = 169.0 * diff.mapv(|v| v * v).sum() / 12.0;
                let fast = group_statistic(&z, s, k, 13).unwrap();
                assert!(((fast - direct) / direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cached_and_uncached_plans_agree() {
        let z = random_z(25, 9, 2);
        let active: Vec<usize> = (0..25).collect();
        let mut plan = draw_subsets(&active, 3, 12, 10, 8, 1).unwrap();
        let plain = plan.statistics(&z);
        plan.cache_sums(&z);
        let cached = plan.statistics(&z);
        for (a, b) in plain.iter().zip(&cached) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_subset_gives_equal_extremes() {
        let z = random_z(12, 4, 3);
        let active: Vec<usize> = (0..12).collect();
        let s = min_max_statistics(&z, &active, 2, &params(1, 5, false)).unwrap();
        assert_eq!(s.t_min, s.t_max);
    }

    #[test]
    fn identical_rows_give_zero_extremes() {
        let z = InfluenceMatrix::from_products(Array2::from_elem((10, 3), 0.7)).unwrap();
        let active: Vec<usize> = (0..10).collect();
        let s = min_max_statistics(&z, &active, 0, &params(8, 5, false)).unwrap();
        assert!(s.t_min.abs() < 1e-24 && s.t_max.abs() < 1e-24);
    }

    #[test]
    fn batch_replays_the_single_target_loop() {
        let z = random_z(40, 10, 4);
        let active: Vec<usize> = (0..40).filter(|t| t % 7 != 3).collect();
        for shared in [false, true] {
            let p = params(50, 17, shared);
            let all = min_max_all(&z, &active, &p, Exec::Parallel).unwrap();
            let seq = min_max_all(&z, &active, &p, Exec::Sequential).unwrap();
            assert_eq!(all, seq);
            for (i, &k) in active.iter().enumerate() {
                let replay = min_max_statistics(&z, &active, k, &p).unwrap();
                let values = replay.values.unwrap();
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(all[i].t_min, lo);
                assert_eq!(all[i].t_max, hi);
                if !shared {
                    let plan = draw_subsets(&active, k, 50, 17, p.seed, p.round).unwrap();
                    let brute: Vec<f64> = plan
                        .subsets
                        .iter()
                        .map(|s| group_statistic(&z, s, k, 17).unwrap())
                        .collect();
                    for (a, b) in values.iter().zip(&brute) {
                        assert!((a - b).abs() <= 1e-12 * b.max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn shared_pool_subsets_exclude_the_target() {
        let z = random_z(30, 5, 5);
        let active: Vec<usize> = (0..30).collect();
        let p = params(20, 16, true);
        let pool = SharedPool::draw(&z, &active, &p).unwrap();
        let vals = pool.values_for(&z, &active, 4, &p).unwrap();
        assert_eq!(vals.len(), 20);
        let expected: Vec<f64> = pool
            .subsets
            .iter()
            .filter(|s| !s.contains(&4))
            .take(20)
            .map(|s| group_statistic(&z, s, 4, 16).unwrap())
            .collect();
        for (a, b) in vals.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn point_energy_cases() {
        let z = InfluenceMatrix::from_products(array![[0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0], [1.0, -2.0, 0.5, 3.0]])
            .unwrap();
        assert_eq!(point_energy(&z, 0).unwrap(), 0.0);
        assert_eq!(point_energy(&z, 1).unwrap(), 1.0);
        assert!(point_energy(&z, 3).is_err());
    }

    #[test]
    fn point_energy_factorizes() {
        use crate::robust_stats::{standardize, Dataset, EstimatorMode};
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y = Array1::from_shape_fn(20, |_| rng.sample::<f64, _>(StandardNormal));
        let x = Array2::from_shape_fn((20, 6), |_| rng.sample::<f64, _>(StandardNormal));
        let z = standardize(&Dataset::new(y, x).unwrap(), EstimatorMode::Robust).unwrap();
        for k in 0..20 {
            let yk = z.yhat()[k];
            let xk = z.xhat().row(k);
            let factored = yk * yk * xk.mapv(|v| v * v).sum() / 6.0;
            assert!((point_energy(&z, k).unwrap() - factored).abs() < 1e-12 * factored.max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn extremes_are_ordered_and_monotone_in_m(seed in 0u64..500, k in 0usize..20, m1 in 1usize..20) {
            let z = random_z(20, 6, seed);
            let active: Vec<usize> = (0..20).collect();
            let small = min_max_statistics(&z, &active, k, &params(m1, 9, false)).unwrap();
            let large = min_max_statistics(&z, &active, k, &params(m1 + 15, 9, false)).unwrap();
            prop_assert!(0.0 <= small.t_min && small.t_min <= small.t_max);
            prop_assert!(large.t_min <= small.t_min);
            prop_assert!(large.t_max >= small.t_max);
        }
    }
}
