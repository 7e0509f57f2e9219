use mip_core::him::{him_detect_data, HimMode};
use mip_core::mip::{max_detect, min_multiround_detect};
use mip_core::robust_stats::standardize;
use mip_core::simbench::{detection_metrics, generate, ScenarioKind, ScenarioSpec};
use mip_core::{mip_detect, EstimatorMode, Exec, MipConfig};

fn scenario(kind: ScenarioKind, mu: f64, seed: u64) -> ScenarioSpec {
    ScenarioSpec::new(kind, mu, seed).with_size(100, 300)
}

#[test]
fn sequential_and_parallel_reports_are_identical() {
    let labeled = generate(&scenario(ScenarioKind::Example2, 8.0, 9)).unwrap();
    let run = |exec| {
        let cfg = MipConfig { seed: 5, exec, ..MipConfig::default() };
        serde_json::to_string(&mip_detect(&labeled.data, &cfg).unwrap().without_timings()).unwrap()
    };
    assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
}

#[test]
fn strong_example1_signal_is_recovered() {
    for seed in 0..3 {
        let labeled = generate(&scenario(ScenarioKind::Example1, 8.0, seed)).unwrap();
        let report = mip_detect(&labeled.data, &MipConfig { seed, ..MipConfig::default() }).unwrap();
        let m = detection_metrics(&report.influential, &labeled.truth, 100).unwrap();
        assert!(m.tpr >= 0.9, "seed {seed}: tpr {}", m.tpr);
        assert!(m.fpr <= 0.05, "seed {seed}: fpr {}", m.fpr);
    }
}

#[test]
fn clean_data_yields_few_flags() {
    let mut flagged = 0;
    for seed in 0..5 {
        let labeled = generate(&scenario(ScenarioKind::Null, 0.0, seed)).unwrap();
        flagged += mip_detect(&labeled.data, &MipConfig { seed, ..MipConfig::default() }).unwrap().influential.len();
    }
    // 500 observations, FDR control at 0.05 under a true null.
    assert!(flagged <= 10, "{flagged} flags on clean data");
}

#[test]
fn him_null_exceedance_near_nominal() {
    let (mut exceed, mut total) = (0, 0);
    for seed in 0..5 {
        let labeled = generate(&scenario(ScenarioKind::Null, 0.0, seed)).unwrap();
        let report =
            him_detect_data(&labeled.data, EstimatorMode::Robust, HimMode::Fixed, 0.05, Exec::Parallel).unwrap();
        exceed += report.records.iter().filter(|r| r.p_value.unwrap() < 0.05).count();
        total += report.records.len();
    }
    let rate = exceed as f64 / total as f64;
    assert!((rate - 0.05).abs() <= 0.03, "exceedance {rate}");
}

#[test]
fn variants_share_the_first_pass() {
    let labeled = generate(&scenario(ScenarioKind::Example1, 6.0, 2)).unwrap();
    let z = standardize(&labeled.data, EstimatorMode::Robust).unwrap();
    let cfg = MipConfig { seed: 1, ..MipConfig::default() };
    let full = mip_detect(&labeled.data, &cfg).unwrap();
    let max = max_detect(&z, &cfg).unwrap();
    let min = min_multiround_detect(&z, &cfg).unwrap();
    for ((a, b), c) in full.records.iter().zip(&max.records).zip(&min.records) {
        assert_eq!(a.t_max, b.t_max);
        assert_eq!(a.t_min, c.t_min);
    }
}
