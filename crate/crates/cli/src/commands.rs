//! Subcommand implementations.

use std::path::Path;
use std::time::Instant;

use mip_core::chi2_fdr::{chi2_1_sf, log10_p};
use mip_core::him::{him_detect_data, HimMode};
use mip_core::mip::{clean_member_statistics, max_detect, min_multiround_detect, mip_detect, mip_detect_standardized};
use mip_core::robust_stats::standardize_with;
use mip_core::simbench::{generate, run_experiment, ExperimentSpec, LassoOptions, MethodTag, ScenarioKind, ScenarioSpec};
use mip_core::{DetectionReport, EstimatorMode, Exec, MipConfig};
use serde::Serialize;

use crate::args::{Command, InputArgs, MipArgs, RunArgs, SizeArgs};
use crate::error::{CliError, Result};
use crate::io::{cell, ensure_dir, flag, out_path, read_input, write_csv, write_json};

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<String>,
    pub seed: u64,
    pub config: C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ReportFile<'a, C: Serialize> {
    schema_version: u32,
    manifest: RunManifest<C>,
    report: &'a DetectionReport,
}

#[derive(Debug, Serialize)]
struct HimSettings {
    estimator: EstimatorMode,
    him_mode: HimMode,
    alpha0: f64,
}

fn manifest<C: Serialize>(command: &'static str, digest: Option<String>, seed: u64, config: C, wall: Option<f64>) -> RunManifest<C> {
    RunManifest {
        tool: "mip",
        version: env!("CARGO_PKG_VERSION"),
        command,
        input_sha256: digest,
        seed,
        config,
        wall_time_ms: wall,
    }
}

/// Number of worker threads: the flag, then `MIP_THREADS`, then rayon's
/// default (all cores).
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("MIP_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("MIP_THREADS='{v}' is not a thread count"))),
        _ => Ok(None),
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let threads = resolve_threads(threads)?;
    if threads == Some(0) {
        return Err(CliError::Usage("thread count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Detect { input, mip, run } => in_pool(run.threads, || detect(&input, &mip, &run)),
        Command::Him {
            input,
            estimator,
            him_mode,
            alpha0,
            run,
        } => in_pool(run.threads, || {
            let settings = HimSettings {
                estimator: estimator.into(),
                him_mode: him_mode.into(),
                alpha0,
            };
            him(&input, settings, &run)
        }),
        Command::PlotData { input, mip, run } => in_pool(run.threads, || plot_data(&input, &mip, &run)),
        Command::Simulate {
            example,
            mu_grid,
            reps,
            methods,
            size,
            him_mode,
            fit,
            mip,
            run,
        } => in_pool(run.threads, || {
            let methods = methods
                .iter()
                .map(|m| m.parse::<MethodTag>().map_err(|e| CliError::Usage(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let spec = ExperimentSpec {
                n: size.n,
                p: size.p,
                n_inf: size.n_inf,
                reps,
                seed: mip.seed,
                mip: mip.config(),
                him_mode: him_mode.into(),
                fit: fit.then(LassoOptions::default),
                ..ExperimentSpec::new(parse_kind(&example)?, mu_grid, methods)
            };
            simulate(&spec, &run)
        }),
        Command::Generate {
            example,
            mu,
            size,
            seed,
            out_dir,
        } => generate_data(&example, mu, &size, seed, &out_dir),
    }
}

fn parse_kind(example: &str) -> Result<ScenarioKind> {
    example.parse().map_err(|e: mip_core::MipError| CliError::Usage(e.to_string()))
}

pub fn detect(input: &InputArgs, mip: &MipArgs, run: &RunArgs) -> Result<()> {
    let start = Instant::now();
    let parsed = read_input(input)?;
    let cfg = mip.config();
    let mut report = mip_detect(&parsed.data, &cfg)?;
    if !run.timings {
        report = report.without_timings();
    }
    let wall = run.timings.then(|| elapsed_ms(start));
    ensure_dir(&run.out_dir)?;
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        manifest: manifest("detect", Some(parsed.digest), cfg.seed, &cfg, wall),
        report: &report,
    };
    write_json(&out_path(&run.out_dir, "report.json"), &file)?;
    let rows: Vec<Vec<String>> = report
        .records
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                cell(r.t_min),
                cell(r.t_max),
                cell(r.statistic),
                cell(r.p_value),
                flag(r.influential),
            ]
        })
        .collect();
    write_csv(
        &out_path(&run.out_dir, "flags.csv"),
        &["index", "t_min", "t_max", "checking_stat", "p_value", "influential"],
        &rows,
    )?;
    summary(&report, &run.out_dir);
    Ok(())
}

fn him(input: &InputArgs, settings: HimSettings, run: &RunArgs) -> Result<()> {
    let start = Instant::now();
    let parsed = read_input(input)?;
    let report = him_detect_data(
        &parsed.data,
        settings.estimator,
        settings.him_mode,
        settings.alpha0,
        Exec::default(),
    )?;
    let wall = run.timings.then(|| elapsed_ms(start));
    ensure_dir(&run.out_dir)?;
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        manifest: manifest("him", Some(parsed.digest), 0, &settings, wall),
        report: &report,
    };
    write_json(&out_path(&run.out_dir, "report.json"), &file)?;
    let rows: Vec<Vec<String>> = report
        .records
        .iter()
        .map(|r| vec![r.index.to_string(), cell(r.statistic), cell(r.p_value), flag(r.influential)])
        .collect();
    write_csv(
        &out_path(&run.out_dir, "flags.csv"),
        &["index", "him_stat", "p_value", "influential"],
        &rows,
    )?;
    summary(&report, &run.out_dir);
    Ok(())
}

fn summary(report: &DetectionReport, dir: &Path) {
    println!(
        "{} flagged {} of {} observations; output in {}",
        report.method.name(),
        report.influential.len(),
        report.n,
        dir.display()
    );
}

fn log10_sf(t: Option<f64>) -> Result<Option<f64>> {
    t.map(|t| chi2_1_sf(t).map(log10_p)).transpose().map_err(Into::into)
}

fn plot_data(input: &InputArgs, mip: &MipArgs, run: &RunArgs) -> Result<()> {
    let parsed = read_input(input)?;
    let data = &parsed.data;
    let cfg: MipConfig = mip.config();
    cfg.validate()?;
    let z = standardize_with(data, cfg.estimator, None, cfg.exec)?;
    let mip_report = mip_detect_standardized(&z, Some(data), &cfg)?;
    let max_report = max_detect(&z, &cfg)?;
    let min_report = min_multiround_detect(&z, &cfg)?;

    // Clean-set members are never tested; for the plot they are compared
    // with the rest of the clean set instead.
    let clean = mip_report.clean_set.clone().unwrap_or_default();
    let checking_z = if cfg.restandardize_clean {
        standardize_with(data, cfg.estimator, Some(&clean), cfg.exec)?
    } else {
        z
    };
    let mut checking_stat: Vec<Option<f64>> = mip_report.records.iter().map(|r| r.statistic).collect();
    if clean.len() >= 2 {
        for (&i, s) in clean.iter().zip(clean_member_statistics(&checking_z, &clean, cfg.exec)?) {
            checking_stat[i] = Some(s);
        }
    }

    let mut rows = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let rec = &mip_report.records[i];
        rows.push(vec![
            i.to_string(),
            cell(log10_sf(rec.t_max)?),
            cell(log10_sf(rec.t_min)?),
            cell(log10_sf(checking_stat[i])?),
            flag(rec.influential),
            flag(max_report.records[i].influential),
            flag(min_report.records[i].influential),
        ]);
    }
    ensure_dir(&run.out_dir)?;
    write_csv(
        &out_path(&run.out_dir, "pvalues.csv"),
        &[
            "index",
            "log10_p_max",
            "log10_p_min",
            "log10_p_checking",
            "influential_mip",
            "influential_max",
            "influential_min",
        ],
        &rows,
    )?;
    println!(
        "MIP {} / Max {} / Min {} flagged of {}; output in {}",
        mip_report.influential.len(),
        max_report.influential.len(),
        min_report.influential.len(),
        data.n(),
        run.out_dir.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulationSettings<'a> {
    example: ScenarioKind,
    n: usize,
    p: usize,
    n_inf: usize,
    mu_grid: &'a [f64],
    reps: usize,
    methods: Vec<&'static str>,
    him_mode: HimMode,
    mip: &'a MipConfig,
    fit: Option<&'a LassoOptions>,
}

#[derive(Debug, Serialize)]
struct SimulationFile<'a> {
    schema_version: u32,
    manifest: RunManifest<SimulationSettings<'a>>,
    rows: &'a [mip_core::simbench::MetricRow],
}

pub fn simulate(spec: &ExperimentSpec, run: &RunArgs) -> Result<()> {
    let start = Instant::now();
    let rows = run_experiment(spec)?;
    let wall = run.timings.then(|| elapsed_ms(start));
    ensure_dir(&run.out_dir)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                format!("{:?}", r.mu),
                cell(r.tpr_inf),
                cell(r.fpr_inf),
                cell(r.f1),
                cell(r.err),
                cell(r.tpr_vs),
                cell(r.fpr_vs),
                r.reps.to_string(),
                r.failures.to_string(),
            ]
        })
        .collect();
    let header = [
        "method", "mu", "tpr_inf", "fpr_inf", "f1", "err", "tpr_vs", "fpr_vs", "reps", "failures",
    ];
    write_csv(&out_path(&run.out_dir, "results.csv"), &header, &table)?;
    let settings = SimulationSettings {
        example: spec.kind,
        n: spec.n,
        p: spec.p,
        n_inf: spec.n_inf,
        mu_grid: &spec.mu_grid,
        reps: spec.reps,
        methods: spec.methods.iter().map(|m| m.name()).collect(),
        him_mode: spec.him_mode,
        mip: &spec.mip,
        fit: spec.fit.as_ref(),
    };
    let file = SimulationFile {
        schema_version: SCHEMA_VERSION,
        manifest: manifest("simulate", None, spec.seed, settings, wall),
        rows: &rows,
    };
    write_json(&out_path(&run.out_dir, "results.json"), &file)?;
    println!("{}", header.join("\t"));
    for row in &table {
        println!("{}", row.join("\t"));
    }
    Ok(())
}

fn generate_data(example: &str, mu: f64, size: &SizeArgs, seed: u64, dir: &Path) -> Result<()> {
    let kind = parse_kind(example)?;
    let spec = ScenarioSpec {
        kind,
        n: size.n,
        p: size.p,
        n_inf: if kind == ScenarioKind::Null { 0 } else { size.n_inf },
        mu,
        seed,
    };
    let labeled = generate(&spec)?;
    let (y, x) = (labeled.data.y(), labeled.data.x());
    let mut header = vec!["y".to_string()];
    header.extend((1..=x.ncols()).map(|j| format!("x{j}")));
    let rows: Vec<Vec<String>> = (0..y.len())
        .map(|i| {
            std::iter::once(format!("{:?}", y[i]))
                .chain(x.row(i).iter().map(|v| format!("{v:?}")))
                .collect()
        })
        .collect();
    ensure_dir(dir)?;
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out_path(dir, "data.csv"), &header_refs, &rows)?;
    let truth: Vec<Vec<String>> = labeled.truth.iter().map(|i| vec![i.to_string()]).collect();
    write_csv(&out_path(dir, "truth.csv"), &["index"], &truth)?;
    println!("wrote {} rows ({} influential) to {}", y.len(), labeled.truth.len(), dir.display());
    Ok(())
}
