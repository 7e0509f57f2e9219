use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mip_core::him::HimMode;
use mip_core::mip::MinStepMode;
use mip_core::{EstimatorMode, MipConfig};

#[derive(Parser, Debug)]
#[command(name = "mip", version, about = "Detect multiple influential points in high-dimensional regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the Min-Max-Checking detector on a CSV file
    Detect {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        mip: MipArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the leave-one-out detector on a CSV file
    Him {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = EstimatorArg::Robust)]
        estimator: EstimatorArg,
        /// Re-estimate location/scale without each observation, or keep
        /// the full-data estimates
        #[arg(long, value_enum, default_value_t = HimModeArg::Refit)]
        him_mode: HimModeArg,
        #[arg(long, default_value_t = 0.05)]
        alpha0: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write per-observation log10 p-values of the Max, Min and checking statistics
    PlotData {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        mip: MipArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Reproduce the masking/swamping simulations
    Simulate {
        /// Scenario: 1, 2 or null
        #[arg(long)]
        example: String,
        /// Comma-separated signal strengths
        #[arg(long, value_delimiter = ',', default_value = "0")]
        mu_grid: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        /// Comma-separated: MIP, HIM, MaxOnly, MinMultiRound, Full
        #[arg(long, value_delimiter = ',', default_value = "MIP,HIM")]
        methods: Vec<String>,
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long, value_enum, default_value_t = HimModeArg::Refit)]
        him_mode: HimModeArg,
        /// Also fit a cross-validated Lasso on the retained rows
        #[arg(long)]
        fit: bool,
        #[command(flatten)]
        mip: MipArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write one simulated dataset and its influential rows as CSV
    Generate {
        #[arg(long)]
        example: String,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// CSV file, one observation per row
    pub input: PathBuf,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// The first row is data, not a header
    #[arg(long)]
    pub no_header: bool,
    /// 0-based position of the response column
    #[arg(long, default_value_t = 0)]
    pub response_col: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SizeArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub p: usize,
    #[arg(long, default_value_t = 10)]
    pub n_inf: usize,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads; falls back to MIP_THREADS, then to all cores
    #[arg(long)]
    pub threads: Option<usize>,
    /// Record wall-clock timings in the JSON output
    #[arg(long)]
    pub timings: bool,
}

#[derive(Args, Debug, Clone)]
pub struct MipArgs {
    /// Random subsets per observation
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    /// Subset fraction
    #[arg(long = "ksub", default_value_t = 0.5)]
    pub k_sub: f64,
    /// Level of the Min and Max steps
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// FDR level of the final test
    #[arg(long, default_value_t = 0.05)]
    pub alpha0: f64,
    /// Minimum clean-set fraction
    #[arg(long = "c", default_value_t = 0.5)]
    pub c: f64,
    /// Fallback removal count for the Min step
    #[arg(long)]
    pub l0: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub max_rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Robust)]
    pub estimator: EstimatorArg,
    #[arg(long, value_enum, default_value_t = MinStepArg::Bh)]
    pub min_step: MinStepArg,
    #[arg(long)]
    pub shared_subsets: bool,
    #[arg(long)]
    pub restandardize_clean: bool,
    /// Keep the subset size at its full-data value in later rounds
    #[arg(long)]
    pub fixed_n_sub: bool,
}

impl MipArgs {
    pub fn config(&self) -> MipConfig {
        MipConfig {
            m: self.m,
            k_sub: self.k_sub,
            alpha: self.alpha,
            alpha0: self.alpha0,
            c: self.c,
            l0: self.l0,
            max_rounds: self.max_rounds,
            seed: self.seed,
            estimator: self.estimator.into(),
            min_step_mode: self.min_step.into(),
            shared_subsets: self.shared_subsets,
            restandardize_clean: self.restandardize_clean,
            fixed_n_sub: self.fixed_n_sub,
            exec: Default::default(),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorArg {
    Robust,
    Sample,
}

impl From<EstimatorArg> for EstimatorMode {
    fn from(a: EstimatorArg) -> Self {
        match a {
            EstimatorArg::Robust => EstimatorMode::Robust,
            EstimatorArg::Sample => EstimatorMode::Sample,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinStepArg {
    Bh,
    Topk,
}

impl From<MinStepArg> for MinStepMode {
    fn from(a: MinStepArg) -> Self {
        match a {
            MinStepArg::Bh => MinStepMode::Bh,
            MinStepArg::Topk => MinStepMode::TopL0,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum HimModeArg {
    Refit,
    Fixed,
}

impl From<HimModeArg> for HimMode {
    fn from(a: HimModeArg) -> Self {
        match a {
            HimModeArg::Refit => HimMode::Refit,
            HimModeArg::Fixed => HimMode::Fixed,
        }
    }
}
