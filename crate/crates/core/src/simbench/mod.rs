//! Simulation harness: scenario generators, detection and fit metrics, a
//! coordinate-descent Lasso, oracle diagnostics and the experiment runner.

pub mod experiment;
pub mod generators;
pub mod lasso;
pub mod metrics;
pub mod oracle;

pub use experiment::{run_experiment, ExperimentSpec, MethodTag, MetricRow};
pub use generators::{gen_base, gen_example1, gen_example2, gen_null, generate, LabeledDataset, ScenarioKind, ScenarioSpec};
pub use lasso::{lasso_fit, LassoFit, LassoOptions};
pub use metrics::{bic, detection_metrics, fit_metrics, DetectionMetrics, FitMetrics};
pub use oracle::{oracle_decomposition, OracleDecomposition};
