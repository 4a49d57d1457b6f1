//! Leakage assessment for side-channel traces.
//!
//! This crate detects data-dependent leakage in power traces by testing,
//! independently at every time sample, whether the measurements captured
//! under two fixed input conditions follow the same distribution. Two
//! tests run side by side:
//!
//! - **TVLA**: Welch's t statistic against the established threshold
//!   |t| > 4.5 — sensitive to mean shifts;
//! - **ADLA**: the two-sample Anderson-Darling statistic against a
//!   threshold derived from its limiting null distribution — sensitive to
//!   any difference between the two CDFs, including variance and tail
//!   effects that mean-based testing misses.
//!
//! Both statistics are reported threshold-normalized (|t|/tau_t and
//! A^2/tau_a) so that values above 1 mean "leak detected" at the same
//! significance level, about 3.4e-6 per sample at the defaults.
//!
//! The crate is organized around the campaign pipeline:
//!
//! - [`trace`]: the trace-set data model and its bit-exact container
//!   format (plus CSV import);
//! - [`stats`]: the two test statistics, the standard-normal machinery
//!   and Q-Q diagnostics;
//! - [`threshold`]: threshold derivation — closed-form cumulants of the
//!   limiting distribution, a Pearson-curve quantile, and a Monte Carlo
//!   cross-check;
//! - [`simulate`]: a countermeasure-aware trace simulator (shuffling,
//!   random jitter, tunable leak models) for desk-scale experiments;
//! - [`assess`]: the per-sample assessment loop, detection curves and
//!   report emission (JSON, CSV, SVG).
//!
//! Start with the runnable examples (`cargo run --example ...`); each one
//! demonstrates a single capability end to end. A thin `adla` binary
//! wraps the same pipeline for shell use.

pub mod assess;
pub mod cli;
pub mod simulate;
pub mod stats;
pub mod svg;
pub mod threshold;
pub mod trace;

pub use assess::{
    assess_pair, detection_curve, traces_to_detection, AssessError, AssessmentReport, CurvePoint,
    DetectionSummary, MaxStat, SampleStatistics,
};
pub use simulate::{
    find_scenario, generate_pair, scenario_catalog, LeakModel, ScenarioConfig, ScenarioError,
    ScenarioPreset,
};
pub use stats::{
    ad_statistic, normal_cdf, normal_quantile, qq_fit, qq_points, welch_t, AdResult, ColumnPair,
    QqFit, QqPoint, StatsError, WelchResult,
};
pub use threshold::{
    cumulants, derive_thresholds, monte_carlo_quantile, pearson_quantile, sample_a2_infinity,
    series_sum, CumulantLedger, McCheck, PearsonType, ThresholdError, ThresholdMethod,
    ThresholdSpec, CANONICAL_ALPHA, TAU_A, TAU_T,
};
pub use trace::{Dtype, TraceError, TracePair, TraceSet};
