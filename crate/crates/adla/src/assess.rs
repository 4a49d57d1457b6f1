//! Campaign pipeline: both tests per time sample, threshold-normalized
//! statistics, detection flags and plot-ready emission.
//!
//! Columns are processed in parallel and reduced in index order, so
//! reports are byte-identical regardless of thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{ad_statistic, welch_t, ColumnPair};
use crate::threshold::ThresholdSpec;
use crate::trace::TracePair;

/// Errors from the assessment layer.
#[derive(Debug, Error, PartialEq)]
pub enum AssessError {
    #[error("grid must be non-empty and strictly increasing")]
    InvalidGrid,
    #[error("grid entry {n} exceeds the available {available} traces")]
    GridExceedsTraces { n: usize, available: usize },
}

/// Serializes a possibly non-finite f64; infinities and NaN become the
/// strings "inf"/"-inf"/"nan" so reports stay valid JSON and round-trip.
mod non_finite {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct F64Visitor;

    impl Visitor<'_> for F64Visitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or \"inf\"/\"-inf\"/\"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::custom(format!("unexpected float string {v:?}"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(F64Visitor)
    }
}

/// Per-time-sample results of both tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleStatistics {
    pub sample_index: usize,
    /// |t|; infinite for a degenerate column whose constant levels differ.
    #[serde(with = "non_finite")]
    pub t_abs: f64,
    pub a2: f64,
    /// |t| / tau_t.
    #[serde(with = "non_finite")]
    pub t_norm: f64,
    /// A^2 / tau_a.
    pub a2_norm: f64,
    /// t_norm > 1.
    pub tvla_detect: bool,
    /// a2_norm > 1.
    pub adla_detect: bool,
    /// Both columns constant; excluded from the max/argmax aggregates.
    pub degenerate: bool,
}

impl PartialEq for SampleStatistics {
    fn eq(&self, other: &Self) -> bool {
        self.sample_index == other.sample_index
            && self.t_abs.to_bits() == other.t_abs.to_bits()
            && self.a2.to_bits() == other.a2.to_bits()
            && self.t_norm.to_bits() == other.t_norm.to_bits()
            && self.a2_norm.to_bits() == other.a2_norm.to_bits()
            && self.tvla_detect == other.tvla_detect
            && self.adla_detect == other.adla_detect
            && self.degenerate == other.degenerate
    }
}

/// A maximal normalized statistic and where it occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxStat {
    pub value: f64,
    pub sample_index: usize,
}

/// Campaign-level summary of one fixed-vs-fixed assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub thresholds: ThresholdSpec,
    /// Traces per condition that entered the tests.
    pub n_traces_used: usize,
    pub n_samples: usize,
    /// Max t_norm over non-degenerate columns; None if every column was
    /// degenerate.
    pub max_t_norm: Option<MaxStat>,
    /// Max a2_norm over non-degenerate columns.
    pub max_a2_norm: Option<MaxStat>,
    /// Exactly the sample indices whose TVLA detect flag is set.
    pub tvla_leaks: Vec<usize>,
    /// Exactly the sample indices whose ADLA detect flag is set.
    pub adla_leaks: Vec<usize>,
    /// Per-sample detail; may be elided (None) when serializing very wide
    /// campaigns, without touching the aggregates above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sample: Option<Vec<SampleStatistics>>,
}

fn assess_prefix(pair: &TracePair, thresholds: &ThresholdSpec, n: usize) -> AssessmentReport {
    let n_samples = pair.n_samples();
    let per_sample: Vec<SampleStatistics> = (0..n_samples)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(n), Vec::with_capacity(n)),
            |(x, y), j| {
                pair.a().column_into(j, n, x);
                pair.b().column_into(j, n, y);
                let col = ColumnPair::new(x, y);
                let w = welch_t(&col);
                let ad = ad_statistic(&col);
                let t_abs = w.t.abs();
                let t_norm = t_abs / thresholds.tau_t;
                let a2_norm = ad.a2 / thresholds.tau_a;
                SampleStatistics {
                    sample_index: j,
                    t_abs,
                    a2: ad.a2,
                    t_norm,
                    a2_norm,
                    tvla_detect: t_norm > 1.0,
                    adla_detect: a2_norm > 1.0,
                    degenerate: w.is_degenerate(),
                }
            },
        )
        .collect();

    let mut max_t: Option<MaxStat> = None;
    let mut max_a: Option<MaxStat> = None;
    let mut tvla_leaks = Vec::new();
    let mut adla_leaks = Vec::new();
    for s in &per_sample {
        if s.tvla_detect {
            tvla_leaks.push(s.sample_index);
        }
        if s.adla_detect {
            adla_leaks.push(s.sample_index);
        }
        if s.degenerate {
            continue;
        }
        if max_t.is_none_or(|m| s.t_norm > m.value) {
            max_t = Some(MaxStat {
                value: s.t_norm,
                sample_index: s.sample_index,
            });
        }
        if max_a.is_none_or(|m| s.a2_norm > m.value) {
            max_a = Some(MaxStat {
                value: s.a2_norm,
                sample_index: s.sample_index,
            });
        }
    }
    AssessmentReport {
        thresholds: thresholds.clone(),
        n_traces_used: n,
        n_samples,
        max_t_norm: max_t,
        max_a2_norm: max_a,
        tvla_leaks,
        adla_leaks,
        per_sample: Some(per_sample),
    }
}

/// Runs both tests on every time sample of the pair.
///
/// Degenerate columns (both sides constant) keep their literal flags but
/// are excluded from the max/argmax aggregates.
pub fn assess_pair(pair: &TracePair, thresholds: &ThresholdSpec) -> AssessmentReport {
    assess_prefix(pair, thresholds, pair.n_traces())
}

/// One point of a traces-to-detection curve. The max fields are NaN when
/// every column at that prefix was degenerate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub max_t_norm: f64,
    pub max_a2_norm: f64,
}

impl PartialEq for CurvePoint {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.max_t_norm.to_bits() == other.max_t_norm.to_bits()
            && self.max_a2_norm.to_bits() == other.max_a2_norm.to_bits()
    }
}

/// Max normalized statistics over trace-order prefixes of the pair, one
/// entry per grid value. Prefixes (rather than resampling) match how an
/// acquisition campaign grows and keep the curve deterministic.
pub fn detection_curve(
    pair: &TracePair,
    thresholds: &ThresholdSpec,
    grid: &[usize],
) -> Result<Vec<CurvePoint>, AssessError> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] == 0 {
        return Err(AssessError::InvalidGrid);
    }
    if let Some(&n) = grid.iter().find(|&&n| n > pair.n_traces()) {
        return Err(AssessError::GridExceedsTraces {
            n,
            available: pair.n_traces(),
        });
    }
    Ok(grid
        .iter()
        .map(|&n| {
            let report = assess_prefix(pair, thresholds, n);
            CurvePoint {
                n,
                max_t_norm: report.max_t_norm.map_or(f64::NAN, |m| m.value),
                max_a2_norm: report.max_a2_norm.map_or(f64::NAN, |m| m.value),
            }
        })
        .collect())
}

/// Smallest grid point at which each test's normalized maximum first
/// exceeds 1 (its traces-to-detection).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub tvla: Option<usize>,
    pub adla: Option<usize>,
}

pub fn traces_to_detection(curve: &[CurvePoint]) -> DetectionSummary {
    DetectionSummary {
        tvla: curve.iter().find(|p| p.max_t_norm > 1.0).map(|p| p.n),
        adla: curve.iter().find(|p| p.max_a2_norm > 1.0).map(|p| p.n),
    }
}

/// Stats CSV: one row per time sample, directly plottable.
pub fn write_stats_csv<W: Write>(per_sample: &[SampleStatistics], w: &mut W) -> std::io::Result<()> {
    writeln!(
        w,
        "sample_index,t_abs,a2,t_norm,a2_norm,tvla_detect,adla_detect,degenerate"
    )?;
    for s in per_sample {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            s.sample_index, s.t_abs, s.a2, s.t_norm, s.a2_norm, s.tvla_detect, s.adla_detect,
            s.degenerate
        )?;
    }
    Ok(())
}

/// Detection-curve CSV.
pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "n,max_t_norm,max_a2_norm")?;
    for p in curve {
        writeln!(w, "{},{},{}", p.n, p.max_t_norm, p.max_a2_norm)?;
    }
    Ok(())
}

impl AssessmentReport {
    /// Pretty JSON with deterministic field order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Copy with per-sample detail dropped when it exceeds `cap` rows.
    pub fn with_per_sample_cap(mut self, cap: usize) -> Self {
        if self
            .per_sample
            .as_ref()
            .is_some_and(|v| v.len() > cap)
        {
            self.per_sample = None;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{find_scenario, generate_pair, LeakModel, ScenarioConfig, LEAD_IN};
    use crate::trace::{Dtype, TraceSet};

    fn paper_thresholds() -> ThresholdSpec {
        ThresholdSpec::paper()
    }

    fn pair_from_columns(a_cols: Vec<Vec<f64>>, b_cols: Vec<Vec<f64>>) -> TracePair {
        // columns given per sample; transpose into row-major traces
        let n = a_cols[0].len();
        let s = a_cols.len();
        let mut a = vec![0.0; n * s];
        let mut b = vec![0.0; n * s];
        for (j, (ca, cb)) in a_cols.iter().zip(&b_cols).enumerate() {
            for i in 0..n {
                a[i * s + j] = ca[i];
                b[i * s + j] = cb[i];
            }
        }
        TracePair::new(
            TraceSet::new(n, s, a, "a", Dtype::Real64).unwrap(),
            TraceSet::new(n, s, b, "b", Dtype::Real64).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identical_sets_have_zero_t_and_no_tvla_detections() {
        let cfg = find_scenario("unprotected").unwrap().config;
        let pair = generate_pair(&ScenarioConfig {
            n_traces: 50,
            ..cfg
        })
        .unwrap();
        let same = TracePair::new(pair.a().clone(), pair.a().clone()).unwrap();
        let report = assess_pair(&same, &paper_thresholds());
        let per_sample = report.per_sample.as_ref().unwrap();
        assert!(per_sample.iter().all(|s| s.t_abs == 0.0));
        assert!(report.tvla_leaks.is_empty());
        assert_eq!(report.max_t_norm.unwrap().value, 0.0);
    }

    #[test]
    fn single_column_hand_case() {
        let pair = pair_from_columns(vec![vec![0.0, 2.0]], vec![vec![1.0, 3.0]]);
        let report = assess_pair(&pair, &paper_thresholds());
        let s = &report.per_sample.as_ref().unwrap()[0];
        let expect = std::f64::consts::FRAC_1_SQRT_2 / 4.5;
        assert!((s.t_norm - expect).abs() < 1e-12, "t_norm {}", s.t_norm);
        assert!((s.t_norm - 0.15714).abs() < 1e-4);
        assert!(!s.tvla_detect);
    }

    #[test]
    fn degenerate_columns_flagged_and_excluded_from_aggregates() {
        // column 0: live; column 1: both constant, equal; column 2: both
        // constant, different levels
        let pair = pair_from_columns(
            vec![
                vec![0.0, 1.0, 2.0, 4.0],
                vec![5.0, 5.0, 5.0, 5.0],
                vec![1.0, 1.0, 1.0, 1.0],
            ],
            vec![
                vec![0.5, 1.5, 2.5, 3.0],
                vec![5.0, 5.0, 5.0, 5.0],
                vec![2.0, 2.0, 2.0, 2.0],
            ],
        );
        let report = assess_pair(&pair, &paper_thresholds());
        let ps = report.per_sample.as_ref().unwrap();
        assert!(!ps[0].degenerate);
        assert!(ps[1].degenerate);
        assert!(ps[2].degenerate);
        assert_eq!(ps[1].t_abs, 0.0);
        assert_eq!(ps[2].t_abs, f64::INFINITY);
        assert!(ps[2].tvla_detect, "differing constants are a literal detection");
        // aggregates only look at column 0
        assert_eq!(report.max_t_norm.unwrap().sample_index, 0);
        assert_eq!(report.max_a2_norm.unwrap().sample_index, 0);
        assert!(report.max_t_norm.unwrap().value.is_finite());
        // leak lists stay literal
        assert_eq!(report.tvla_leaks, vec![2]);
    }

    #[test]
    fn leak_lists_match_flags_exactly() {
        let cfg = find_scenario("unprotected").unwrap().config;
        let pair = generate_pair(&cfg).unwrap();
        let report = assess_pair(&pair, &paper_thresholds());
        let ps = report.per_sample.as_ref().unwrap();
        let tvla: Vec<usize> = ps.iter().filter(|s| s.tvla_detect).map(|s| s.sample_index).collect();
        let adla: Vec<usize> = ps.iter().filter(|s| s.adla_detect).map(|s| s.sample_index).collect();
        assert_eq!(report.tvla_leaks, tvla);
        assert_eq!(report.adla_leaks, adla);
        assert!(!tvla.is_empty(), "unprotected preset must leak");
    }

    #[test]
    fn aggregates_match_per_sample_maxima() {
        let cfg = find_scenario("shuffled").unwrap().config;
        let pair = generate_pair(&ScenarioConfig {
            n_traces: 300,
            ..cfg
        })
        .unwrap();
        let report = assess_pair(&pair, &paper_thresholds());
        let ps = report.per_sample.as_ref().unwrap();
        let best_t = ps
            .iter()
            .filter(|s| !s.degenerate)
            .max_by(|a, b| a.t_norm.total_cmp(&b.t_norm))
            .unwrap();
        assert_eq!(report.max_t_norm.unwrap().value, best_t.t_norm);
        let best_a = ps
            .iter()
            .filter(|s| !s.degenerate)
            .max_by(|a, b| a.a2_norm.total_cmp(&b.a2_norm))
            .unwrap();
        assert_eq!(report.max_a2_norm.unwrap().value, best_a.a2_norm);
    }

    #[test]
    fn curve_prefix_consistency() {
        let cfg = find_scenario("unprotected").unwrap().config;
        let pair = generate_pair(&cfg).unwrap();
        let thresholds = paper_thresholds();
        let grid = [100, 250, 500];
        let curve = detection_curve(&pair, &thresholds, &grid).unwrap();
        assert_eq!(curve.len(), 3);
        // last grid point equals the full assessment
        let full = assess_pair(&pair, &thresholds);
        assert_eq!(curve[2].max_t_norm, full.max_t_norm.unwrap().value);
        assert_eq!(curve[2].max_a2_norm, full.max_a2_norm.unwrap().value);
        // curve is reproducible
        let again = detection_curve(&pair, &thresholds, &grid).unwrap();
        assert_eq!(curve, again);
    }

    #[test]
    fn curve_grid_validation() {
        let cfg = find_scenario("unprotected").unwrap().config;
        let pair = generate_pair(&ScenarioConfig {
            n_traces: 100,
            ..cfg
        })
        .unwrap();
        let t = paper_thresholds();
        assert_eq!(
            detection_curve(&pair, &t, &[]).unwrap_err(),
            AssessError::InvalidGrid
        );
        assert_eq!(
            detection_curve(&pair, &t, &[50, 50]).unwrap_err(),
            AssessError::InvalidGrid
        );
        assert_eq!(
            detection_curve(&pair, &t, &[0, 50]).unwrap_err(),
            AssessError::InvalidGrid
        );
        assert_eq!(
            detection_curve(&pair, &t, &[50, 101]).unwrap_err(),
            AssessError::GridExceedsTraces {
                n: 101,
                available: 100
            }
        );
    }

    #[test]
    fn traces_to_detection_reads_the_curve() {
        let curve = vec![
            CurvePoint {
                n: 100,
                max_t_norm: 0.4,
                max_a2_norm: 0.8,
            },
            CurvePoint {
                n: 200,
                max_t_norm: 0.9,
                max_a2_norm: 1.2,
            },
            CurvePoint {
                n: 400,
                max_t_norm: 1.1,
                max_a2_norm: 2.0,
            },
        ];
        let d = traces_to_detection(&curve);
        assert_eq!(d.adla, Some(200));
        assert_eq!(d.tvla, Some(400));
    }

    #[test]
    fn report_json_roundtrip_including_infinities() {
        let pair = pair_from_columns(
            vec![vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]],
            vec![vec![0.5, 1.5, 2.0], vec![4.0, 4.0, 4.0]],
        );
        let report = assess_pair(&pair, &paper_thresholds());
        assert_eq!(
            report.per_sample.as_ref().unwrap()[1].t_abs,
            f64::INFINITY
        );
        let json = report.to_json();
        let back = AssessmentReport::from_json(&json).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn per_sample_cap_elides_detail_only() {
        let cfg = find_scenario("unprotected").unwrap().config;
        let pair = generate_pair(&ScenarioConfig {
            n_traces: 60,
            ..cfg
        })
        .unwrap();
        let report = assess_pair(&pair, &paper_thresholds());
        let capped = report.clone().with_per_sample_cap(8);
        assert!(capped.per_sample.is_none());
        assert_eq!(capped.max_t_norm, report.max_t_norm);
        let kept = report.clone().with_per_sample_cap(1_000_000);
        assert!(kept.per_sample.is_some());
        // elided report still round-trips
        let back = AssessmentReport::from_json(&capped.to_json()).unwrap();
        assert_eq!(capped, back);
    }

    #[test]
    fn stats_csv_shape_and_values() {
        let pair = pair_from_columns(vec![vec![0.0, 2.0]], vec![vec![1.0, 3.0]]);
        let report = assess_pair(&pair, &paper_thresholds());
        let mut out = Vec::new();
        write_stats_csv(report.per_sample.as_ref().unwrap(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sample_index,t_abs,a2,t_norm,a2_norm,tvla_detect,adla_detect,degenerate"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,0.707106781186547"), "row: {row}");
        assert!(row.ends_with(",false,false,false"));
    }

    #[test]
    fn variance_only_leaks_for_adla_but_not_tvla() {
        let mut cfg = find_scenario("variance_only").unwrap().config;
        cfg.n_traces = 1500;
        let pair = generate_pair(&cfg).unwrap();
        let report = assess_pair(&pair, &paper_thresholds());
        assert!(
            !report.adla_leaks.is_empty(),
            "ADLA must flag the mixture columns (max a2_norm {:?})",
            report.max_a2_norm
        );
        assert!(
            report.tvla_leaks.is_empty(),
            "TVLA has no mean shift to find (max t_norm {:?})",
            report.max_t_norm
        );
        // the leak falls in the configured slots
        let leak_slots: Vec<usize> = (LEAD_IN..LEAD_IN + cfg.n_ops).collect();
        assert!(report.adla_leaks.iter().all(|i| leak_slots.contains(i)));
        assert_eq!(cfg.leak_model, LeakModel::VarianceOnly);
    }
}
