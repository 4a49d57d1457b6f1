//! Countermeasure-aware synthetic trace generation.
//!
//! Each simulated execution runs `n_ops` multiply-accumulate operations.
//! Operation 0 multiplies the targeted weight by the controlled input
//! (the only thing that differs between the two conditions); the
//! remaining operations carry nuisance products drawn once per scenario
//! and shared by both conditions and all traces. Every operation deposits
//! its leakage value at a nominal time slot; shuffling permutes the slot
//! assignment per execution and jitter delays each operation by an
//! independent uniform number of samples. Gaussian noise covers the whole
//! trace, and samples without a leak are pure noise around a zero
//! baseline.
//!
//! Trace generation is counter-seeded: trace `t` of either condition uses
//! its own ChaCha substream derived from (seed, condition, t), so results
//! are bitwise reproducible and independent of parallel scheduling.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Dtype, TracePair, TraceSet};

/// First leak slot; leaves a small quiet lead-in before the operations.
pub const LEAD_IN: usize = 4;
/// Required headroom: n_samples >= n_ops + jitter_bound + GUARD_MARGIN
/// keeps every delayed operation inside the trace.
pub const GUARD_MARGIN: usize = 8;

/// How an operation's operand value maps to a leakage level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakModel {
    /// Hamming weight of the product quantized to a signed 8-bit
    /// fixed-point byte (Q1.7): the classic proxy for data-bus leakage.
    HammingWeight,
    /// The product value itself leaks linearly.
    Value,
    /// Equal-mean stress case: condition A leaks nothing, condition B
    /// leaks +/- `weight` with a fair per-operation sign, so the column
    /// means match while the variances differ by weight^2. Not a physical
    /// model; it isolates distribution-shape leakage by construction.
    VarianceOnly,
}

/// Errors from scenario validation.
#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("input_a and input_b must differ")]
    EqualInputs,
    #[error("inputs must lie in [0, 1], got input_a={0}, input_b={1}")]
    InputOutOfRange(f64, f64),
    #[error("n_traces must be >= 1")]
    NoTraces,
    #[error("n_ops must be >= 1")]
    NoOps,
    #[error("n_samples {got} too small: need n_ops + jitter_bound + {GUARD_MARGIN} = {need}")]
    TooFewSamples { need: usize, got: usize },
    #[error("noise_sigma must be finite and >= 0, got {0}")]
    InvalidNoise(f64),
    #[error("weight must be finite, got {0}")]
    InvalidWeight(f64),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
}

/// Full description of a synthetic measurement campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Traces per condition.
    pub n_traces: usize,
    /// Time samples per trace.
    pub n_samples: usize,
    /// The targeted secret weight (doubles as the mixture half-separation
    /// for [`LeakModel::VarianceOnly`]).
    pub weight: f64,
    /// Fixed value of the controlled input under condition A, in [0, 1].
    pub input_a: f64,
    /// Fixed value of the controlled input under condition B, in [0, 1].
    pub input_b: f64,
    /// Operations eligible for shuffling.
    pub n_ops: usize,
    /// Randomize the operation order per execution.
    pub shuffle: bool,
    /// Maximum per-operation delay in samples (uniform on 0..=bound).
    pub jitter_bound: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_sigma: f64,
    pub leak_model: LeakModel,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.input_a == self.input_b {
            return Err(ScenarioError::EqualInputs);
        }
        if !(0.0..=1.0).contains(&self.input_a) || !(0.0..=1.0).contains(&self.input_b) {
            return Err(ScenarioError::InputOutOfRange(self.input_a, self.input_b));
        }
        if self.n_traces == 0 {
            return Err(ScenarioError::NoTraces);
        }
        if self.n_ops == 0 {
            return Err(ScenarioError::NoOps);
        }
        let need = self.n_ops + self.jitter_bound + GUARD_MARGIN;
        if self.n_samples < need {
            return Err(ScenarioError::TooFewSamples {
                need,
                got: self.n_samples,
            });
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(ScenarioError::InvalidNoise(self.noise_sigma));
        }
        if !self.weight.is_finite() {
            return Err(ScenarioError::InvalidWeight(self.weight));
        }
        Ok(())
    }
}

/// Hamming weight of the Q1.7 quantization of `product`.
fn hamming_weight_q17(product: f64) -> f64 {
    let q = (product * 128.0).round().clamp(-128.0, 127.0) as i8;
    (q as u8).count_ones() as f64
}

#[derive(Clone, Copy)]
enum Condition {
    A,
    B,
}

/// Per-operation deterministic leak levels for one condition; `None`
/// marks the sensitive operation of the variance-only model, whose level
/// is drawn per trace.
fn op_levels(cfg: &ScenarioConfig, nuisance: &[f64], cond: Condition) -> Vec<Option<f64>> {
    let input = match cond {
        Condition::A => cfg.input_a,
        Condition::B => cfg.input_b,
    };
    (0..cfg.n_ops)
        .map(|k| {
            let product = if k == 0 {
                cfg.weight * input
            } else {
                nuisance[k]
            };
            match cfg.leak_model {
                LeakModel::HammingWeight => Some(hamming_weight_q17(product)),
                LeakModel::Value => Some(product),
                LeakModel::VarianceOnly => match cond {
                    Condition::A => Some(0.0),
                    Condition::B => None, // +/- weight, sign drawn per trace
                },
            }
        })
        .collect()
}

fn trace_rng(seed: u64, cond: Condition, trace: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let cond_bit = match cond {
        Condition::A => 1,
        Condition::B => 2,
    };
    // stream 0 is the scenario stream; traces take 1.. in pairs
    rng.set_stream(cond_bit + 2 * trace as u64);
    rng
}

fn generate_set(
    cfg: &ScenarioConfig,
    nuisance: &[f64],
    cond: Condition,
    label: String,
) -> TraceSet {
    let levels = op_levels(cfg, nuisance, cond);
    let rows: Vec<Vec<f64>> = (0..cfg.n_traces)
        .into_par_iter()
        .map(|t| {
            let mut rng = trace_rng(cfg.seed, cond, t);
            let mut trace = vec![0.0f64; cfg.n_samples];
            // rng consumption order is fixed: noise, permutation, delays, signs
            if cfg.noise_sigma > 0.0 {
                for v in trace.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = z * cfg.noise_sigma;
                }
            }
            let mut slots: Vec<usize> = (0..cfg.n_ops).collect();
            if cfg.shuffle {
                // Fisher-Yates over the nominal slots
                for i in (1..slots.len()).rev() {
                    let j = rng.random_range(0..=i);
                    slots.swap(i, j);
                }
            }
            for (k, level) in levels.iter().enumerate() {
                let delay = if cfg.jitter_bound > 0 {
                    rng.random_range(0..=cfg.jitter_bound)
                } else {
                    0
                };
                let value = match level {
                    Some(v) => *v,
                    None => {
                        if rng.random_range(0..2u8) == 0 {
                            cfg.weight
                        } else {
                            -cfg.weight
                        }
                    }
                };
                trace[LEAD_IN + slots[k] + delay] += value;
            }
            trace
        })
        .collect();
    let samples: Vec<f64> = rows.into_iter().flatten().collect();
    TraceSet::new(cfg.n_traces, cfg.n_samples, samples, label, Dtype::Real64)
        .expect("generated samples are finite and correctly shaped")
}

/// Generates the fixed-vs-fixed trace pair for a scenario. Both
/// conditions share the seed-derived nuisance operands, the shuffling
/// and jitter laws, and the noise level; only the controlled input
/// differs. Bitwise deterministic for a fixed config.
pub fn generate_pair(cfg: &ScenarioConfig) -> Result<TracePair, ScenarioError> {
    cfg.validate()?;
    let mut scenario_rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    scenario_rng.set_stream(0);
    let mut nuisance = vec![0.0f64; cfg.n_ops];
    for v in nuisance.iter_mut().skip(1) {
        *v = scenario_rng.random_range(-1.0..1.0);
    }
    let a = generate_set(cfg, &nuisance, Condition::A, format!("a:input={}", cfg.input_a));
    let b = generate_set(cfg, &nuisance, Condition::B, format!("b:input={}", cfg.input_b));
    Ok(TracePair::new(a, b).expect("both sets share the config dimensions"))
}

/// A named, documented scenario.
#[derive(Debug, Clone)]
pub struct ScenarioPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: ScenarioConfig,
}

/// The built-in scenario presets.
///
/// The countermeasure parameters and input pairs are engineering choices
/// tuned so each preset demonstrates its regime at desk scale; see each
/// description.
pub fn scenario_catalog() -> Vec<ScenarioPreset> {
    vec![
        ScenarioPreset {
            name: "unprotected",
            description: "No countermeasures: a fixed Hamming-weight level difference at the \
                          sensitive operation's slot. Both tests detect quickly.",
            config: ScenarioConfig {
                n_traces: 500,
                n_samples: 32,
                weight: 2.5,
                input_a: 0.12,
                input_b: 0.93,
                n_ops: 8,
                shuffle: false,
                jitter_bound: 0,
                noise_sigma: 1.0,
                leak_model: LeakModel::HammingWeight,
                seed: 1,
            },
        },
        ScenarioPreset {
            name: "shuffled",
            description: "Operation order randomized per execution; the sensitive level \
                          difference is diluted across the operation window.",
            config: ScenarioConfig {
                n_traces: 1000,
                n_samples: 32,
                weight: 2.5,
                input_a: 0.12,
                input_b: 0.93,
                n_ops: 8,
                shuffle: true,
                jitter_bound: 0,
                noise_sigma: 0.25,
                leak_model: LeakModel::HammingWeight,
                seed: 2,
            },
        },
        ScenarioPreset {
            name: "jittered",
            description: "Per-operation random delays desynchronize the traces in time.",
            config: ScenarioConfig {
                n_traces: 1000,
                n_samples: 32,
                weight: 2.5,
                input_a: 0.12,
                input_b: 0.93,
                n_ops: 8,
                shuffle: false,
                jitter_bound: 4,
                noise_sigma: 0.25,
                leak_model: LeakModel::HammingWeight,
                seed: 3,
            },
        },
        ScenarioPreset {
            name: "shuffled_jittered",
            description: "The protected setting: shuffling plus jitter. The sensitive product \
                          is a rare large-amplitude arrival whose condition difference is small \
                          against its own spread, so the mean-based statistic saturates below \
                          threshold while the distribution difference stays detectable.",
            config: ScenarioConfig {
                n_traces: 2000,
                n_samples: 48,
                weight: 30.0,
                input_a: 0.85,
                input_b: 0.97,
                n_ops: 6,
                shuffle: true,
                jitter_bound: 2,
                noise_sigma: 1.0,
                leak_model: LeakModel::Value,
                seed: 4,
            },
        },
        ScenarioPreset {
            name: "variance_only",
            description: "Equal-mean mixture stress case: condition B spreads its leak slots \
                          by +/- weight with zero mean shift. Mean-based testing is powerless \
                          by construction; distribution-based testing is not.",
            config: ScenarioConfig {
                n_traces: 2000,
                n_samples: 48,
                weight: 2.0,
                input_a: 0.0,
                input_b: 1.0,
                n_ops: 4,
                shuffle: false,
                jitter_bound: 0,
                noise_sigma: 1.0,
                leak_model: LeakModel::VarianceOnly,
                seed: 5,
            },
        },
    ]
}

/// Looks up a preset by name.
pub fn find_scenario(name: &str) -> Result<ScenarioPreset, ScenarioError> {
    scenario_catalog()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| ScenarioError::UnknownScenario(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_cmp_sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_unstable_by(f64::total_cmp);
        v
    }

    #[test]
    fn catalog_contains_required_presets_and_all_validate() {
        let catalog = scenario_catalog();
        for name in [
            "unprotected",
            "shuffled",
            "jittered",
            "shuffled_jittered",
            "variance_only",
        ] {
            let preset = catalog
                .iter()
                .find(|p| p.name == name)
                .unwrap_or_else(|| panic!("missing preset {name}"));
            preset.config.validate().unwrap();
        }
        assert!(find_scenario("no_such_thing").is_err());
    }

    #[test]
    fn fixed_seed_is_bitwise_deterministic() {
        let cfg = find_scenario("shuffled_jittered").unwrap().config;
        let p1 = generate_pair(&cfg).unwrap();
        let p2 = generate_pair(&cfg).unwrap();
        for (x, y) in p1.a().samples().iter().zip(p2.a().samples()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in p1.b().samples().iter().zip(p2.b().samples()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let mut other = cfg;
        other.seed += 1;
        let p3 = generate_pair(&other).unwrap();
        assert_ne!(p1.a().samples(), p3.a().samples());
    }

    #[test]
    fn noiseless_value_model_differs_only_at_leak_slots() {
        let cfg = ScenarioConfig {
            n_traces: 16,
            n_samples: 24,
            weight: 1.0,
            input_a: 0.25,
            input_b: 0.75,
            n_ops: 3,
            shuffle: false,
            jitter_bound: 0,
            noise_sigma: 0.0,
            leak_model: LeakModel::Value,
            seed: 9,
        };
        let pair = generate_pair(&cfg).unwrap();
        let leak_slots: Vec<usize> = (LEAD_IN..LEAD_IN + cfg.n_ops).collect();
        for t in 0..cfg.n_traces {
            for j in 0..cfg.n_samples {
                let (va, vb) = (pair.a().row(t)[j], pair.b().row(t)[j]);
                if leak_slots.contains(&j) {
                    if j == LEAD_IN {
                        // the sensitive slot carries the condition difference
                        assert_eq!(va, 0.25);
                        assert_eq!(vb, 0.75);
                    } else {
                        assert_eq!(va, vb, "nuisance slots are condition-independent");
                    }
                } else {
                    assert_eq!(va, 0.0);
                    assert_eq!(vb, 0.0);
                }
            }
        }
    }

    #[test]
    fn shuffling_preserves_leak_multiset() {
        let base = ScenarioConfig {
            n_traces: 32,
            n_samples: 24,
            weight: 2.5,
            input_a: 0.12,
            input_b: 0.93,
            n_ops: 6,
            shuffle: false,
            jitter_bound: 0,
            noise_sigma: 0.0,
            leak_model: LeakModel::HammingWeight,
            seed: 11,
        };
        let mut shuffled = base.clone();
        shuffled.shuffle = true;
        let plain = generate_pair(&base).unwrap();
        let mixed = generate_pair(&shuffled).unwrap();
        for t in 0..base.n_traces {
            let window = LEAD_IN..LEAD_IN + base.n_ops;
            let p = total_cmp_sorted(plain.a().row(t)[window.clone()].to_vec());
            let m = total_cmp_sorted(mixed.a().row(t)[window].to_vec());
            assert_eq!(p, m, "trace {t}: shuffling must only permute leak values");
        }
    }

    #[test]
    fn jitter_stays_inside_the_trace() {
        let cfg = ScenarioConfig {
            n_traces: 64,
            n_samples: GUARD_MARGIN + 5 + 7, // minimum legal size
            weight: 1.0,
            input_a: 0.2,
            input_b: 0.8,
            n_ops: 5,
            shuffle: true,
            jitter_bound: 7,
            noise_sigma: 0.0,
            leak_model: LeakModel::Value,
            seed: 13,
        };
        cfg.validate().unwrap();
        // would panic on out-of-bounds placement if the margin were wrong
        let pair = generate_pair(&cfg).unwrap();
        assert_eq!(pair.n_samples(), cfg.n_samples);
    }

    #[test]
    fn variance_only_matches_the_mixture_law() {
        let cfg = ScenarioConfig {
            n_traces: 100_000,
            n_samples: 16,
            weight: 2.0,
            input_a: 0.0,
            input_b: 1.0,
            n_ops: 2,
            shuffle: false,
            jitter_bound: 0,
            noise_sigma: 1.0,
            leak_model: LeakModel::VarianceOnly,
            seed: 17,
        };
        let pair = generate_pair(&cfg).unwrap();
        let n = cfg.n_traces;
        let slot = LEAD_IN;
        let mut a_col = Vec::new();
        let mut b_col = Vec::new();
        pair.a().column_into(slot, n, &mut a_col);
        pair.b().column_into(slot, n, &mut b_col);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        // means agree within Monte Carlo error (se ~ sigma_b/sqrt(n))
        let (ma, mb) = (mean(&a_col), mean(&b_col));
        assert!((ma - mb).abs() < 0.03, "means {ma} vs {mb}");
        // law of total variance: var_b - var_a = weight^2
        let (va, vb) = (var(&a_col), var(&b_col));
        assert!(
            (vb - va - cfg.weight * cfg.weight).abs() < 0.1,
            "variance gap {} vs {}",
            vb - va,
            cfg.weight * cfg.weight
        );
    }

    #[test]
    fn config_validation_errors() {
        let ok = find_scenario("unprotected").unwrap().config;

        let mut bad = ok.clone();
        bad.input_b = bad.input_a;
        assert_eq!(bad.validate().unwrap_err(), ScenarioError::EqualInputs);

        let mut bad = ok.clone();
        bad.input_b = 1.5;
        assert!(matches!(
            bad.validate().unwrap_err(),
            ScenarioError::InputOutOfRange(_, _)
        ));

        let mut bad = ok.clone();
        bad.n_ops = 0;
        assert_eq!(bad.validate().unwrap_err(), ScenarioError::NoOps);

        let mut bad = ok.clone();
        bad.n_samples = bad.n_ops + bad.jitter_bound + GUARD_MARGIN - 1;
        assert!(matches!(
            bad.validate().unwrap_err(),
            ScenarioError::TooFewSamples { .. }
        ));

        let mut bad = ok.clone();
        bad.noise_sigma = -1.0;
        assert!(matches!(
            bad.validate().unwrap_err(),
            ScenarioError::InvalidNoise(_)
        ));

        let mut bad = ok;
        bad.weight = f64::NAN;
        assert!(matches!(
            bad.validate().unwrap_err(),
            ScenarioError::InvalidWeight(_)
        ));
    }

    #[test]
    fn hamming_weight_quantizer_anchors() {
        // 0.3 -> round(38.4) = 38 = 0b00100110
        assert_eq!(hamming_weight_q17(0.3), 3.0);
        // 2.325 clamps to 127 = 0b01111111
        assert_eq!(hamming_weight_q17(2.325), 7.0);
        assert_eq!(hamming_weight_q17(0.0), 0.0);
        // -1.0 -> -128 = 0b10000000
        assert_eq!(hamming_weight_q17(-1.0), 1.0);
    }

    /// Relaxing the differing-inputs requirement is unnecessary for a null
    /// experiment: a zero weight makes both conditions identically
    /// distributed under every leak model.
    #[test]
    fn zero_weight_gives_exchangeable_conditions() {
        let cfg = ScenarioConfig {
            n_traces: 100,
            n_samples: 16,
            weight: 0.0,
            input_a: 0.2,
            input_b: 0.8,
            n_ops: 2,
            shuffle: false,
            jitter_bound: 0,
            noise_sigma: 1.0,
            leak_model: LeakModel::VarianceOnly,
            seed: 23,
        };
        let pair = generate_pair(&cfg).unwrap();
        // conditions use disjoint rng substreams, so values differ, but the
        // generating law is identical; a cheap two-moment sanity check:
        let all_a: f64 = pair.a().samples().iter().sum::<f64>() / 1600.0;
        let all_b: f64 = pair.b().samples().iter().sum::<f64>() / 1600.0;
        assert!((all_a - all_b).abs() < 0.15);
    }
}
