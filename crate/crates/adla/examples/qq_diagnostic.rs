//! Normal Q-Q diagnostic of a leaking time sample.
//!
//! ```bash
//! cargo run --release --example qq_diagnostic
//! ```
//!
//! Interpreting Welch's t against a normal-derived threshold leans on the
//! leakage being roughly Gaussian per sample. Under shuffling and jitter
//! it is not: the strongest-leaking column is a mixture with a rare
//! large-amplitude component, and its Q-Q points bend far away from the
//! least-squares reference line. A quiet (noise-only) column stays on it.

use adla::{assess_pair, find_scenario, generate_pair, qq_fit, qq_points, ThresholdSpec};

fn summarize(name: &str, column: &[f64]) {
    let points = qq_points(column);
    let fit = qq_fit(&points);
    println!(
        "{name}: slope {:.3}, intercept {:.3}, residual rms / sd = {:.4}",
        fit.slope, fit.intercept, fit.residual_rms
    );
    // compact ascii sketch: empirical quantiles at a few plotting positions
    let picks = [0.01, 0.10, 0.25, 0.50, 0.75, 0.90, 0.99];
    let n = points.len();
    print!("  quantiles:");
    for p in picks {
        let idx = ((p * n as f64) as usize).min(n - 1);
        print!(" {:>8.3}", points[idx].empirical);
    }
    println!();
}

fn main() {
    let mut config = find_scenario("shuffled_jittered").expect("built-in preset").config;
    config.n_traces = 1000;
    let pair = generate_pair(&config).expect("preset config is valid");

    // locate the strongest ADLA column
    let report = assess_pair(&pair, &ThresholdSpec::paper());
    let peak = report.max_a2_norm.expect("noisy campaign has live columns");
    println!(
        "strongest ADLA column: sample {} (A^2/tau_a = {:.2})",
        peak.sample_index, peak.value
    );
    println!();

    let mut column = Vec::new();
    pair.b()
        .column_into(peak.sample_index, pair.n_traces(), &mut column);
    summarize("leak column ", &column);

    let quiet = pair.n_samples() - 1; // trailing guard is noise-only
    pair.b().column_into(quiet, pair.n_traces(), &mut column);
    summarize("quiet column", &column);

    println!();
    println!("write the full point set for plotting with the CLI:");
    println!("  adla qq --set b.adla --sample-index {} --out qq.csv", peak.sample_index);
}
