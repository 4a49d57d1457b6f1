//! End-to-end campaign: simulate a protected implementation, run both
//! tests per time sample, and write the plot-ready artifacts.
//!
//! ```bash
//! cargo run --release --example simulate_and_assess
//! ```

use std::fs;

use adla::{assess_pair, derive_thresholds, find_scenario, generate_pair, CANONICAL_ALPHA};

fn main() {
    let preset = find_scenario("shuffled_jittered").expect("built-in preset");
    println!("scenario: {} — {}", preset.name, preset.description);

    let pair = generate_pair(&preset.config).expect("preset config is valid");
    let thresholds = derive_thresholds(CANONICAL_ALPHA, None).expect("canonical alpha");
    let report = assess_pair(&pair, &thresholds);

    println!(
        "{} traces x {} samples per condition",
        report.n_traces_used, report.n_samples
    );
    if let Some(m) = report.max_t_norm {
        println!("max |t|/tau_t  = {:.3} at sample {}", m.value, m.sample_index);
    }
    if let Some(m) = report.max_a2_norm {
        println!("max A^2/tau_a  = {:.3} at sample {}", m.value, m.sample_index);
    }
    println!(
        "detections: TVLA {} sample(s), ADLA {} sample(s)",
        report.tvla_leaks.len(),
        report.adla_leaks.len()
    );

    let dir = tempfile::tempdir().expect("temp dir");
    let csv = dir.path().join("stats.csv");
    let json = dir.path().join("report.json");
    let svg = dir.path().join("panels.svg");
    let per_sample = report.per_sample.as_ref().expect("fresh report");

    let mut buf = Vec::new();
    adla::assess::write_stats_csv(per_sample, &mut buf).expect("csv serializes");
    fs::write(&csv, buf).expect("write csv");
    fs::write(&json, report.to_json()).expect("write json");
    fs::write(&svg, adla::svg::render_panels(per_sample)).expect("write svg");

    println!();
    println!("artifacts written to {}:", dir.path().display());
    for path in [&csv, &json, &svg] {
        println!(
            "  {} ({} bytes)",
            path.file_name().unwrap().to_string_lossy(),
            fs::metadata(path).unwrap().len()
        );
    }
}
