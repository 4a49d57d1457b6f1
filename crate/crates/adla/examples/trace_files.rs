//! Working with trace containers: binary round trips, labels and CSV
//! import.
//!
//! ```bash
//! cargo run --release --example trace_files
//! ```

use adla::{Dtype, TraceSet};

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");

    // a small real32 set with a condition label
    let mut set = TraceSet::new(
        2,
        4,
        vec![1.5, -2.0, 0.25, 3.0, 0.5, 0.5, -1.25, 2.0],
        "",
        Dtype::Real32,
    )
    .expect("valid matrix");
    set.set_label("fixed input 0.85");

    let path = dir.path().join("condition_a.adla");
    let bytes = set.save(&path).expect("save container");
    println!(
        "wrote {} ({} bytes: 16-byte header + {}x{} real32 payload)",
        path.display(),
        bytes,
        set.n_traces(),
        set.n_samples()
    );
    println!("label sidecar: {}.label", path.display());

    let back = TraceSet::load(&path).expect("load container");
    assert_eq!(back, set);
    println!("round trip ok, label = {:?}", back.label());

    // CSV import always widens to real64
    let csv = "0.10,0.20,0.30\n0.40,0.50,0.60\n0.70,0.80,0.90";
    let imported = TraceSet::read_csv(csv.as_bytes()).expect("well-formed csv");
    println!(
        "csv import: {}x{} as {:?}, first row {:?}",
        imported.n_traces(),
        imported.n_samples(),
        imported.dtype(),
        imported.row(0)
    );

    // malformed input is rejected with a position
    let err = TraceSet::read_csv("1.0,2.0\n3.0".as_bytes()).unwrap_err();
    println!("ragged csv rejected: {err}");
    let err = TraceSet::read_csv("1.0,oops\n".as_bytes()).unwrap_err();
    println!("bad token rejected:  {err}");

    // corruption is caught on load
    let truncated = dir.path().join("broken.adla");
    let mut raw = std::fs::read(&path).expect("reread container");
    raw.truncate(raw.len() - 3);
    std::fs::write(&truncated, raw).expect("write broken file");
    let err = TraceSet::load(&truncated).unwrap_err();
    println!("truncation rejected: {err}");
}
