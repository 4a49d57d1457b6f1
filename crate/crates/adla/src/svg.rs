//! Self-contained SVG rendering of the two normalized-statistic panels.
//!
//! No plotting dependency: the CSV outputs are the primary plotting
//! interface and this renderer exists so a campaign can be eyeballed
//! without leaving the terminal toolchain.

use crate::assess::SampleStatistics;

const WIDTH: f64 = 960.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_LEFT: f64 = 62.0;
const MARGIN_RIGHT: f64 = 18.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 42.0;

struct Panel<'a> {
    title: &'a str,
    color: &'a str,
    values: Vec<(usize, f64)>,
}

fn fmt_tick(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e6 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

fn render_panel(out: &mut String, panel: &Panel, offset_y: f64, n_samples: usize) {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x0 = MARGIN_LEFT;
    let y0 = offset_y + MARGIN_TOP;

    let max_value = panel
        .values
        .iter()
        .map(|(_, v)| *v)
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1.2);
    let x_of = |i: usize| x0 + plot_w * i as f64 / (n_samples.max(2) - 1) as f64;
    let y_of = |v: f64| y0 + plot_h * (1.0 - (v / max_value).clamp(0.0, 1.0));

    out.push_str(&format!(
        "<rect x=\"{x0}\" y=\"{y0}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{x0}\" y=\"{}\" font-family=\"monospace\" font-size=\"14\">{}</text>\n",
        y0 - 10.0,
        panel.title
    ));

    // y ticks at 0, 0.5, 1, and the max
    for tick in [0.0, 0.5, 1.0, max_value] {
        let y = y_of(tick);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{x0}\" y2=\"{y}\" stroke=\"#888\"/>\n",
            x0 - 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>\n",
            x0 - 7.0,
            y + 4.0,
            fmt_tick(tick)
        ));
    }
    // x ticks at 0, mid, last
    for i in [0, (n_samples - 1) / 2, n_samples - 1] {
        let x = x_of(i);
        let yb = y0 + plot_h;
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{yb}\" x2=\"{x}\" y2=\"{}\" stroke=\"#888\"/>\n",
            yb + 4.0
        ));
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"middle\">{i}</text>\n",
            yb + 17.0
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" \
         text-anchor=\"middle\">time sample</text>\n",
        x0 + plot_w / 2.0,
        y0 + plot_h + 34.0
    ));

    // detection threshold at 1.0
    let y1 = y_of(1.0);
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y1}\" x2=\"{}\" y2=\"{y1}\" stroke=\"#c0392b\" \
         stroke-width=\"1\" stroke-dasharray=\"6 4\"/>\n",
        x0 + plot_w
    ));

    let points: Vec<String> = panel
        .values
        .iter()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, v)| format!("{:.2},{:.2}", x_of(*i), y_of(*v)))
        .collect();
    out.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"/>\n",
        points.join(" "),
        panel.color
    ));
}

/// Renders the per-sample normalized statistics as two stacked panels
/// (|t|/tau_t above, A^2/tau_a below) with the detection threshold marked
/// at 1. Returns a complete standalone SVG document.
pub fn render_panels(per_sample: &[SampleStatistics]) -> String {
    assert!(!per_sample.is_empty(), "nothing to render");
    let n_samples = per_sample.len();
    let total_h = 2.0 * PANEL_HEIGHT;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{total_h}\" \
         viewBox=\"0 0 {WIDTH} {total_h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));
    let tvla = Panel {
        title: "TVLA: |t| / tau_t",
        color: "#2c3e80",
        values: per_sample
            .iter()
            .map(|s| (s.sample_index, s.t_norm))
            .collect(),
    };
    let adla = Panel {
        title: "ADLA: A^2 / tau_a",
        color: "#1e7045",
        values: per_sample
            .iter()
            .map(|s| (s.sample_index, s.a2_norm))
            .collect(),
    };
    render_panel(&mut out, &tvla, 0.0, n_samples);
    render_panel(&mut out, &adla, PANEL_HEIGHT, n_samples);
    out.push_str("</svg>\n");
    out
}
