//! Deterministic SVG plots. Coordinates are printed with two decimals so
//! identical inputs give byte-identical documents.

use std::fmt::Write as _;

use mstrend_core::clustering::{partition_at, ClusterTree};
use mstrend_core::estimation::local_linear_fit;
use mstrend_core::{AugmentedPanel, LocationScalePoint, PairReport};

const WIDTH: f64 = 720.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const PANEL_HEIGHT: f64 = 160.0;
const GAP: f64 = 40.0;
const TOP: f64 = 30.0;
/// Bandwidth of the trend overlays.
pub const OVERLAY_BANDWIDTH: f64 = 0.1;

const SERIES_COLOURS: [&str; 2] = ["#1f77b4", "#d62728"];
const GROUP_COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn header(out: &mut String, height: f64) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Maps rescaled time in `[0, 1]` to the horizontal pixel coordinate.
fn x_of(u: f64) -> f64 {
    LEFT + u * (WIDTH - LEFT - RIGHT)
}

struct Panel {
    top: f64,
    lo: f64,
    hi: f64,
}

impl Panel {
    fn new(top: f64, values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        if !lo.is_finite() || !hi.is_finite() {
            lo = -1.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            lo -= 1.0;
            hi += 1.0;
        }
        Self { top, lo, hi }
    }

    fn y_of(&self, v: f64) -> f64 {
        self.top + PANEL_HEIGHT * (self.hi - v) / (self.hi - self.lo)
    }

    fn frame(&self, out: &mut String, title: &str, ticks: &[(f64, String)]) {
        let bottom = self.top + PANEL_HEIGHT;
        writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            LEFT,
            self.top,
            WIDTH - LEFT - RIGHT,
            PANEL_HEIGHT
        )
        .unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, LEFT, self.top - 6.0, escape(title)).unwrap();
        for (u, label) in ticks {
            let x = x_of(*u);
            writeln!(out, r##"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/>"##, bottom + 4.0).unwrap();
            writeln!(
                out,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                bottom + 16.0,
                escape(label)
            )
            .unwrap();
        }
        for v in [self.lo, self.hi] {
            writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.2}</text>"#,
                LEFT - 4.0,
                self.y_of(v) + 4.0,
                v
            )
            .unwrap();
        }
    }

    fn polyline(&self, out: &mut String, values: &[f64], colour: &str) {
        let len = values.len() as f64;
        let pts: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(t, v)| format!("{:.2},{:.2}", x_of((t + 1) as f64 / len), self.y_of(*v)))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1" points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
    }
}

/// Five evenly spaced ticks labelled with time labels (or rescaled time).
fn time_ticks(times: Option<&[String]>) -> Vec<(f64, String)> {
    (0..=4)
        .map(|k| {
            let u = k as f64 / 4.0;
            let label = match times {
                Some(times) if !times.is_empty() => {
                    let t = ((u * times.len() as f64).round() as usize).clamp(1, times.len());
                    times[t - 1].clone()
                }
                _ => format!("{u:.2}"),
            };
            (u, label)
        })
        .collect()
}

/// Three stacked panels for one pair: (a) the augmented series, (b) their
/// local-linear trend estimates, (c) the rejected intervals as horizontal
/// bars, grey for all rejections and black for minimal ones.
pub fn render_interval_plot(
    pair: &PairReport,
    augmented: Option<&AugmentedPanel>,
    times: Option<&[String]>,
) -> String {
    let ticks = time_ticks(times);
    let mut out = String::new();
    let height = TOP + 3.0 * PANEL_HEIGHT + 2.0 * GAP + 30.0;
    header(&mut out, height);

    let ids = augmented.map(|a| (a.ids()[pair.i].clone(), a.ids()[pair.j].clone()));
    let title = match &ids {
        Some((a, b)) => format!("{a} vs {b}"),
        None => format!("series {} vs series {}", pair.i + 1, pair.j + 1),
    };
    let rows: Vec<Vec<f64>> = augmented
        .map(|a| vec![a.y_aug().row(pair.i).to_vec(), a.y_aug().row(pair.j).to_vec()])
        .unwrap_or_default();

    let top_a = TOP;
    let panel_a = Panel::new(top_a, rows.iter().flatten().copied());
    panel_a.frame(&mut out, &format!("(a) {title}: augmented series"), &ticks);
    for (row, colour) in rows.iter().zip(SERIES_COLOURS) {
        panel_a.polyline(&mut out, row, colour);
    }

    let fits: Vec<Vec<f64>> = rows
        .iter()
        .filter_map(|r| local_linear_fit(r, OVERLAY_BANDWIDTH).ok())
        .collect();
    let top_b = top_a + PANEL_HEIGHT + GAP;
    let panel_b = Panel::new(top_b, fits.iter().flatten().copied());
    panel_b.frame(&mut out, "(b) local linear trend estimates", &ticks);
    for (fit, colour) in fits.iter().zip(SERIES_COLOURS) {
        panel_b.polyline(&mut out, fit, colour);
    }

    let top_c = top_b + PANEL_HEIGHT + GAP;
    let panel_c = Panel::new(top_c, [0.0, 1.0].into_iter());
    panel_c.frame(&mut out, "(c) intervals with significant differences", &ticks);
    let mut bars: Vec<&LocationScalePoint> = pair.rejected.iter().collect();
    bars.sort_by(|a, b| a.h().total_cmp(&b.h()).then(a.u().total_cmp(&b.u())));
    let step = PANEL_HEIGHT / (bars.len() + 1) as f64;
    for (k, p) in bars.iter().enumerate() {
        let minimal = pair.minimal.iter().any(|m| m.same_interval(p));
        let y = top_c + PANEL_HEIGHT - (k + 1) as f64 * step;
        writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/>"#,
            x_of(p.lower()),
            x_of(p.upper()),
            if minimal { "black" } else { "#999999" }
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Leaf order for drawing: children of each merge are laid out left to right.
fn leaf_order(tree: &ClusterTree) -> Vec<usize> {
    let n = tree.n;
    let Some(root) = tree.merges.last() else {
        return (0..n).collect();
    };
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![root.new_id];
    while let Some(id) = stack.pop() {
        if id < n {
            order.push(id);
        } else {
            let m = &tree.merges[id - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    order
}

/// Dendrogram with merge heights on the vertical axis and a coloured
/// rectangle around each cluster of the `n_groups`-partition.
pub fn render_dendrogram(tree: &ClusterTree, labels: &[String], n_groups: usize) -> String {
    let n = tree.n;
    let mut out = String::new();
    let height = TOP + 2.0 * PANEL_HEIGHT + 60.0;
    header(&mut out, height);

    let heights: Vec<f64> = tree.merges.iter().map(|m| m.height).collect();
    let base = heights.iter().copied().fold(0.0f64, f64::min);
    let panel = Panel::new(TOP, heights.iter().copied().chain([base]));
    let plot_h = 2.0 * PANEL_HEIGHT;
    let y_of = |v: f64| TOP + plot_h * (panel.hi - v) / (panel.hi - panel.lo);
    let order = leaf_order(tree);
    let slot = (WIDTH - LEFT - RIGHT) / n as f64;
    let mut xpos = vec![0.0; 2 * n - 1];
    let mut ypos = vec![y_of(base); 2 * n - 1];
    for (k, &leaf) in order.iter().enumerate() {
        xpos[leaf] = LEFT + (k as f64 + 0.5) * slot;
    }

    writeln!(
        out,
        r##"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}" stroke="#444"/>"##,
        TOP + plot_h
    )
    .unwrap();
    for v in [panel.lo, panel.hi] {
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.2}</text>"#,
            LEFT - 4.0,
            y_of(v) + 4.0,
            v
        )
        .unwrap();
    }

    if let Ok(partition) = partition_at(tree, n_groups.clamp(1, n)) {
        for (g, members) in partition.groups().iter().enumerate() {
            let xs: Vec<f64> = members.iter().map(|&i| xpos[i]).collect();
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - slot * 0.45;
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + slot * 0.45;
            let inner = tree
                .merges
                .iter()
                .filter(|m| leaves_of(tree, m.new_id).iter().all(|l| members.contains(l)))
                .map(|m| m.height)
                .fold(base, f64::max);
            let top = y_of(inner) - 8.0;
            writeln!(
                out,
                r#"<rect x="{lo:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.15" stroke="{}"/>"#,
                hi - lo,
                y_of(base) + 4.0 - top,
                GROUP_COLOURS[g % GROUP_COLOURS.len()],
                GROUP_COLOURS[g % GROUP_COLOURS.len()]
            )
            .unwrap();
        }
    }

    for m in &tree.merges {
        let y = y_of(m.height);
        let (xl, xr) = (xpos[m.left], xpos[m.right]);
        writeln!(
            out,
            r#"<polyline fill="none" stroke="black" points="{xl:.2},{:.2} {xl:.2},{y:.2} {xr:.2},{y:.2} {xr:.2},{:.2}"/>"#,
            ypos[m.left],
            ypos[m.right]
        )
        .unwrap();
        xpos[m.new_id] = (xl + xr) / 2.0;
        ypos[m.new_id] = y;
    }
    for (k, &leaf) in order.iter().enumerate() {
        let label = labels.get(leaf).cloned().unwrap_or_else(|| (leaf + 1).to_string());
        let x = LEFT + (k as f64 + 0.5) * slot;
        let y = TOP + plot_h + 14.0;
        writeln!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="end" transform="rotate(-45 {x:.2} {y:.2})">{}</text>"#,
            escape(&label)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn leaves_of(tree: &ClusterTree, id: usize) -> Vec<usize> {
    if id < tree.n {
        return vec![id];
    }
    let m = &tree.merges[id - tree.n];
    let mut out = leaves_of(tree, m.left);
    out.extend(leaves_of(tree, m.right));
    out
}
