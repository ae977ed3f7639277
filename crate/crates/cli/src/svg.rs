//! Minimal plots: line charts for one-dimensional scans, heat maps for the
//! two-dimensional ones.

use std::fmt::Write as _;

use crate::output::Table;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Self {
            x: span(&mut xs.clone()),
            y: span(&mut ys.clone()),
        }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let _ = write!(
            out,
            r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        for (v, anchor) in [(self.x.0, "start"), (self.x.1, "end")] {
            let _ = write!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}" font-size="12">{}</text>"#,
                self.px(v),
                H - PAD + 16.0,
                short(v)
            );
        }
        for v in [self.y.0, self.y.1] {
            let _ = write!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="12">{}</text>"#,
                PAD - 6.0,
                self.py(v) + 4.0,
                short(v)
            );
        }
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{xlabel}</text>"#,
            W / 2.0,
            H - 14.0
        );
        let _ = write!(
            out,
            r#"<text x="16" y="{:.1}" text-anchor="middle" font-size="14" transform="rotate(-90 16 {:.1})">{ylabel}</text>"#,
            H / 2.0,
            H / 2.0
        );
    }
}

fn short(v: f64) -> String {
    format!("{:.4}", v)
        .trim_end_matches('0')
        .trim_end_matches('.')
        .to_string()
}

fn open() -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )
}

fn lines(series: &[(&str, Vec<(f64, f64)>)], xlabel: &str) -> String {
    let all = || series.iter().flat_map(|s| s.1.iter().copied());
    let frame = Frame::new(all().map(|p| p.0), all().map(|p| p.1));
    let mut out = open();
    frame.axes(&mut out, xlabel, "n̄");
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = write!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        if series.len() > 1 {
            let _ = write!(
                out,
                r#"<text x="{:.1}" y="{:.1}" fill="{color}" font-size="12">{name}</text>"#,
                W - PAD - 90.0,
                PAD + 16.0 * (k as f64 + 1.0)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// `cells` are `(x, y, value in [0, 1])` on a regular grid.
fn heat(cells: &[(f64, f64, f64)], xlabel: &str, ylabel: &str) -> String {
    let frame = Frame::new(cells.iter().map(|c| c.0), cells.iter().map(|c| c.1));
    let distinct = |f: fn(&(f64, f64, f64)) -> f64| {
        let mut v: Vec<f64> = cells.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len().max(1) as f64
    };
    let cw = (W - 2.0 * PAD) / distinct(|c| c.0);
    let ch = (H - 2.0 * PAD) / distinct(|c| c.1);
    let mut out = open();
    for &(x, y, v) in cells {
        let v = v.clamp(0.0, 1.0);
        let (r, b) = ((255.0 * v) as u8, (255.0 * (1.0 - v)) as u8);
        let _ = write!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},64,{b})"/>"#,
            frame.px(x) - cw / 2.0,
            frame.py(y) - ch / 2.0,
            cw,
            ch
        );
    }
    frame.axes(&mut out, xlabel, ylabel);
    out.push_str("</svg>\n");
    out
}

pub fn render(table: &Table) -> String {
    match table {
        Table::Sweep(rows) => lines(&[("n̄", rows.iter().map(|r| (r.p, r.nbar)).collect())], "p"),
        Table::Size(rows) => lines(
            &[("n̄", rows.iter().map(|r| (r.n as f64, r.nbar)).collect())],
            "N",
        ),
        Table::Compare(rows) => {
            let mut series = vec![
                (
                    "collective",
                    rows.iter().map(|r| (r.p, r.nbar_collective)).collect(),
                ),
                (
                    "mean-field",
                    rows.iter().map(|r| (r.p, r.nbar_meanfield)).collect(),
                ),
            ];
            if rows.iter().all(|r| r.nbar_exact.is_some()) {
                series.push((
                    "exact",
                    rows.iter()
                        .filter_map(|r| r.nbar_exact.map(|e| (r.p, e)))
                        .collect(),
                ));
            }
            lines(&series, "p")
        }
        Table::Sweep2d(rows) => heat(
            &rows.iter().map(|r| (r.x, r.p, r.nbar)).collect::<Vec<_>>(),
            "x",
            "p",
        ),
        Table::Basin(rows) => {
            let value = |l: &str| match l {
                "toN1" => 1.0,
                "toN2" => 0.0,
                _ => 0.5,
            };
            heat(
                &rows
                    .iter()
                    .map(|r| (r.q0, r.a0, value(&r.label)))
                    .collect::<Vec<_>>(),
                "⟨Q⟩₀",
                "⟨A⟩₀",
            )
        }
        Table::Interval(_) => String::new(),
    }
}
