//! Static SVG rendering of band rows: each band is a horizontal segment at
//! ordinate `p/q`. The baseline `0/1` is drawn at ordinates 0 and 1.

use std::f64::consts::PI;
use std::fmt::Write;

use crate::output::{BandRow, RowRegime};

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 520.0;
const MARGIN: f64 = 60.0;
const MIN_SEGMENT: f64 = 0.6;

struct Panel {
    top: f64,
    x_range: (f64, f64),
    title: String,
    x_label: &'static str,
}

impl Panel {
    fn x(&self, v: f64) -> f64 {
        let (a, b) = self.x_range;
        MARGIN + (v - a) / (b - a) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, ordinate: f64) -> f64 {
        self.top + PANEL_HEIGHT - MARGIN - ordinate * (PANEL_HEIGHT - 2.0 * MARGIN)
    }

    fn frame(&self, svg: &mut String) {
        let (x0, x1) = (MARGIN, WIDTH - MARGIN);
        let (y0, y1) = (self.y(0.0), self.y(1.0));
        let _ = writeln!(
            svg,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="gray"/>"#,
            x1 - x0,
            y0 - y1
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="16">{}</text>"#,
            WIDTH / 2.0,
            self.top + MARGIN / 2.0,
            self.title
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
            WIDTH / 2.0,
            y0 + 40.0,
            self.x_label
        );
        for v in [self.x_range.0, self.x_range.1] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{:.3}</text>"#,
                self.x(v),
                y0 + 18.0,
                v
            );
        }
        for t in [0.0, 0.5, 1.0] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{t}</text>"#,
                MARGIN - 6.0,
                self.y(t) + 4.0
            );
        }
    }

    fn segment(&self, svg: &mut String, lo: f64, hi: f64, ordinate: f64, colour: &str) {
        let (mut a, mut b) = (self.x(lo), self.x(hi));
        if b - a < MIN_SEGMENT {
            let mid = 0.5 * (a + b);
            a = mid - MIN_SEGMENT / 2.0;
            b = mid + MIN_SEGMENT / 2.0;
        }
        let y = self.y(ordinate);
        let _ = writeln!(
            svg,
            r#"<line x1="{a:.2}" y1="{y:.2}" x2="{b:.2}" y2="{y:.2}" stroke="{colour}" stroke-width="2"/>"#
        );
    }
}

fn ordinates(row: &BandRow) -> Vec<f64> {
    if row.p == 0 {
        vec![0.0, 1.0]
    } else {
        vec![row.p as f64 / row.q as f64]
    }
}

/// SVG document for the rows. With `asymptotic_n`, the asymptotic rows get
/// a second panel with abscissa `k − nπ`.
pub fn render_butterfly(rows: &[BandRow], asymptotic_n: Option<u32>) -> String {
    let spectrum: Vec<&BandRow> = rows.iter().filter(|r| r.regime != RowRegime::Asymptotic).collect();
    let asymptotic: Vec<&BandRow> = rows.iter().filter(|r| r.regime == RowRegime::Asymptotic).collect();
    let panels = 1 + usize::from(asymptotic_n.is_some() && !asymptotic.is_empty());
    let height = PANEL_HEIGHT * panels as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let lo = spectrum.iter().map(|r| r.e_lo).fold(0.0, f64::min);
    let hi = spectrum.iter().map(|r| r.e_hi).fold(1.0, f64::max);
    let panel = Panel {
        top: 0.0,
        x_range: (lo, hi),
        title: "Band spectrum against flux p/q".into(),
        x_label: "energy",
    };
    panel.frame(&mut svg);
    for r in &spectrum {
        let colour = if r.regime == RowRegime::Negative { "#b03020" } else { "#1f4e9a" };
        for y in ordinates(r) {
            panel.segment(&mut svg, r.e_lo, r.e_hi, y, colour);
        }
    }

    if let (Some(n), true) = (asymptotic_n, panels == 2) {
        let base = n as f64 * PI;
        let panel = Panel {
            top: PANEL_HEIGHT,
            x_range: (0.0, PI),
            title: format!("Bands in the momentum window ({n}\u{3c0}, {}\u{3c0})", n + 1),
            x_label: "k mod \u{3c0}",
        };
        panel.frame(&mut svg);
        for r in &asymptotic {
            let (a, b) = (r.e_lo.sqrt() - base, r.e_hi.sqrt() - base);
            for y in ordinates(r) {
                panel.segment(&mut svg, a, b, y, "#1f4e9a");
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_segments_and_baseline() {
        let rows = vec![
            BandRow {
                p: 0,
                q: 1,
                regime: RowRegime::Positive,
                band_index: 1,
                e_lo: 1.0,
                e_hi: 2.0,
            },
            BandRow {
                p: 1,
                q: 2,
                regime: RowRegime::Negative,
                band_index: 1,
                e_lo: -3.0,
                e_hi: -2.0,
            },
        ];
        let svg = render_butterfly(&rows, None);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<line").count(), 3);
    }
}
