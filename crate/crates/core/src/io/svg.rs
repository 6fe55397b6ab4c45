use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::SimTrace;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 4000;
const PALETTE: [&str; 6] = ["#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#555555"];

/// Solid `(--)` for measured or estimated quantities, dashed `(- -)` for
/// references and true values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineStyle {
    Solid,
    Dashed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub channel: String,
    pub style: LineStyle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    /// File stem of the emitted SVG.
    pub name: String,
    pub title: String,
    pub series: Vec<SeriesSpec>,
}

impl PlotSpec {
    pub fn new(name: &str, title: &str) -> Self {
        Self {
            name: name.to_string(),
            title: title.to_string(),
            series: Vec::new(),
        }
    }

    pub fn solid(mut self, channel: &str) -> Self {
        self.series.push(SeriesSpec {
            channel: channel.to_string(),
            style: LineStyle::Solid,
        });
        self
    }

    pub fn dashed(mut self, channel: &str) -> Self {
        self.series.push(SeriesSpec {
            channel: channel.to_string(),
            style: LineStyle::Dashed,
        });
        self
    }
}

/// `(t_min, t_max, y_min, y_max)` of the plotted data, each axis widened by
/// 5% of its span on both sides. Non-finite samples are ignored.
pub fn axis_ranges(trace: &SimTrace, plot: &PlotSpec) -> Result<(f64, f64, f64, f64)> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in &plot.series {
        for v in trace.channel(&s.channel)?.iter().filter(|v| v.is_finite()) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !lo.is_finite() {
        lo = -1.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let t0 = trace.time[0];
    let t1 = *trace.time.last().unwrap_or(&t0);
    let (t0, t1) = if t1 > t0 { (t0, t1) } else { (t0 - 0.5, t0 + 0.5) };
    let ym = 0.05 * (hi - lo);
    let tm = 0.05 * (t1 - t0);
    Ok((t0 - tm, t1 + tm, lo - ym, hi + ym))
}

fn tick_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG line plot of the requested channels against `t`.
pub fn emit_svg(trace: &SimTrace, plot: &PlotSpec) -> Result<Vec<u8>> {
    if plot.series.is_empty() {
        return Err(Error::InvalidArgument(format!("plot `{}` has no series", plot.name)));
    }
    let (x0, x1, y0, y1) = axis_ranges(trace, plot)?;
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + (t - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + (y1 - v) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        out,
        r#"<g id="axes" data-xmin="{x0:e}" data-xmax="{x1:e}" data-ymin="{y0:e}" data-ymax="{y1:e}" stroke="black" stroke-width="1" fill="none">"#
    );
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/>"#);
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="11" fill="black">"#);
    let step = tick_step(x1 - x0);
    let mut tick = (x0 / step).ceil() * step;
    while tick <= x1 {
        let x = sx(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#999"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            trim_number(tick)
        );
        tick += step;
    }
    let step = tick_step(y1 - y0);
    let mut tick = (y0 / step).ceil() * step;
    while tick <= y1 {
        let y = sy(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#999"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            trim_number(tick)
        );
        tick += step;
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t [s]</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(out, "</g>");

    let stride = trace.len().div_ceil(MAX_POINTS).max(1);
    for (i, s) in plot.series.iter().enumerate() {
        let values = trace.channel(&s.channel)?;
        let color = PALETTE[i % PALETTE.len()];
        let dash = match s.style {
            LineStyle::Solid => "",
            LineStyle::Dashed => r#" stroke-dasharray="6,4""#,
        };
        let mut points = String::new();
        for (t, v) in trace.time.iter().zip(values).step_by(stride) {
            if v.is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", sx(*t), sy(*v));
            }
        }
        let _ = writeln!(
            out,
            r#"<polyline data-channel="{}" fill="none" stroke="{color}" stroke-width="1.4"{dash} points="{}"/>"#,
            escape(&s.channel),
            points.trim_end()
        );
        let ly = TOP + 14.0 + 14.0 * i as f64;
        let lx = LEFT + pw - 150.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.4"{dash}/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&s.channel)
        );
    }
    out.push_str("</svg>\n");
    Ok(out.into_bytes())
}

fn trim_number(v: f64) -> String {
    let v = if v.abs() < 1e-12 { 0.0 } else { v };
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> SimTrace {
        let mut tr = SimTrace::new(&["a", "b"]);
        for k in 0..=100 {
            let t = k as f64 * 0.01;
            tr.push_row(t, &[t.sin(), 2.0 * t - 0.5]);
        }
        tr
    }

    #[test]
    fn two_series_two_polylines() {
        let svg = emit_svg(&sample_trace(), &PlotSpec::new("p", "demo").solid("a").dashed("b")).unwrap();
        let text = String::from_utf8(svg).unwrap();
        assert_eq!(text.matches("<polyline").count(), 2);
        assert_eq!(text.matches("stroke-dasharray").count(), 2); // series + legend
    }

    #[test]
    fn deterministic_bytes() {
        let spec = PlotSpec::new("p", "demo").solid("a").dashed("b");
        assert_eq!(
            emit_svg(&sample_trace(), &spec).unwrap(),
            emit_svg(&sample_trace(), &spec).unwrap()
        );
    }

    #[test]
    fn ranges_have_five_percent_margin() {
        let tr = sample_trace();
        let spec = PlotSpec::new("p", "demo").solid("a").dashed("b");
        let (t0, t1, lo, hi) = axis_ranges(&tr, &spec).unwrap();
        let min = tr.channel("b").unwrap()[0]; // −0.5
        let max = tr.channel("b").unwrap()[100]; // 1.5
        assert!((lo - (min - 0.1)).abs() < 1e-12 && (hi - (max + 0.1)).abs() < 1e-12);
        assert!((t0 + 0.05).abs() < 1e-12 && (t1 - 1.05).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_and_unknown() {
        let spec = PlotSpec::new("p", "demo").solid("a");
        assert!(matches!(emit_svg(&SimTrace::new(&["a"]), &spec), Err(Error::EmptyTrace)));
        let spec = PlotSpec::new("p", "demo").solid("zzz");
        assert!(matches!(emit_svg(&sample_trace(), &spec), Err(Error::UnknownChannel(_))));
    }
}
