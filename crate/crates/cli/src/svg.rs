//! Minimal self-contained SVG line plots (no plotting dependency;
//! figures are artifacts, not UIs).

use sok_core::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Render series as polylines with linear or log10 y axis.
/// Log-scale ticks sit on decades.
pub fn line_plot(title: &str, series: &[Series], log_y: bool) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::InvalidArg("nothing to plot".into()));
    }
    let transform = |y: f64| -> Option<f64> {
        if log_y {
            if y > 0.0 {
                Some(y.log10())
            } else {
                None
            }
        } else {
            Some(y)
        }
    };

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            let Some(ty) = transform(y) else { continue };
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(ty);
            y_max = y_max.max(ty);
        }
    }
    if !x_min.is_finite() || !y_min.is_finite() {
        return Err(Error::InvalidArg(
            "no plottable points (log scale requires positive values)".into(),
        ));
    }
    if (x_max - x_min).abs() < 1e-300 {
        x_max = x_min + 1.0;
    }
    if (y_max - y_min).abs() < 1e-300 {
        y_max = y_min + 1.0;
        y_min -= 1.0;
    }

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |ty: f64| MARGIN_TOP + (1.0 - (ty - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        MARGIN_LEFT,
        xml_escape(title)
    ));

    // axes
    svg.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = MARGIN_LEFT,
        r = WIDTH - MARGIN_RIGHT,
        t = MARGIN_TOP,
        b = HEIGHT - MARGIN_BOTTOM,
    ));

    // y ticks: decades on log scale, 5 even ticks otherwise
    let y_ticks: Vec<f64> = if log_y {
        let lo = y_min.floor() as i64;
        let hi = y_max.ceil() as i64;
        (lo..=hi).map(|e| e as f64).collect()
    } else {
        (0..=4)
            .map(|i| y_min + (y_max - y_min) * i as f64 / 4.0)
            .collect()
    };
    for ty in &y_ticks {
        let y = py(*ty);
        if !(MARGIN_TOP - 1.0..=HEIGHT - MARGIN_BOTTOM + 1.0).contains(&y) {
            continue;
        }
        let label = if log_y {
            format!("1e{}", *ty as i64)
        } else {
            format!("{ty:.3e}")
        };
        svg.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"#cccccc\"/>\n\
             <text x=\"{tx}\" y=\"{ty_pos}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{label}</text>\n",
            x0 = MARGIN_LEFT,
            x1 = WIDTH - MARGIN_RIGHT,
            tx = MARGIN_LEFT - 6.0,
            ty_pos = y + 4.0,
        ));
    }
    // x ticks
    for i in 0..=4 {
        let x = x_min + (x_max - x_min) * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{:.0}</text>\n",
            px(x),
            HEIGHT - MARGIN_BOTTOM + 18.0,
            x
        ));
    }

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = s
            .points
            .iter()
            .filter_map(|&(x, y)| transform(y).map(|ty| format!("{:.2},{:.2}", px(x), py(ty))))
            .collect();
        if points.is_empty() {
            continue;
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN_RIGHT + 10.0,
            MARGIN_TOP + 16.0 * (i as f64 + 1.0),
            xml_escape(&s.name)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
