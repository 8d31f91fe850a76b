//! Static log-log SVG plot: one scatter of (parameter, error) points and
//! the fitted power-law line. No styling dependencies, plain SVG 1.1.

use crate::runner::RunOutput;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 48.0;
const BOTTOM: f64 = 56.0;

struct LogScale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl LogScale {
    fn new(values: impl Iterator<Item = f64>, px_lo: f64, px_hi: f64) -> LogScale {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            if v > 0.0 && v.is_finite() {
                lo = lo.min(v.log10());
                hi = hi.max(v.log10());
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 0.5 {
            let mid = 0.5 * (lo + hi);
            lo = mid - 0.25;
            hi = mid + 0.25;
        }
        let pad = 0.06 * (hi - lo);
        LogScale { lo: lo - pad, hi: hi + pad, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        let t = (v.log10() - self.lo) / (self.hi - self.lo);
        self.px_lo + t * (self.px_hi - self.px_lo)
    }

    fn decades(&self) -> Vec<i32> {
        let a = self.lo.ceil() as i32;
        let b = self.hi.floor() as i32;
        (a..=b).collect()
    }
}

fn fmt_tick(exp: i32) -> String {
    format!("1e{exp}")
}

/// Renders the run's points and fitted line as a complete SVG document.
pub fn render(out: &RunOutput) -> String {
    let xs = LogScale::new(out.points.iter().map(|p| p.0), LEFT, WIDTH - RIGHT);
    let ys = LogScale::new(out.points.iter().map(|p| p.1), HEIGHT - BOTTOM, TOP);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Decade gridlines with tick labels.
    for exp in xs.decades() {
        let px = xs.map(10f64.powi(exp));
        s.push_str(&format!(
            "<line x1=\"{px:.1}\" y1=\"{TOP}\" x2=\"{px:.1}\" y2=\"{:.1}\" \
             stroke=\"#ddd\"/>\n",
            HEIGHT - BOTTOM
        ));
        s.push_str(&format!(
            "<text x=\"{px:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" \
             fill=\"#333\">{}</text>\n",
            HEIGHT - BOTTOM + 18.0,
            fmt_tick(exp)
        ));
    }
    for exp in ys.decades() {
        let py = ys.map(10f64.powi(exp));
        s.push_str(&format!(
            "<line x1=\"{LEFT}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" \
             stroke=\"#ddd\"/>\n",
            WIDTH - RIGHT
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\" \
             fill=\"#333\">{}</text>\n",
            LEFT - 8.0,
            py + 4.0,
            fmt_tick(exp)
        ));
    }

    // Plot frame.
    s.push_str(&format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
         stroke=\"#333\"/>\n",
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    ));

    // Fitted line y = exp(intercept) * x^slope across the x-range.
    if let Some((slope, intercept)) = out.fit {
        let x_min = out.points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let x_max = out.points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        if x_min > 0.0 && x_max > x_min {
            let y_at = |x: f64| (intercept + slope * x.ln()).exp();
            s.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" \
                 stroke=\"#c22\" stroke-width=\"1.5\"/>\n",
                xs.map(x_min),
                ys.map(y_at(x_min)),
                xs.map(x_max),
                ys.map(y_at(x_max))
            ));
        }
    }

    // Measured points.
    for &(x, y) in &out.points {
        if x > 0.0 && y > 0.0 {
            s.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.5\" fill=\"#225\"/>\n",
                xs.map(x),
                ys.map(y)
            ));
        }
    }

    // Title and axis labels.
    let title = match out.slope {
        Some(slope) => format!("{} (slope {slope:.3})", out.experiment),
        None => out.experiment.clone(),
    };
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\" \
         fill=\"#111\">{title}</text>\n",
        0.5 * WIDTH
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" \
         fill=\"#111\">{}</text>\n",
        0.5 * WIDTH,
        HEIGHT - 14.0,
        out.x_label
    ));
    s.push_str(&format!(
        "<text x=\"20\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 20 {:.1})\" fill=\"#111\">error</text>\n",
        0.5 * HEIGHT,
        0.5 * HEIGHT
    ));
    s.push_str("</svg>\n");
    s
}
