//! Minimal self-contained SVG emission: scatter, box and line charts with
//! axes, ticks and legends. No plotting runtime, no external assets; the
//! output is deterministic for identical inputs.

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 200.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub struct Axes {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Axes {
    pub fn around(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Self {
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        for x in xs {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
        }
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for y in ys {
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        if !x_min.is_finite() {
            x_min = 0.0;
            x_max = 1.0;
        }
        if !y_min.is_finite() {
            y_min = 0.0;
            y_max = 1.0;
        }
        if (x_max - x_min).abs() < 1e-12 {
            x_min -= 0.5;
            x_max += 0.5;
        }
        if (y_max - y_min).abs() < 1e-12 {
            y_min -= 0.5;
            y_max += 0.5;
        }
        let x_pad = 0.05 * (x_max - x_min);
        let y_pad = 0.05 * (y_max - y_min);
        Self {
            x_min: x_min - x_pad,
            x_max: x_max + x_pad,
            y_min: y_min - y_pad,
            y_max: y_max + y_pad,
        }
    }

    fn x(&self, value: f64) -> f64 {
        MARGIN_LEFT + (value - self.x_min) / (self.x_max - self.x_min) * self.plot_width()
    }

    fn y(&self, value: f64) -> f64 {
        MARGIN_TOP + (self.y_max - value) / (self.y_max - self.y_min) * self.plot_height()
    }

    fn plot_width(&self) -> f64 {
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    }

    fn plot_height(&self) -> f64 {
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    }
}

fn tick_label(value: f64) -> String {
    let magnitude = value.abs();
    if magnitude >= 10_000.0 {
        format!("{:.0}", value)
    } else if magnitude >= 1.0 {
        format!("{:.1}", value)
    } else {
        format!("{:.3}", value)
    }
}

fn open_svg(out: &mut String, title: &str, x_label: &str, y_label: &str, axes: &Axes) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"17\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + axes.plot_width() / 2.0,
        escape(title)
    ));
    // Axis frame.
    out.push_str(&format!(
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        axes.plot_width(),
        axes.plot_height()
    ));
    // Ticks.
    for step in 0..=4 {
        let fraction = step as f64 / 4.0;
        let x_value = axes.x_min + fraction * (axes.x_max - axes.x_min);
        let y_value = axes.y_min + fraction * (axes.y_max - axes.y_min);
        let x_pos = axes.x(x_value);
        let y_pos = axes.y(y_value);
        out.push_str(&format!(
            "<line x1=\"{x_pos:.1}\" y1=\"{}\" x2=\"{x_pos:.1}\" y2=\"{}\" stroke=\"#333\"/>\n",
            MARGIN_TOP + axes.plot_height(),
            MARGIN_TOP + axes.plot_height() + 6.0
        ));
        out.push_str(&format!(
            "<text x=\"{x_pos:.1}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_TOP + axes.plot_height() + 20.0,
            tick_label(x_value)
        ));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y_pos:.1}\" x2=\"{MARGIN_LEFT}\" y2=\"{y_pos:.1}\" stroke=\"#333\"/>\n",
            MARGIN_LEFT - 6.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 10.0,
            y_pos + 4.0,
            tick_label(y_value)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + axes.plot_width() / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"22\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 22 {})\">{}</text>\n",
        MARGIN_TOP + axes.plot_height() / 2.0,
        MARGIN_TOP + axes.plot_height() / 2.0,
        escape(y_label)
    ));
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    let x = WIDTH - MARGIN_RIGHT + 16.0;
    for (row, (label, color)) in entries.iter().enumerate() {
        let y = MARGIN_TOP + 14.0 + row as f64 * 18.0;
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
            y - 10.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{y:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            x + 18.0,
            escape(label)
        ));
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub struct ScatterChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    /// Budget frontier endpoints, drawn as the diagonal line.
    pub budget_line: ((f64, f64), (f64, f64)),
    pub optimum: (f64, f64),
}

impl ScatterChart {
    pub fn render(&self) -> String {
        let ((bx1, by1), (bx2, by2)) = self.budget_line;
        let axes = Axes::around(
            self.points
                .iter()
                .map(|p| p.0)
                .chain([bx1, bx2, self.optimum.0]),
            self.points
                .iter()
                .map(|p| p.1)
                .chain([by1, by2, self.optimum.1]),
        );
        let mut out = String::new();
        open_svg(&mut out, &self.title, &self.x_label, &self.y_label, &axes);
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#555\" stroke-width=\"1.5\"/>\n",
            axes.x(bx1),
            axes.y(by1),
            axes.x(bx2),
            axes.y(by2)
        ));
        // Dashed cross hairs through the optimum.
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{}\" x2=\"{:.1}\" y2=\"{}\" stroke=\"#999\" stroke-dasharray=\"5,4\"/>\n",
            axes.x(self.optimum.0),
            MARGIN_TOP,
            axes.x(self.optimum.0),
            MARGIN_TOP + axes.plot_height()
        ));
        out.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{:.1}\" x2=\"{}\" y2=\"{:.1}\" stroke=\"#999\" stroke-dasharray=\"5,4\"/>\n",
            axes.y(self.optimum.1),
            MARGIN_LEFT + axes.plot_width(),
            axes.y(self.optimum.1)
        ));
        for (x, y) in &self.points {
            out.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"{}\" fill-opacity=\"0.75\"/>\n",
                axes.x(*x),
                axes.y(*y),
                PALETTE[0]
            ));
        }
        out.push_str(&format!(
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"5\" fill=\"{}\"/>\n",
            axes.x(self.optimum.0),
            axes.y(self.optimum.1),
            PALETTE[3]
        ));
        legend(
            &mut out,
            &[
                ("trials".to_string(), PALETTE[0]),
                ("optimum".to_string(), PALETTE[3]),
                ("budget line".to_string(), "#555"),
            ],
        );
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone)]
pub struct BoxStats {
    pub label: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lo_whisker: f64,
    pub hi_whisker: f64,
    pub outliers: Vec<f64>,
}

pub struct BoxChart {
    pub title: String,
    pub y_label: String,
    pub boxes: Vec<BoxStats>,
}

impl BoxChart {
    pub fn render(&self) -> String {
        let axes = Axes::around(
            [0.0, self.boxes.len() as f64].into_iter(),
            self.boxes.iter().flat_map(|b| {
                [b.min, b.max]
                    .into_iter()
                    .chain(b.outliers.iter().copied())
            }),
        );
        let mut out = String::new();
        open_svg(&mut out, &self.title, "", &self.y_label, &axes);
        let slot = axes.plot_width() / self.boxes.len() as f64;
        for (index, stats) in self.boxes.iter().enumerate() {
            let center = MARGIN_LEFT + slot * (index as f64 + 0.5);
            let half = (slot * 0.3).min(40.0);
            let color = PALETTE[index % PALETTE.len()];
            // Whiskers.
            out.push_str(&format!(
                "<line x1=\"{center:.1}\" y1=\"{:.1}\" x2=\"{center:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>\n",
                axes.y(stats.lo_whisker),
                axes.y(stats.q1)
            ));
            out.push_str(&format!(
                "<line x1=\"{center:.1}\" y1=\"{:.1}\" x2=\"{center:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>\n",
                axes.y(stats.q3),
                axes.y(stats.hi_whisker)
            ));
            for bound in [stats.lo_whisker, stats.hi_whisker] {
                out.push_str(&format!(
                    "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>\n",
                    center - half * 0.6,
                    axes.y(bound),
                    center + half * 0.6,
                    axes.y(bound)
                ));
            }
            // Box and median line.
            out.push_str(&format!(
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{color}\" fill-opacity=\"0.4\" stroke=\"#333\"/>\n",
                center - half,
                axes.y(stats.q3),
                2.0 * half,
                (axes.y(stats.q1) - axes.y(stats.q3)).max(0.5)
            ));
            out.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#111\" stroke-width=\"2\"/>\n",
                center - half,
                axes.y(stats.median),
                center + half,
                axes.y(stats.median)
            ));
            for outlier in &stats.outliers {
                out.push_str(&format!(
                    "<circle cx=\"{center:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"none\" stroke=\"#333\"/>\n",
                    axes.y(*outlier)
                ));
            }
            out.push_str(&format!(
                "<text x=\"{center:.1}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                MARGIN_TOP + axes.plot_height() + 34.0,
                escape(&stats.label)
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone)]
pub struct LineSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<LineSeries>,
}

impl LineChart {
    pub fn render(&self) -> String {
        let axes = Axes::around(
            self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)),
            self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)),
        );
        let mut out = String::new();
        open_svg(&mut out, &self.title, &self.x_label, &self.y_label, &axes);
        let mut entries = Vec::new();
        for (index, series) in self.series.iter().enumerate() {
            let color = PALETTE[index % PALETTE.len()];
            let path: Vec<String> = series
                .points
                .iter()
                .map(|(x, y)| format!("{:.1},{:.1}", axes.x(*x), axes.y(*y)))
                .collect();
            let dash = if series.dashed {
                " stroke-dasharray=\"6,4\""
            } else {
                ""
            };
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>\n",
                path.join(" ")
            ));
            for (x, y) in &series.points {
                out.push_str(&format!(
                    "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"{color}\"/>\n",
                    axes.x(*x),
                    axes.y(*y)
                ));
            }
            entries.push((series.label.clone(), color));
        }
        legend(&mut out, &entries);
        out.push_str("</svg>\n");
        out
    }
}
