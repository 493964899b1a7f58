//! Standalone SVG scatter plots.
//!
//! Log axes get decade ticks; linear axes get 1-2-5 ticks. Frame and ticks are
//! drawn as paths so the only `<line>` in a document is a line overlay, and
//! the only `<circle>`s are data points.

use std::fmt::Write as _;

use clap::ValueEnum;
use stemrisk::scores::ers_contour;
use stemrisk::stats::ols;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Axis {
    /// Column lscd, log scale
    Log10Lscd,
    /// Column lifetime_risk, log scale
    Log10Risk,
    /// Column predicted_risk, log scale
    PredictedRisk,
    /// Column observed_risk, log scale
    ObservedRisk,
    /// Column ear, linear scale
    Ear,
    /// Column err, linear scale
    Err,
    /// Column s, log scale
    S,
    /// Column sd_product, log scale
    SdProduct,
}

impl Axis {
    /// CSV column holding the raw values.
    pub fn column(self) -> &'static str {
        match self {
            Axis::Log10Lscd => "lscd",
            Axis::Log10Risk => "lifetime_risk",
            Axis::PredictedRisk => "predicted_risk",
            Axis::ObservedRisk => "observed_risk",
            Axis::Ear => "ear",
            Axis::Err => "err",
            Axis::S => "s",
            Axis::SdProduct => "sd_product",
        }
    }

    pub fn is_log(self) -> bool {
        !matches!(self, Axis::Ear | Axis::Err)
    }

    fn title(self) -> &'static str {
        match self {
            Axis::Log10Lscd => "lifetime stem-cell divisions",
            Axis::Log10Risk => "lifetime cancer risk",
            Axis::PredictedRisk => "predicted lifetime risk",
            Axis::ObservedRisk => "observed lifetime risk",
            Axis::Ear => "excess absolute rate (EAR)",
            Axis::Err => "excess relative risk (ERR)",
            Axis::S => "stem cells (s)",
            Axis::SdProduct => "s*d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Overlay {
    /// Least-squares line on the plotted scales
    RegressionLine,
    /// y = x, with both axes sharing one range
    IdentityLine,
    /// Level curves of the extra-risk score, one per --levels value
    ErsContours,
}

pub const DEFAULT_LEVELS: [f64; 5] = [-10.0, -20.0, -30.0, -40.0, -50.0];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub overlay: Option<Overlay>,
    /// ERS levels for the contour overlay.
    pub levels: Vec<f64>,
    pub width: u32,
    pub height: u32,
    pub point_labels: bool,
}

const MIN_SIZE: u32 = 120;

impl PlotSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.x_axis == self.y_axis {
            return Err(CliError::invalid("x and y axes must differ"));
        }
        if self.width < MIN_SIZE || self.height < MIN_SIZE {
            return Err(CliError::invalid(format!(
                "plot must be at least {MIN_SIZE}x{MIN_SIZE} pixels"
            )));
        }
        match self.overlay {
            Some(Overlay::ErsContours) => {
                if (self.x_axis, self.y_axis) != (Axis::Log10Lscd, Axis::Log10Risk) {
                    return Err(CliError::invalid(
                        "ers_contours needs --x log10_lscd --y log10_risk",
                    ));
                }
                if self.levels.is_empty() {
                    return Err(CliError::invalid("no contour levels given"));
                }
                if let Some(l) = self.levels.iter().find(|l| !(l.is_finite() && **l < 0.0)) {
                    return Err(CliError::invalid(format!(
                        "contour level {l} is not negative; extra-risk scores are below zero"
                    )));
                }
            }
            Some(Overlay::IdentityLine) if self.x_axis.is_log() != self.y_axis.is_log() => {
                return Err(CliError::invalid(
                    "identity_line needs both axes on the same scale",
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Points read from a CSV file, on the raw (untransformed) scale.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotData {
    pub names: Vec<String>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Rows dropped because a log axis value was not positive, or a cell was
    /// empty.
    pub skipped: Vec<String>,
}

pub fn load_plot_data(csv_text: &str, spec: &PlotSpec) -> CliResult<PlotData> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(csv_text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::invalid(format!("bad header: {e}")))?
        .clone();
    let find = |col: &str| headers.iter().position(|h| h == col);
    let column = |axis: Axis| {
        find(axis.column()).ok_or_else(|| {
            CliError::invalid(format!(
                "unknown column '{}' for axis {}; header has: {}",
                axis.column(),
                axis.to_possible_value()
                    .map(|v| v.get_name().to_string())
                    .unwrap_or_default(),
                headers.iter().collect::<Vec<_>>().join(",")
            ))
        })
    };
    let (xi, yi) = (column(spec.x_axis)?, column(spec.y_axis)?);
    let ni = find("name");
    if spec.point_labels && ni.is_none() {
        return Err(CliError::invalid("--labels needs a 'name' column"));
    }

    let mut data = PlotData::default();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::invalid(format!("malformed row: {e}")))?;
        let line = rec.position().map_or(row as u64 + 2, |p| p.line());
        let name = ni
            .and_then(|i| rec.get(i))
            .map(str::to_string)
            .unwrap_or_else(|| format!("row {line}"));
        let cell = |i: usize, axis: Axis| -> CliResult<Option<f64>> {
            match rec.get(i).unwrap_or("") {
                "" => Ok(None),
                c => match c.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok((!axis.is_log() || v > 0.0).then_some(v)),
                    _ => Err(CliError::invalid(format!(
                        "line {line}: column '{}': cannot parse '{c}' as a finite number",
                        axis.column()
                    ))),
                },
            }
        };
        match (cell(xi, spec.x_axis)?, cell(yi, spec.y_axis)?) {
            (Some(x), Some(y)) => {
                data.names.push(name);
                data.x.push(x);
                data.y.push(y);
            }
            _ => data.skipped.push(name),
        }
    }
    if data.x.is_empty() {
        return Err(CliError::invalid("no plottable rows"));
    }
    Ok(data)
}

#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    fn fit(values: &[f64], log: bool) -> Self {
        let (mut lo, mut hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        if log {
            lo = lo.floor();
            hi = hi.ceil();
            if hi <= lo {
                lo -= 1.0;
                hi += 1.0;
            }
        } else {
            let span = hi - lo;
            if span <= 0.0 {
                lo -= 1.0;
                hi += 1.0;
            } else {
                lo -= 0.05 * span;
                hi += 0.05 * span;
            }
        }
        Scale { lo, hi, log }
    }

    fn union(self, other: Scale) -> Scale {
        Scale {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
            log: self.log,
        }
    }

    /// (position, label) pairs in transformed coordinates.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let first = self.lo.ceil() as i64;
            let last = self.hi.floor() as i64;
            let stride = ((last - first + 1) as f64 / 12.0).ceil().max(1.0) as i64;
            (first..=last)
                .filter(|k| (k - first) % stride == 0)
                .map(|k| (k as f64, format!("1e{k}")))
                .collect()
        } else {
            let raw = (self.hi - self.lo) / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| *s >= raw)
                .unwrap_or(10.0 * mag);
            let decimals = (-step.log10().floor()).max(0.0) as usize;
            let mut out = Vec::new();
            let mut k = (self.lo / step).ceil();
            while k * step <= self.hi + 1e-9 * step {
                let v = k * step;
                out.push((
                    v,
                    format!("{:.*}", decimals, if v == 0.0 { 0.0 } else { v }),
                ));
                k += 1.0;
            }
            out
        }
    }
}

fn transform(v: f64, log: bool) -> f64 {
    if log {
        v.log10()
    } else {
        v
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;

struct Frame {
    xs: Scale,
    ys: Scale,
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.xs.lo) / (self.xs.hi - self.xs.lo) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (self.ys.hi - y) / (self.ys.hi - self.ys.lo) * self.h
    }
}

pub fn render_svg(data: &PlotData, spec: &PlotSpec) -> CliResult<String> {
    spec.validate()?;
    let tx: Vec<f64> = data
        .x
        .iter()
        .map(|&v| transform(v, spec.x_axis.is_log()))
        .collect();
    let ty: Vec<f64> = data
        .y
        .iter()
        .map(|&v| transform(v, spec.y_axis.is_log()))
        .collect();
    let mut xs = Scale::fit(&tx, spec.x_axis.is_log());
    let mut ys = Scale::fit(&ty, spec.y_axis.is_log());
    if spec.overlay == Some(Overlay::IdentityLine) {
        xs = xs.union(ys);
        ys = xs;
    }
    let (width, height) = (spec.width as f64, spec.height as f64);
    let f = Frame {
        xs,
        ys,
        left: MARGIN_LEFT,
        top: MARGIN_TOP,
        w: width - MARGIN_LEFT - MARGIN_RIGHT,
        h: height - MARGIN_TOP - MARGIN_BOTTOM,
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}" font-family="sans-serif" font-size="11">"#,
        spec.width, spec.height
    );
    let _ = writeln!(
        svg,
        r#"<defs><clipPath id="plot-area"><rect x="{}" y="{}" width="{}" height="{}"/></clipPath></defs>"#,
        num(f.left),
        num(f.top),
        num(f.w),
        num(f.h)
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{l},{t}H{r}V{b}H{l}Z" fill="none" stroke="black"/>"#,
        l = num(f.left),
        t = num(f.top),
        r = num(f.left + f.w),
        b = num(f.top + f.h)
    );

    let bottom = f.top + f.h;
    for (v, label) in f.xs.ticks() {
        let x = f.px(v);
        let _ = writeln!(
            svg,
            r#"<path d="M{x},{b}v5" stroke="black"/><text x="{x}" y="{ty}" text-anchor="middle">{label}</text>"#,
            x = num(x),
            b = num(bottom),
            ty = num(bottom + 18.0)
        );
    }
    for (v, label) in f.ys.ticks() {
        let y = f.py(v);
        let _ = writeln!(
            svg,
            r#"<path d="M{l},{y}h-5" stroke="black"/><text x="{tx}" y="{ty}" text-anchor="end">{label}</text>"#,
            l = num(f.left),
            y = num(y),
            tx = num(f.left - 8.0),
            ty = num(y + 4.0)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num(f.left + f.w / 2.0),
        num(height - 12.0),
        escape(spec.x_axis.title())
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"#,
        num(f.top + f.h / 2.0),
        escape(spec.y_axis.title())
    );

    match spec.overlay {
        Some(Overlay::RegressionLine) => {
            let fit =
                ols(&tx, &ty).map_err(|e| CliError::invalid(format!("regression overlay: {e}")))?;
            line(
                &mut svg,
                &f,
                (f.xs.lo, fit.predict(f.xs.lo)),
                (f.xs.hi, fit.predict(f.xs.hi)),
                "#1f4e9a",
            );
        }
        Some(Overlay::IdentityLine) => {
            line(
                &mut svg,
                &f,
                (f.xs.lo, f.xs.lo),
                (f.xs.hi, f.xs.hi),
                "#c0392b",
            );
        }
        Some(Overlay::ErsContours) => {
            for &level in &spec.levels {
                contour(&mut svg, &f, level);
            }
        }
        None => {}
    }

    for (i, (&x, &y)) in tx.iter().zip(&ty).enumerate() {
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="3.5" fill="#333333"><title>{}</title></circle>"##,
            num(f.px(x)),
            num(f.py(y)),
            escape(&data.names[i])
        );
        if spec.point_labels {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-size="9">{}</text>"#,
                num(f.px(x) + 5.0),
                num(f.py(y) - 5.0),
                escape(&data.names[i])
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn line(svg: &mut String, f: &Frame, a: (f64, f64), b: (f64, f64), color: &str) {
    let _ = writeln!(
        svg,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="1.5" clip-path="url(#plot-area)"/>"##,
        num(f.px(a.0)),
        num(f.py(a.1)),
        num(f.px(b.0)),
        num(f.py(b.1))
    );
}

/// One polyline per level, restricted to the x range where the curve lies
/// inside the plotted y range.
fn contour(svg: &mut String, f: &Frame, level: f64) {
    let mut x0 = f.xs.lo;
    let mut x1 = f.xs.hi;
    if f.ys.lo < 0.0 {
        x0 = x0.max(level / f.ys.lo);
    }
    if f.ys.hi < 0.0 {
        x1 = x1.min(level / f.ys.hi);
    }
    let points: Vec<String> = if x1 > x0 {
        ers_contour(level, x0, x1)
            .into_iter()
            .map(|(x, y)| format!("{},{}", num(f.px(x)), num(f.py(y))))
            .collect()
    } else {
        Vec::new()
    };
    let _ = writeln!(
        svg,
        r##"<polyline data-level="{level}" points="{}" fill="none" stroke="#7f8c8d" stroke-dasharray="4 3" clip-path="url(#plot-area)"/>"##,
        points.join(" ")
    );
}
