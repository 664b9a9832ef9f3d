//! Static SVG charts rendered from a trajectory log.
//!
//! Everything here is a pure function of the log rows and the plot context,
//! so re-plotting a CSV gives byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use trailer_core::kinematics::TrackingReport;
use trailer_core::model::derive_poses;
use trailer_core::{SystemState, VehicleTrailerParams};

use crate::output::TrajectoryRow;
use crate::SimError;

const W: f64 = 720.0;
const H: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (64.0, 24.0, 36.0, 48.0); // left, right, top, bottom
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
const VEHICLE_WIDTH: f64 = 1.8;

/// What the charts need besides the log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotContext {
    pub params: VehicleTrailerParams,
    /// Tractor steer limits, rad.
    pub steer_limits: (f64, f64),
    /// Draw vehicle outlines every this many rows.
    pub outline_every: usize,
}

impl Default for PlotContext {
    fn default() -> Self {
        Self { params: VehicleTrailerParams::default(), steer_limits: (-0.75, 0.75), outline_every: 40 }
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let m = raw / mag;
    let k = if m < 1.5 {
        1.0
    } else if m < 3.5 {
        2.0
    } else if m < 7.5 {
        5.0
    } else {
        10.0
    };
    k * mag
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

/// Axis range padded to a whole number of ticks.
fn span(lo: f64, hi: f64) -> (f64, f64, f64) {
    let (lo, hi) = if (hi - lo).abs() < 1e-9 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
    let step = nice_step(hi - lo);
    ((lo / step).floor() * step, (hi / step).ceil() * step, step)
}

struct Frame {
    x: (f64, f64, f64),
    y: (f64, f64, f64),
    /// Plot area in pixels: left, top, width, height.
    area: (f64, f64, f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), area: (f64, f64, f64, f64)) -> Self {
        Self { x: span(x.0, x.1), y: span(y.0, y.1), area }
    }

    /// Same scale on both axes, centred in the area.
    fn equal(x: (f64, f64), y: (f64, f64), area: (f64, f64, f64, f64)) -> Self {
        let (cx, cy) = (0.5 * (x.0 + x.1), 0.5 * (y.0 + y.1));
        let scale = ((x.1 - x.0) / area.2).max((y.1 - y.0) / area.3).max(1e-9);
        let (hw, hh) = (0.5 * scale * area.2, 0.5 * scale * area.3);
        let mut f = Self::new((cx - hw, cx + hw), (cy - hh, cy + hh), area);
        let scale = ((f.x.1 - f.x.0) / area.2).max((f.y.1 - f.y.0) / area.3);
        let (hw, hh) = (0.5 * scale * area.2, 0.5 * scale * area.3);
        f.x = (cx - hw, cx + hw, f.x.2);
        f.y = (cy - hh, cy + hh, f.y.2);
        f
    }

    fn px(&self, x: f64) -> f64 {
        self.area.0 + (x - self.x.0) / (self.x.1 - self.x.0) * self.area.2
    }

    fn py(&self, y: f64) -> f64 {
        self.area.1 + self.area.3 - (y - self.y.0) / (self.y.1 - self.y.0) * self.area.3
    }

    fn axes(&self, svg: &mut String, xlabel: &str, ylabel: &str) {
        let (l, t, w, h) = self.area;
        let _ = writeln!(
            svg,
            r##"<rect x="{l:.2}" y="{t:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#444"/>"##
        );
        let (x0, x1, xs) = self.x;
        let mut k = (x0 / xs).ceil() as i64;
        while (k as f64) * xs <= x1 + 1e-9 * xs {
            let v = k as f64 * xs;
            let p = self.px(v);
            let _ = writeln!(
                svg,
                r##"<line x1="{p:.2}" y1="{t:.2}" x2="{p:.2}" y2="{:.2}" stroke="#ddd"/><text x="{p:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                t + h,
                t + h + 16.0,
                fmt_tick(v, xs)
            );
            k += 1;
        }
        let (y0, y1, ys) = self.y;
        let mut k = (y0 / ys).ceil() as i64;
        while (k as f64) * ys <= y1 + 1e-9 * ys {
            let v = k as f64 * ys;
            let p = self.py(v);
            let _ = writeln!(
                svg,
                r##"<line x1="{l:.2}" y1="{p:.2}" x2="{:.2}" y2="{p:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                l + w,
                l - 6.0,
                p + 4.0,
                fmt_tick(v, ys)
            );
            k += 1;
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#,
            l + 0.5 * w,
            t + h + 36.0
        );
        let _ = writeln!(
            svg,
            r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle">{ylabel}</text>"#,
            l - 46.0,
            t + 0.5 * h
        );
    }

    fn polyline(&self, svg: &mut String, pts: &[(f64, f64)], color: &str, extra: &str) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { "" } else { " " }, self.px(*x), self.py(*y));
        }
        let _ = writeln!(svg, r#"<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>"#);
    }

    fn hline(&self, svg: &mut String, y: f64, color: &str) {
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#,
            self.area.0,
            self.py(y),
            self.area.0 + self.area.2,
            self.py(y)
        );
    }
}

fn document(height: f64, title: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{height}\" viewBox=\"0 0 {W} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n{body}</svg>\n",
        0.5 * W
    )
}

fn plot_area(top: f64, height: f64) -> (f64, f64, f64, f64) {
    (MARGIN.0, top + MARGIN.2, W - MARGIN.0 - MARGIN.1, height - MARGIN.2 - MARGIN.3)
}

fn stage_color(stage: usize) -> &'static str {
    PALETTE[(stage + PALETTE.len() - 1) % PALETTE.len()]
}

/// Runs of consecutive rows that share a stage index.
fn stage_runs(rows: &[TrajectoryRow]) -> Vec<&[TrajectoryRow]> {
    rows.chunk_by(|a, b| a.stage == b.stage).collect()
}

fn limits(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn or_unit((lo, hi): (f64, f64)) -> (f64, f64) {
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn rectangle(svg: &mut String, f: &Frame, back: (f64, f64), front: (f64, f64), color: &str) {
    let (dx, dy) = (front.0 - back.0, front.1 - back.1);
    let len = dx.hypot(dy).max(1e-12);
    let (nx, ny) = (-dy / len * 0.5 * VEHICLE_WIDTH, dx / len * 0.5 * VEHICLE_WIDTH);
    let corners = [
        (back.0 + nx, back.1 + ny),
        (front.0 + nx, front.1 + ny),
        (front.0 - nx, front.1 - ny),
        (back.0 - nx, back.1 - ny),
    ];
    let mut d = String::new();
    for (i, (x, y)) in corners.iter().enumerate() {
        let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { "" } else { " " }, f.px(*x), f.py(*y));
    }
    let _ = writeln!(svg, r#"<polygon points="{d}" fill="none" stroke="{color}" stroke-width="1"/>"#);
}

/// Overhead view: rear-axle and trailer-axle paths with outlines.
pub fn trajectory_svg(rows: &[TrajectoryRow], ctx: &PlotContext) -> String {
    let p = &ctx.params;
    let overhang = 0.5;
    let mut xs = limits(rows.iter().flat_map(|r| [r.x_r, r.x_t]).chain([0.0]));
    let mut ys = limits(rows.iter().flat_map(|r| [r.y_r, r.y_t]).chain([0.0]));
    let pad = p.wheelbase + VEHICLE_WIDTH;
    xs = (xs.0 - pad, xs.1 + pad);
    ys = (ys.0 - pad, ys.1 + pad);
    let f = Frame::equal(xs, ys, plot_area(0.0, H + 120.0));
    let mut svg = String::new();
    f.axes(&mut svg, "X [m]", "Y [m]");

    // goal pose of the trailer axle
    let (gx, gy) = (f.px(0.0), f.py(0.0));
    let _ = writeln!(svg, r##"<circle cx="{gx:.2}" cy="{gy:.2}" r="4" fill="none" stroke="#000"/>"##);
    for run in stage_runs(rows) {
        let color = stage_color(run[0].stage);
        f.polyline(&mut svg, &run.iter().map(|r| (r.x_r, r.y_r)).collect::<Vec<_>>(), color, "");
        f.polyline(
            &mut svg,
            &run.iter().map(|r| (r.x_t, r.y_t)).collect::<Vec<_>>(),
            color,
            r#" stroke-dasharray="4 3""#,
        );
    }
    let every = ctx.outline_every.max(1);
    for (i, r) in rows.iter().enumerate() {
        if i % every != 0 && i + 1 != rows.len() {
            continue;
        }
        let s = SystemState::new(r.x_r, r.y_r, r.psi_1, r.psi_2);
        let poses = derive_poses(&s, p);
        let color = stage_color(r.stage);
        let (c1, s1) = (r.psi_1.cos(), r.psi_1.sin());
        let (c2, s2) = (r.psi_2.cos(), r.psi_2.sin());
        let tractor_back = (poses.rear.0 - overhang * c1, poses.rear.1 - overhang * s1);
        let tractor_front = (poses.front.0 + overhang * c1, poses.front.1 + overhang * s1);
        rectangle(&mut svg, &f, tractor_back, tractor_front, color);
        let trailer_back = (poses.trailer.0 - overhang * c2, poses.trailer.1 - overhang * s2);
        rectangle(&mut svg, &f, trailer_back, poses.hitch, color);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}"/>"#,
            f.px(poses.rear.0),
            f.py(poses.rear.1),
            f.px(poses.hitch.0),
            f.py(poses.hitch.1)
        );
    }
    document(H + 120.0, "Trajectory (solid: rear axle, dashed: trailer axle)", &svg)
}

/// Front-wheel steer and rear-axle speed with the steer limits.
pub fn inputs_svg(rows: &[TrajectoryRow], ctx: &PlotContext) -> String {
    let t = or_unit(limits(rows.iter().map(|r| r.t)));
    let (lo, hi) = (ctx.steer_limits.0.to_degrees(), ctx.steer_limits.1.to_degrees());
    let steer = limits(rows.iter().map(|r| r.delta_f.to_degrees()).chain([lo, hi]));
    let speed = or_unit(limits(rows.iter().map(|r| r.v_r).chain([0.0])));
    let mut svg = String::new();

    let top = Frame::new(t, steer, plot_area(0.0, H));
    top.axes(&mut svg, "t [s]", "delta_f [deg]");
    top.hline(&mut svg, lo, "#000");
    top.hline(&mut svg, hi, "#000");
    for run in stage_runs(rows) {
        top.polyline(
            &mut svg,
            &run.iter().map(|r| (r.t, r.delta_f.to_degrees())).collect::<Vec<_>>(),
            stage_color(run[0].stage),
            "",
        );
    }
    let bottom = Frame::new(t, speed, plot_area(H, H));
    bottom.axes(&mut svg, "t [s]", "V_R [m/s]");
    for run in stage_runs(rows) {
        bottom.polyline(&mut svg, &run.iter().map(|r| (r.t, r.v_r)).collect::<Vec<_>>(), stage_color(run[0].stage), "");
    }
    document(2.0 * H, "Tractor inputs (dashed: steer limits)", &svg)
}

pub fn hitch_svg(rows: &[TrajectoryRow]) -> String {
    let t = or_unit(limits(rows.iter().map(|r| r.t)));
    let y = limits(rows.iter().map(|r| r.hitch().to_degrees()).chain([0.0]));
    let f = Frame::new(t, y, plot_area(0.0, H));
    let mut svg = String::new();
    f.axes(&mut svg, "t [s]", "hitch angle [deg]");
    for run in stage_runs(rows) {
        f.polyline(
            &mut svg,
            &run.iter().map(|r| (r.t, r.hitch().to_degrees())).collect::<Vec<_>>(),
            stage_color(run[0].stage),
            "",
        );
    }
    document(H, "Hitch angle", &svg)
}

/// Optimal horizon cost per reverse stage on a log scale.
pub fn cost_svg(rows: &[TrajectoryRow]) -> String {
    let floor = 1e-12;
    let log = |c: f64| c.max(floor).log10();
    let reverse: Vec<&TrajectoryRow> = rows.iter().filter(|r| r.is_reverse()).collect();
    let t = or_unit(limits(reverse.iter().map(|r| r.t)));
    let y = or_unit(limits(reverse.iter().map(|r| log(r.ocp_cost))));
    let f = Frame::new(t, y, plot_area(0.0, H));
    let mut svg = String::new();
    f.axes(&mut svg, "t [s]", "log10 optimal cost");
    for run in stage_runs(rows) {
        if run[0].is_reverse() {
            f.polyline(
                &mut svg,
                &run.iter().map(|r| (r.t, log(r.ocp_cost))).collect::<Vec<_>>(),
                stage_color(run[0].stage),
                "",
            );
        }
    }
    document(H, "Optimal cost per reverse stage", &svg)
}

/// Desired and measured virtual steer of an inverse-kinematics run, with the
/// tractor steer that produced it.
pub fn tracking_svg(report: &TrackingReport) -> String {
    let t = or_unit(limits(report.samples.iter().map(|s| s.t)));
    let v = or_unit(limits(report.samples.iter().flat_map(|s| [s.desired.to_degrees(), s.measured.to_degrees()])));
    let steer = or_unit(limits(report.samples.iter().map(|s| s.steer.to_degrees())));
    let mut svg = String::new();
    let top = Frame::new(t, v, plot_area(0.0, H));
    top.axes(&mut svg, "t [s]", "delta_T [deg]");
    top.polyline(
        &mut svg,
        &report.samples.iter().map(|s| (s.t, s.desired.to_degrees())).collect::<Vec<_>>(),
        PALETTE[0],
        "",
    );
    top.polyline(
        &mut svg,
        &report.samples.iter().map(|s| (s.t, s.measured.to_degrees())).collect::<Vec<_>>(),
        PALETTE[1],
        r#" stroke-dasharray="4 3""#,
    );
    let bottom = Frame::new(t, steer, plot_area(H, H));
    bottom.axes(&mut svg, "t [s]", "delta_f [deg]");
    bottom.polyline(
        &mut svg,
        &report.samples.iter().map(|s| (s.t, s.steer.to_degrees())).collect::<Vec<_>>(),
        PALETTE[2],
        "",
    );
    document(2.0 * H, "Virtual steer tracking (solid: desired, dashed: measured)", &svg)
}

pub const PLOT_FILES: [&str; 4] = ["trajectory.svg", "inputs.svg", "hitch.svg", "cost.svg"];

pub fn write_plots(rows: &[TrajectoryRow], ctx: &PlotContext, dir: &Path) -> Result<(), SimError> {
    let docs = [trajectory_svg(rows, ctx), inputs_svg(rows, ctx), hitch_svg(rows), cost_svg(rows)];
    for (name, doc) in PLOT_FILES.iter().zip(docs) {
        let path = dir.join(name);
        std::fs::write(&path, doc).map_err(|e| SimError::io(&path, e))?;
    }
    Ok(())
}
