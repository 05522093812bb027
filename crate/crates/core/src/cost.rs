//! Cost of running price analytics over a horizon of `t` hours: a metered
//! per-request data provider versus the module reading blocks itself.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

const SECONDS_PER_HOUR: f64 = 3600.0;
const Z95: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamCostParams {
    /// USD per compute unit.
    pub p_cu: f64,
    /// Compute units per request.
    pub c_req: f64,
    /// Requests per analyzed transaction.
    pub r: f64,
    /// Mean and SD of analyzed transactions per block.
    pub mu: f64,
    pub sigma: f64,
    /// Blocks per second.
    pub lambda: f64,
}

impl Default for StreamCostParams {
    fn default() -> Self {
        Self {
            p_cu: 2.0 / 60_000.0,
            c_req: 64.0,
            r: 1.0,
            mu: 10.0,
            sigma: 5.0,
            lambda: 2.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventCostParams {
    /// USD per request unit.
    pub p_ru: f64,
    pub lambda: f64,
    /// Block age past which one `getBlock` costs 2 RU instead of 1.
    pub retention_boundary_hours: f64,
}

impl Default for EventCostParams {
    fn default() -> Self {
        Self {
            p_ru: 2.5e-6,
            lambda: 2.5,
            retention_boundary_hours: 36.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostPoint {
    pub t_hours: f64,
    pub mean: f64,
    pub sd: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

/// Per-block compound cost: mean `p·c·r·μ·λ·3600·t`, SD
/// `p·c·r·σ·√(λ·3600·t)`, normal 95% interval.
pub fn stream_cost(p: &StreamCostParams, t_hours: f64) -> CostPoint {
    let blocks = p.lambda * SECONDS_PER_HOUR * t_hours;
    let unit = p.p_cu * p.c_req * p.r;
    let mean = unit * p.mu * blocks;
    let sd = unit * p.sigma * blocks.sqrt();
    CostPoint {
        t_hours,
        mean,
        sd,
        ci95_low: mean - Z95 * sd,
        ci95_high: mean + Z95 * sd,
    }
}

/// One `getBlock` per block, 1 RU inside the retention boundary and 2 RU
/// beyond it.
pub fn module_event_cost(p: &EventCostParams, t_hours: f64) -> f64 {
    let per_hour = p.p_ru * p.lambda * SECONDS_PER_HOUR;
    let b = p.retention_boundary_hours;
    if t_hours <= b {
        per_hour * t_hours
    } else {
        per_hour * b + 2.0 * per_hour * (t_hours - b)
    }
}

/// One metered request per block.
pub fn metered_event_cost(p_cu: f64, c_req: f64, lambda: f64, t_hours: f64) -> f64 {
    p_cu * c_req * lambda * SECONDS_PER_HOUR * t_hours
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Green,
    Yellow,
    Red,
}

impl Band {
    /// Under $300 green, up to $1000 yellow, red above.
    pub fn of(usd: f64) -> Self {
        if usd < 300.0 {
            Band::Green
        } else if usd <= 1000.0 {
            Band::Yellow
        } else {
            Band::Red
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Band::Green => "green",
            Band::Yellow => "yellow",
            Band::Red => "red",
        }
    }

    fn color(self) -> &'static str {
        match self {
            Band::Green => "#2e9e4f",
            Band::Yellow => "#d8a300",
            Band::Red => "#c83232",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Continuous per-block analysis.
    Stream,
    /// One-off analysis of a past event window.
    Event,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub stream: StreamCostParams,
    pub event: EventCostParams,
    /// Module cost per hour when streaming blocks; zero on a provider with
    /// free block streaming.
    pub stream_module_usd_per_hour: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            stream: StreamCostParams::default(),
            event: EventCostParams::default(),
            stream_module_usd_per_hour: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostRow {
    pub t_hours: f64,
    pub module_cost: f64,
    pub metered_mean: f64,
    pub metered_ci_low: f64,
    pub metered_ci_high: f64,
    pub band: Band,
}

pub fn emit_cost_curves(scenario: Scenario, hours: &[f64], model: &CostModel) -> Vec<CostRow> {
    hours
        .iter()
        .map(|&t| {
            let (module_cost, point) = match scenario {
                Scenario::Stream => (model.stream_module_usd_per_hour * t, stream_cost(&model.stream, t)),
                Scenario::Event => {
                    let s = &model.stream;
                    let m = metered_event_cost(s.p_cu, s.c_req, model.event.lambda, t);
                    (
                        module_event_cost(&model.event, t),
                        CostPoint {
                            t_hours: t,
                            mean: m,
                            sd: 0.0,
                            ci95_low: m,
                            ci95_high: m,
                        },
                    )
                }
            };
            CostRow {
                t_hours: t,
                module_cost,
                metered_mean: point.mean,
                metered_ci_low: point.ci95_low,
                metered_ci_high: point.ci95_high,
                band: Band::of(point.mean),
            }
        })
        .collect()
}

pub fn write_cost_csv(writer: impl Write, rows: &[CostRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t_hours", "module_cost", "metered_mean", "metered_ci_low", "metered_ci_high", "band"])?;
    for r in rows {
        w.write_record([
            r.t_hours.to_string(),
            format!("{:.6}", r.module_cost),
            format!("{:.6}", r.metered_mean),
            format!("{:.6}", r.metered_ci_low),
            format!("{:.6}", r.metered_ci_high),
            r.band.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Line chart of both curves; metered points are colored by band.
pub fn cost_svg(rows: &[CostRow], title: &str) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const PAD: f64 = 56.0;
    let t_max = rows.iter().map(|r| r.t_hours).fold(0.0, f64::max).max(1e-9);
    let y_max = rows
        .iter()
        .map(|r| r.metered_ci_high.max(r.module_cost))
        .fold(0.0, f64::max)
        .max(1e-9);
    let x = |t: f64| PAD + (t / t_max) * (W - 2.0 * PAD);
    let y = |v: f64| H - PAD - (v / y_max) * (H - 2.0 * PAD);
    let line = |f: &dyn Fn(&CostRow) -> f64| {
        rows.iter()
            .map(|r| format!("{:.1},{:.1}", x(r.t_hours), y(f(r))))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">hours</text>"#, W / 2.0, H - 16.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">USD</text>"#, H / 2.0, H / 2.0);
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.0}</text>"#, PAD - 6.0, y(v) + 4.0, v);
        let t = t_max * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.0}</text>"#, x(t), H - PAD + 16.0, t);
    }
    let _ = writeln!(
        s,
        r##"<polygon points="{} {}" fill="#9aa7c7" fill-opacity="0.25" stroke="none"/>"##,
        line(&|r| r.metered_ci_high),
        rows.iter()
            .rev()
            .map(|r| format!("{:.1},{:.1}", x(r.t_hours), y(r.metered_ci_low)))
            .collect::<Vec<_>>()
            .join(" ")
    );
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#3b4a7a" stroke-width="2"/>"##, line(&|r| r.metered_mean));
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#111" stroke-width="2" stroke-dasharray="6 4"/>"##,
        line(&|r| r.module_cost)
    );
    for r in rows {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{}"/>"#,
            x(r.t_hours),
            y(r.metered_mean),
            r.band.color()
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" fill="#3b4a7a">metered</text><text x="{}" y="{}" fill="#111">module</text>"##,
        W - PAD - 90.0,
        PAD + 4.0,
        W - PAD - 90.0,
        PAD + 20.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
