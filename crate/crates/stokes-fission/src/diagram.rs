//! Stokes diagrams: one closed curve per covering circle, radially modulated
//! by the sign of `Re q` (growth outside the base circle, decay inside),
//! apples marked on the decay side, singular directions drawn as rays.

use num_complex::Complex64;

use crate::exponent::CircleClass;
use crate::stokes::IrregularClass;

const SAMPLES_PER_SHEET: usize = 720;

/// `Re q` along the covering circle at angle `t` turns (all terms, unit radius).
fn re_q(circle: &CircleClass, t: f64) -> f64 {
    let mut total = Complex64::new(0.0, 0.0);
    for (e, c) in circle.representative().terms_desc() {
        let ef = crate::cyclo::rat_to_f64(e);
        let phase = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * ef * t);
        total += c.to_complex() * phase;
    }
    total.re
}

pub struct CircleCurve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub apples: Vec<(f64, f64)>,
}

pub struct DiagramData {
    pub base_radius: f64,
    pub circles: Vec<CircleCurve>,
    pub rays: Vec<f64>,
}

pub fn diagram_data(class: &IrregularClass) -> DiagramData {
    let mut circles = Vec::new();
    for (idx, entry) in class.entries().iter().enumerate() {
        let circle = &entry.circle;
        let base = 1.0 + 0.35 * idx as f64;
        let amp = 0.12;
        let r_sheets = circle.ram() as usize;
        let mut points = Vec::with_capacity(r_sheets * SAMPLES_PER_SHEET + 1);
        if circle.is_zero() {
            for i in 0..=SAMPLES_PER_SHEET {
                let t = i as f64 / SAMPLES_PER_SHEET as f64;
                let a = 2.0 * std::f64::consts::PI * t;
                points.push((base * a.cos(), base * a.sin()));
            }
        } else {
            let total = r_sheets * SAMPLES_PER_SHEET;
            for i in 0..=total {
                let t = circle.ram() as f64 * i as f64 / total as f64;
                let rad = base + amp * re_q(circle, t).signum();
                let a = 2.0 * std::f64::consts::PI * t;
                points.push((rad * a.cos(), rad * a.sin()));
            }
        }
        let apples = match circle.apples() {
            Ok(dirs) => dirs
                .iter()
                .map(|d| {
                    let a = 2.0 * std::f64::consts::PI * d.angle.turns_f64();
                    let rad = base - amp;
                    (rad * a.cos(), rad * a.sin())
                })
                .collect(),
            Err(_) => Vec::new(),
        };
        circles.push(CircleCurve {
            label: format!("<{}> x{}", circle.representative(), entry.mult),
            points,
            apples,
        });
    }
    let stokes = class.singular_directions();
    let rays = stokes.directions.iter().map(|d| d.direction.angle.turns_f64()).collect();
    DiagramData { base_radius: 1.0, circles, rays }
}

fn fmt2(x: f64) -> String {
    format!("{:.4}", x)
}

pub fn to_svg(data: &DiagramData) -> String {
    let max_r = 1.0 + 0.35 * data.circles.len() as f64 + 0.3;
    let view = max_r * 1.05;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        fmt2(-view),
        fmt2(-view),
        fmt2(2.0 * view),
        fmt2(2.0 * view)
    ));
    // Rays under everything else.
    for turn in &data.rays {
        let a = 2.0 * std::f64::consts::PI * turn;
        out.push_str(&format!(
            "  <line x1=\"0\" y1=\"0\" x2=\"{}\" y2=\"{}\" stroke=\"#888888\" stroke-width=\"0.01\" stroke-dasharray=\"0.05,0.03\"/>\n",
            fmt2(max_r * a.cos()),
            fmt2(-max_r * a.sin())
        ));
    }
    // Base circle.
    out.push_str(&format!(
        "  <circle cx=\"0\" cy=\"0\" r=\"{}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"0.012\"/>\n",
        fmt2(data.base_radius)
    ));
    for curve in &data.circles {
        let path: Vec<String> = curve
            .points
            .iter()
            .enumerate()
            .map(|(i, (x, y))| {
                format!("{}{},{}", if i == 0 { "M" } else { "L" }, fmt2(*x), fmt2(-*y))
            })
            .collect();
        out.push_str(&format!(
            "  <path d=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"0.015\"/>\n",
            path.join(" ")
        ));
        for (x, y) in &curve.apples {
            out.push_str(&format!(
                "  <circle cx=\"{}\" cy=\"{}\" r=\"0.04\" fill=\"#d62728\"/>\n",
                fmt2(*x),
                fmt2(-*y)
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn to_json(data: &DiagramData) -> serde_json::Value {
    serde_json::json!({
        "base_radius": data.base_radius,
        "circles": data.circles.iter().map(|c| serde_json::json!({
            "label": c.label,
            "points": c.points.iter().map(|(x, y)| serde_json::json!([x, y])).collect::<Vec<_>>(),
            "apples": c.apples.iter().map(|(x, y)| serde_json::json!([x, y])).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "rays_turns": data.rays,
    })
}
