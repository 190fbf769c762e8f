//! JSON report types for the analysis and verification front ends.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::exponent::Angle;
use crate::qh::AxiomReport;
use crate::stokes::{IrregularClass, StokesStructure, UntwistReport};

/// `"p/q"` when the angle is exact, a float number of turns otherwise.
pub fn angle_turns_value(angle: &Angle) -> serde_json::Value {
    match angle {
        Angle::Turns(t) => serde_json::Value::String(t.to_string()),
        Angle::Radians(_) => serde_json::json!(angle.turns_f64()),
    }
}

#[derive(Serialize)]
pub struct CircleReport {
    pub representative: String,
    pub ram: u32,
    pub deg: i64,
    pub level: String,
    pub mult: u32,
    pub exact: bool,
}

#[derive(Serialize)]
pub struct DirectionReport {
    pub angle_turns: serde_json::Value,
    /// Position in `(0, 1]` turns in the enumeration order from the basepoint.
    pub enumeration_turns: serde_json::Value,
    pub dim: usize,
    pub levels: Vec<String>,
    pub roots: Vec<[usize; 2]>,
}

#[derive(Serialize)]
pub struct UntwistSummary {
    pub r: u32,
    pub base_directions: usize,
    pub lifted_directions: usize,
    pub preimage_match: bool,
    pub first_sheet_ok: bool,
    pub ok: bool,
}

#[derive(Serialize)]
pub struct AnalyzeReport {
    pub rank: usize,
    pub twist: String,
    pub circles: Vec<CircleReport>,
    pub adjoint_cover: Vec<CircleReport>,
    /// Total degree of the adjoint cover as a covering of the circle.
    pub cover_degree: u32,
    pub directions: Vec<DirectionReport>,
    pub total_stokes_dim: usize,
    pub levi: String,
    pub levi_blocks: Vec<usize>,
    pub coset_support: Vec<[usize; 2]>,
    pub descent: bool,
    pub untwist: UntwistSummary,
}

pub fn direction_reports(stokes: &StokesStructure) -> Vec<DirectionReport> {
    stokes
        .directions
        .iter()
        .map(|d| DirectionReport {
            angle_turns: angle_turns_value(&d.direction.angle),
            enumeration_turns: angle_turns_value(&d.enumeration),
            dim: d.dim,
            levels: d.levels.iter().map(|l| l.to_string()).collect(),
            roots: d.roots.iter().map(|p| [p.row, p.col]).collect(),
        })
        .collect()
}

pub fn untwist_summary(rep: &UntwistReport) -> UntwistSummary {
    UntwistSummary {
        r: rep.r,
        base_directions: rep.base.directions.len(),
        lifted_directions: rep.lifted.directions.len(),
        preimage_match: rep.preimage_match,
        first_sheet_ok: rep.first_sheet.iter().all(|m| m.matches),
        ok: rep.ok,
    }
}

pub fn analyze(class: &IrregularClass) -> AnalyzeReport {
    let stokes = class.singular_directions();
    let fg = class.formal_group();
    let untwist = class.untwist();
    let circles = class
        .entries()
        .iter()
        .map(|e| CircleReport {
            representative: e.circle.representative().to_string(),
            ram: e.circle.ram(),
            deg: e.circle.deg(),
            level: e.circle.level().to_string(),
            mult: e.mult,
            exact: e.circle.is_exact(),
        })
        .collect();
    let adjoint = class.adjoint_cover();
    let cover_degree = adjoint.iter().map(|(c, _)| c.ram()).sum();
    AnalyzeReport {
        rank: class.rank(),
        twist: class.twist().to_string(),
        circles,
        adjoint_cover: adjoint
            .iter()
            .map(|(c, m)| CircleReport {
                representative: c.representative().to_string(),
                ram: c.ram(),
                deg: c.deg(),
                level: c.level().to_string(),
                mult: *m,
                exact: c.is_exact(),
            })
            .collect(),
        cover_degree,
        total_stokes_dim: stokes.total_dim(),
        directions: direction_reports(&stokes),
        levi: fg.levi_shape(),
        levi_blocks: fg.blocks.clone(),
        coset_support: fg.coset_support().iter().map(|&(i, j)| [i, j]).collect(),
        descent: class.check_descent(),
        untwist: untwist_summary(&untwist),
    }
}

/// Stable hash of a model descriptor (name plus canonical class JSON).
pub fn descriptor_hash(name: &str, class: &IrregularClass) -> String {
    let mut hasher = Sha256::new();
    hasher.update(name.as_bytes());
    hasher.update(serde_json::to_string(class).expect("classes serialise").as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{:02x}", b)).collect()
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub descriptor: String,
    pub descriptor_hash: String,
    pub seeds: u64,
    pub reports: Vec<AxiomReport>,
    /// Present when a deliberate corruption was requested; verification is
    /// then expected to fail.
    pub negative_control: Option<String>,
    pub pass: bool,
}
