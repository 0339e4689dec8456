//! Typed reports with CSV/JSON emission. Float formatting is fixed so that
//! identical configurations reproduce byte-identical outputs.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::fitting::Fit;

pub fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct GuardRow {
    pub hbar: f64,
    pub gap: f64,
    pub ghost_displacement: f64,
    pub required_clearance: f64,
    pub phase_step_max: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvRow {
    pub potential: String,
    pub order: u8,
    pub p: f64,
    pub hbar: f64,
    pub l: usize,
    pub omega: f64,
    pub max_error: f64,
    pub worst_function: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeEntry {
    /// "omega" or "hbar"
    pub variable: String,
    pub order: u8,
    pub p: f64,
    /// the held-fixed parameter (hbar for omega fits, L for hbar fits)
    pub fixed: f64,
    pub fit: Option<Fit>,
    pub exact_regime: bool,
    pub reference_limited: bool,
    pub max_error: f64,
    pub min_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub config: serde_json::Value,
    pub rows: Vec<ConvRow>,
    pub fits: Vec<SlopeEntry>,
    pub guards: Vec<GuardRow>,
    pub reference_accuracy: f64,
    pub exact_regime_floor: f64,
    pub pass: bool,
}

impl ConvergenceReport {
    pub fn csv(&self) -> String {
        let mut out =
            String::from("potential,order,p,hbar,l,omega,max_error,worst_function\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.potential,
                r.order,
                fmt(r.p),
                fmt(r.hbar),
                r.l,
                fmt(r.omega),
                fmt(r.max_error),
                r.worst_function
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundednessRow {
    pub p: f64,
    pub hbar: f64,
    pub t: f64,
    pub ratio: f64,
    pub worst_function: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundednessReport {
    pub config: serde_json::Value,
    pub rows: Vec<BoundednessRow>,
    /// per (p, t): ratio at each hbar <= factor * ratio at hbar = 1
    pub uniform_pass: bool,
    pub p2_unitary_defect: f64,
    pub factor: f64,
    pub pass: bool,
}

impl BoundednessReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("p,hbar,t,ratio,worst_function\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt(r.p),
                fmt(r.hbar),
                fmt(r.t),
                fmt(r.ratio),
                r.worst_function
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub order: u8,
    pub tau: f64,
    pub hbar: f64,
    pub residual_l2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub config: serde_json::Value,
    pub rows: Vec<ResidualRow>,
    pub tau_fits: Vec<SlopeEntry>,
    pub hbar_fits: Vec<SlopeEntry>,
    pub duhamel_rel_err: Option<f64>,
    pub pass: bool,
}

impl ResidualReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("tau,hbar,n,residual_l2\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt(r.tau),
                fmt(r.hbar),
                r.order,
                fmt(r.residual_l2)
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GaborOperatorReport {
    pub operator: String,
    pub decay_exponent: f64,
    pub seminorm_m: f64,
    pub seminorm_full: f64,
    pub seminorm_inner: f64,
    pub stability_ratio: f64,
    pub argmax_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompositionRow {
    pub pair: String,
    pub seminorm_composed: f64,
    pub seminorm_first: f64,
    pub seminorm_second: f64,
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GaborReport {
    pub config: serde_json::Value,
    pub operators: Vec<GaborOperatorReport>,
    pub compositions: Vec<CompositionRow>,
    #[serde(skip)]
    pub samples_csv: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SharpnessRow {
    pub family: String,
    pub p: f64,
    pub k2: f64,
    pub lambda: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SharpnessReport {
    pub config: serde_json::Value,
    pub rows: Vec<SharpnessRow>,
    pub translation_fit: Option<Fit>,
    pub translation_expected: f64,
    pub p2_constancy_defect: f64,
    pub dilation_fit: Option<Fit>,
    pub dilation_expected: f64,
    pub pass: bool,
}

impl SharpnessReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("family,p,k2,lambda,ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.family,
                fmt(r.p),
                fmt(r.k2),
                fmt(r.lambda),
                fmt(r.ratio)
            ));
        }
        out
    }
}

pub fn write_outputs(
    out_dir: &str,
    name: &str,
    csvs: &[(&str, &str)],
    summary: &impl Serialize,
) -> anyhow::Result<()> {
    let dir = Path::new(out_dir);
    fs::create_dir_all(dir)?;
    for (file, content) in csvs {
        fs::write(dir.join(format!("{name}_{file}.csv")), content)?;
    }
    let json = serde_json::to_string_pretty(summary)?;
    fs::write(dir.join(format!("{name}_summary.json")), json)?;
    Ok(())
}
