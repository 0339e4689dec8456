//! JSON experiment configuration shared by all subcommands.

use serde::{Deserialize, Serialize};

use pathslice::generating::TableOpts;
use pathslice::grid::GridSpec;
use pathslice::parametrix::GuardCfg;
use pathslice::potential::PotentialModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub label: String,
    #[serde(default)]
    pub amp: Option<f64>,
}

impl PotentialSpec {
    pub fn named(label: &str) -> Self {
        PotentialSpec {
            label: label.into(),
            amp: None,
        }
    }

    pub fn build(&self) -> anyhow::Result<PotentialModel> {
        match self.label.as_str() {
            "free" => Ok(PotentialModel::free()),
            "harmonic" => Ok(PotentialModel::harmonic()),
            "harmonic+cos" | "anharmonic" => {
                Ok(PotentialModel::harmonic_cos(self.amp.unwrap_or(0.2)))
            }
            "driven-harmonic" => Ok(PotentialModel::driven_harmonic(self.amp.unwrap_or(0.1))),
            other => anyhow::bail!("unknown potential label '{other}'"),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridCfg {
    pub n: usize,
    pub l_box: f64,
}

impl GridCfg {
    pub fn build(&self) -> anyhow::Result<GridSpec> {
        Ok(GridSpec::new(self.n, self.l_box)?)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimeCfg {
    pub s: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubdivisionCfg {
    #[serde(default = "default_kind")]
    pub kind: String,
    pub l_list: Vec<usize>,
}

fn default_kind() -> String {
    "uniform".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyCfg {
    /// Hermite functions h_0 .. h_{hermites-1}.
    pub hermites: usize,
    /// Gaussians shifted to these centers.
    pub shifts: Vec<f64>,
    /// Gaussians modulated to these frequencies.
    pub modulations: Vec<f64>,
}

impl Default for FamilyCfg {
    fn default() -> Self {
        FamilyCfg {
            hermites: 8,
            shifts: vec![-2.0, 2.0],
            modulations: vec![-2.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GuardSpec {
    pub aperture: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    6.0
}

impl GuardSpec {
    pub fn build(&self) -> GuardCfg {
        GuardCfg {
            aperture: self.aperture,
            margin: self.margin,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualCfg {
    pub tau_list: Vec<f64>,
    /// tau at which the hbar sweep runs.
    pub hbar_sweep_tau: f64,
    #[serde(default)]
    pub duhamel: Option<DuhamelCfg>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DuhamelCfg {
    pub tau: f64,
    pub hbar: f64,
    pub order: u8,
    #[serde(default = "default_duhamel_nodes")]
    pub simpson_nodes: usize,
}

fn default_duhamel_nodes() -> usize {
    9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeCfg {
    pub alpha: f64,
    pub beta: f64,
    pub radius: f64,
}

impl Default for LatticeCfg {
    fn default() -> Self {
        LatticeCfg {
            alpha: 0.5,
            beta: 0.5,
            radius: 8.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaborCfg {
    #[serde(default)]
    pub lattice: LatticeCfg,
    /// Slice length for the probed E^(0) operator.
    pub tau: f64,
    #[serde(default = "default_m")]
    pub m: f64,
    /// Also run the composition pairs.
    #[serde(default)]
    pub compositions: bool,
    #[serde(default = "default_comp_bound")]
    pub composition_bound: f64,
}

fn default_m() -> f64 {
    4.0
}

fn default_comp_bound() -> f64 {
    50.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundednessCfg {
    pub t_list: Vec<f64>,
    #[serde(default = "default_bound_factor")]
    pub factor: f64,
}

fn default_bound_factor() -> f64 {
    3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharpnessCfg {
    pub translation_lambdas: Vec<f64>,
    pub dilation_lambdas: Vec<f64>,
}

impl Default for SharpnessCfg {
    fn default() -> Self {
        SharpnessCfg {
            translation_lambdas: vec![4.0, 8.0, 16.0, 32.0],
            dilation_lambdas: vec![1.0, 2.0, 4.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub potential: PotentialSpec,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub grid: GridCfg,
    pub hbar_list: Vec<f64>,
    pub p_list: Vec<f64>,
    pub orders: Vec<u8>,
    pub time: TimeCfg,
    pub subdivision: SubdivisionCfg,
    #[serde(default)]
    pub test_family: FamilyCfg,
    pub guard: GuardSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub residual: Option<ResidualCfg>,
    #[serde(default)]
    pub gabor: Option<GaborCfg>,
    #[serde(default)]
    pub boundedness: Option<BoundednessCfg>,
    #[serde(default)]
    pub sharpness: Option<SharpnessCfg>,
}

fn default_dim() -> usize {
    1
}

fn default_seed() -> u64 {
    7
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.dim != 1 {
            anyhow::bail!("only dim = 1 is supported");
        }
        if self.hbar_list.is_empty() || self.p_list.is_empty() || self.orders.is_empty() {
            anyhow::bail!("hbar_list, p_list and orders must be nonempty");
        }
        if !(self.time.t > self.time.s) {
            anyhow::bail!("time window must have t > s");
        }
        for &o in &self.orders {
            if o > 1 {
                anyhow::bail!("only N in {{0, 1}} is implemented");
            }
        }
        self.grid.build()?;
        self.potential.build()?;
        Ok(())
    }

    pub fn table_opts(&self) -> TableOpts {
        TableOpts::default()
    }
}
