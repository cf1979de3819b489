//! Run configuration (TOML). Every section rejects unknown keys and the
//! whole file is validated before any computation starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use su2qlm::analysis::{DEFAULT_BULK_WINDOW, DEFAULT_DISCARD_FRACTION};
use su2qlm::symtensor::DEFAULT_TRUNC_TOL;
use su2qlm::tebd::{AnnealSchedule, Stage};
use su2qlm::ModelParams;

use crate::CliError;

/// Environment variable that overrides `output.directory`.
pub const OUT_DIR_ENV: &str = "SU2QLM_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub lattice: LatticeSection,
    #[serde(default)]
    pub mps: MpsSection,
    #[serde(default)]
    pub tebd: TebdSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub t: f64,
    #[serde(default = "one")]
    pub g1: f64,
    #[serde(default = "five")]
    pub eps: f64,
}

fn one() -> f64 {
    1.0
}

fn five() -> f64 {
    5.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(rename = "L")]
    pub len: usize,
    #[serde(rename = "N_M")]
    pub n_matter: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpsSection {
    pub chi_max: usize,
    pub trunc_tol: f64,
}

impl Default for MpsSection {
    fn default() -> Self {
        Self { chi_max: 64, trunc_tol: DEFAULT_TRUNC_TOL }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulePreset {
    #[default]
    Default,
    Precise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TebdSection {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Named schedule; ignored when `stages` is given.
    #[serde(default)]
    pub preset: SchedulePreset,
    #[serde(default)]
    pub stages: Vec<Stage>,
    pub check_interval: Option<usize>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

impl Default for TebdSection {
    fn default() -> Self {
        Self { seeds: default_seeds(), preset: SchedulePreset::Default, stages: Vec::new(), check_interval: None }
    }
}

impl TebdSection {
    pub fn schedule(&self) -> AnnealSchedule {
        let mut s = if self.stages.is_empty() {
            match self.preset {
                SchedulePreset::Default => AnnealSchedule::default(),
                SchedulePreset::Precise => AnnealSchedule::precise(),
            }
        } else {
            AnnealSchedule { stages: self.stages.clone(), ..AnnealSchedule::default() }
        };
        if let Some(c) = self.check_interval {
            s.check_interval = c;
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    T,
    G1,
    Eps,
    NMatter,
    Len,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default = "yes")]
    pub warm_start: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub discard_fraction: f64,
    pub bulk_window: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { discard_fraction: DEFAULT_DISCARD_FRACTION, bulk_window: DEFAULT_BULK_WINDOW }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    pub checkpoints: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), formats: vec![Format::Csv, Format::Jsonl], checkpoints: true }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A minimal single-point configuration.
    pub fn point(t: f64, len: usize, n_matter: u32) -> Self {
        RunConfig {
            model: ModelSection { t, g1: 1.0, eps: 5.0 },
            lattice: LatticeSection { len, n_matter },
            mps: MpsSection::default(),
            tebd: TebdSection::default(),
            sweep: None,
            analysis: AnalysisSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        ModelParams::with_couplings(self.model.t, self.model.g1, self.model.eps, self.lattice.len, self.lattice.n_matter)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Parameters at every sweep point, in grid order.
    pub fn sweep_points(&self) -> Result<Vec<ModelParams>, CliError> {
        let Some(sweep) = &self.sweep else {
            return Err(CliError::Config("no [sweep] section".into()));
        };
        if sweep.values.is_empty() {
            return Err(CliError::Config("sweep grid is empty".into()));
        }
        let base = self.params()?;
        sweep
            .values
            .iter()
            .map(|&v| {
                let mut p = base;
                match sweep.parameter {
                    SweepParameter::T => p.t = v,
                    SweepParameter::G1 => p.g1 = v,
                    SweepParameter::Eps => p.eps = v,
                    SweepParameter::NMatter | SweepParameter::Len => {
                        if v.fract() != 0.0 || v < 0.0 {
                            return Err(CliError::Config(format!("{:?} must be a nonnegative integer, got {v}", sweep.parameter)));
                        }
                        if sweep.parameter == SweepParameter::Len {
                            p.len = v as usize;
                        } else {
                            p.n_matter = v as u32;
                        }
                    }
                }
                p.validated().map_err(|e| CliError::Config(e.to_string()))
            })
            .collect()
    }

    /// All referenced fields, checked before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.params()?;
        if self.mps.chi_max == 0 {
            return bad("mps.chi_max must be positive".into());
        }
        if !(self.mps.trunc_tol >= 0.0 && self.mps.trunc_tol < 1.0) {
            return bad(format!("mps.trunc_tol = {} outside [0, 1)", self.mps.trunc_tol));
        }
        if self.tebd.seeds.is_empty() {
            return bad("tebd.seeds is empty".into());
        }
        self.tebd.schedule().validated().map_err(|e| CliError::Config(e.to_string()))?;
        if !(0.0..0.5).contains(&self.analysis.discard_fraction) {
            return bad(format!("analysis.discard_fraction = {} outside [0, 0.5)", self.analysis.discard_fraction));
        }
        if !(self.analysis.bulk_window > 0.0 && self.analysis.bulk_window <= 1.0) {
            return bad(format!("analysis.bulk_window = {} outside (0, 1]", self.analysis.bulk_window));
        }
        if self.output.formats.is_empty() {
            return bad("output.formats is empty".into());
        }
        if self.sweep.is_some() {
            self.sweep_points()?;
        }
        Ok(())
    }
}
