//! Run configuration: an optional TOML file merged with command-line
//! overrides. Flags win over file values.

use std::path::{Path, PathBuf};

use fockforge::analytic::{resonant_coupling, zeta_of, CouplingSet, TargetSpec};
use fockforge::dynamics::{SteadyStateControl, StepControl, DEFAULT_CAVITY_DIM};
use fockforge::fockspace::FockDim;
use fockforge::phasespace::RealGrid1D;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Couplings,
    State,
    Verify,
    Evolve,
    Wigner,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Couplings => "couplings",
            Command::State => "state",
            Command::Verify => "verify",
            Command::Evolve => "evolve",
            Command::Wigner => "wigner",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Mechanics alone after eliminating the cavity.
    Effective,
    /// Cavity and mechanics.
    TwoMode,
}

/// Everything a file may contain. All fields optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub couplings: CouplingSection,
    #[serde(default)]
    pub dims: DimSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub n: Option<u32>,
    pub zeta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub g_minus: Option<f64>,
    pub g_plus: Option<f64>,
    pub g_zero: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimSection {
    pub mech: Option<usize>,
    pub cav: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    pub q_step: Option<f64>,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub p_step: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    pub model: Option<Model>,
    pub t_final: Option<f64>,
    pub checkpoints: Option<usize>,
    pub steady: Option<bool>,
    pub max_time: Option<f64>,
    pub tolerance: Option<f64>,
    pub interval: Option<f64>,
    pub step_factor: Option<f64>,
    pub thermal_start: Option<f64>,
    pub allow_unstable: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub zetas: Option<Vec<f64>>,
    pub ns: Option<Vec<u32>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Copies every value set in `over` onto `self`.
    pub fn merge(mut self, over: FileConfig) -> Self {
        macro_rules! take {
            ($($sec:ident . $field:ident),* $(,)?) => {
                $( if over.$sec.$field.is_some() { self.$sec.$field = over.$sec.$field; } )*
            };
        }
        if over.command.is_some() {
            self.command = over.command;
        }
        take!(
            target.n,
            target.zeta,
            couplings.g_minus,
            couplings.g_plus,
            couplings.g_zero,
            couplings.kappa,
            dims.mech,
            dims.cav,
            grid.q_min,
            grid.q_max,
            grid.q_step,
            grid.p_min,
            grid.p_max,
            grid.p_step,
            evolve.model,
            evolve.t_final,
            evolve.checkpoints,
            evolve.steady,
            evolve.max_time,
            evolve.tolerance,
            evolve.interval,
            evolve.step_factor,
            evolve.thermal_start,
            evolve.allow_unstable,
            sweep.zetas,
            sweep.ns,
            output.path,
        );
        self
    }
}

pub const DEFAULT_G_MINUS: f64 = 1.0;
pub const DEFAULT_KAPPA_OVER_G: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub p_step: f64,
}

impl GridConfig {
    pub fn grids(&self) -> Result<(RealGrid1D, RealGrid1D), CliError> {
        Ok((
            RealGrid1D::new(self.q_min, self.q_max, self.q_step)?,
            RealGrid1D::new(self.p_min, self.p_max, self.p_step)?,
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolveConfig {
    pub model: Model,
    pub t_final: f64,
    pub checkpoints: usize,
    /// Run to a steady state instead of a fixed time.
    pub steady: bool,
    pub max_time: f64,
    pub tolerance: f64,
    pub interval: f64,
    pub step_factor: f64,
    /// Mean occupation of a thermal mechanical start; ground state if absent.
    pub thermal_start: Option<f64>,
}

impl EvolveConfig {
    pub fn step_control(&self) -> StepControl {
        StepControl {
            factor: self.step_factor,
            ..StepControl::default()
        }
    }

    pub fn steady_control(&self) -> SteadyStateControl {
        SteadyStateControl {
            tolerance: self.tolerance,
            interval: self.interval,
            max_time: self.max_time,
            step: self.step_control(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub zetas: Vec<f64>,
    pub ns: Vec<u32>,
}

/// Fully resolved configuration, echoed into every output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub n: Option<u32>,
    /// Target squeezing; derived from the couplings when only they are given.
    pub zeta: Option<f64>,
    pub couplings: Option<CouplingSet>,
    /// True when `G₊` and `G₀` were derived from the target.
    pub couplings_derived: bool,
    /// Mechanical truncation; escalated automatically when absent.
    pub dim: Option<usize>,
    pub cav_dim: usize,
    pub grid: GridConfig,
    pub evolve: EvolveConfig,
    pub sweep: SweepConfig,
    pub allow_unstable: bool,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Resolves defaults and checks consistency between target and couplings.
    pub fn resolve(file: FileConfig) -> Result<Self, CliError> {
        let command = file
            .command
            .ok_or_else(|| CliError::Config("no command given".into()))?;
        let allow_unstable = file.evolve.allow_unstable.unwrap_or(false);
        let n = file.target.n;
        let c = &file.couplings;

        let g_minus = c.g_minus.unwrap_or(DEFAULT_G_MINUS);
        let kappa = c.kappa.unwrap_or(DEFAULT_KAPPA_OVER_G * g_minus);
        let mut zeta = file.target.zeta;
        if let Some(z) = zeta {
            if !(0.0..1.0).contains(&z) {
                return Err(CliError::Config(format!(
                    "zeta = {z} outside [0, 1): the scheme needs G+ < G-"
                )));
            }
        }
        let mut couplings_derived = false;
        let couplings = match (c.g_plus, n) {
            (Some(g_plus), _) => {
                let g_zero = match (c.g_zero, n) {
                    (Some(g0), _) => g0,
                    (None, Some(n)) => resonant_coupling(g_plus, g_minus, n)?,
                    (None, None) => {
                        return Err(CliError::Config(
                            "G0 needs either an explicit value or a target n".into(),
                        ))
                    }
                };
                let set = CouplingSet::new(g_minus, g_plus, g_zero, kappa)?;
                if set.is_stable() {
                    let derived = zeta_of(&set)?;
                    match zeta {
                        Some(z) if (z - derived).abs() > 1e-12 => {
                            return Err(CliError::Config(format!(
                                "couplings give zeta = {derived} but zeta = {z} was requested"
                            )))
                        }
                        None => zeta = Some(derived),
                        _ => {}
                    }
                } else if !allow_unstable {
                    return Err(fockforge::Error::Unstable {
                        g_plus: set.g_plus,
                        g_minus: set.g_minus,
                    }
                    .into());
                }
                Some(set)
            }
            (None, Some(n)) => match zeta {
                Some(z) => {
                    couplings_derived = true;
                    let mut set = CouplingSet::resonant(g_minus, &TargetSpec::new(n, z)?, kappa)?;
                    if let Some(g0) = c.g_zero {
                        set.g_zero = g0;
                        couplings_derived = false;
                    }
                    Some(set)
                }
                None => None,
            },
            (None, None) => None,
        };

        let dim = file.dims.mech;
        if let Some(d) = dim {
            FockDim::new(d)?;
        }
        let cav_dim = file.dims.cav.unwrap_or(DEFAULT_CAVITY_DIM);
        FockDim::new(cav_dim)?;

        let g = &file.grid;
        let grid = GridConfig {
            q_min: g.q_min.unwrap_or(-8.0),
            q_max: g.q_max.unwrap_or(4.0),
            q_step: g.q_step.unwrap_or(0.05),
            p_min: g.p_min.unwrap_or(-6.0),
            p_max: g.p_max.unwrap_or(6.0),
            p_step: g.p_step.unwrap_or(0.05),
        };
        if command == Command::Wigner {
            grid.grids()?;
        }

        let e = &file.evolve;
        let evolve = EvolveConfig {
            model: e.model.unwrap_or(Model::Effective),
            t_final: e.t_final.unwrap_or(200.0),
            checkpoints: e.checkpoints.unwrap_or(100),
            steady: e.steady.unwrap_or(false),
            max_time: e.max_time.unwrap_or(SteadyStateControl::default().max_time),
            tolerance: e
                .tolerance
                .unwrap_or(SteadyStateControl::default().tolerance),
            interval: e.interval.unwrap_or(SteadyStateControl::default().interval),
            step_factor: e.step_factor.unwrap_or(StepControl::default().factor),
            thermal_start: e.thermal_start,
        };
        if let Some(t) = evolve.thermal_start {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(CliError::Config(format!(
                    "thermal start occupation must be non-negative, got {t}"
                )));
            }
        }

        let sweep = SweepConfig {
            zetas: file.sweep.zetas.clone().unwrap_or_default(),
            ns: file.sweep.ns.clone().unwrap_or_default(),
        };
        if command == Command::Sweep {
            if sweep.zetas.is_empty() || sweep.ns.is_empty() {
                return Err(CliError::Config(
                    "sweep needs non-empty zeta and n axes".into(),
                ));
            }
            for &z in &sweep.zetas {
                TargetSpec::new(0, z)?;
            }
        }

        let cfg = Self {
            command,
            n,
            zeta,
            couplings,
            couplings_derived,
            dim,
            cav_dim,
            grid,
            evolve,
            sweep,
            allow_unstable,
            out: file.output.path,
        };
        cfg.check_requirements()?;
        Ok(cfg)
    }

    fn check_requirements(&self) -> Result<(), CliError> {
        match self.command {
            Command::Verify if self.couplings.is_some_and(|c| !c.is_stable()) => {}
            Command::Couplings | Command::State | Command::Verify | Command::Wigner => {
                self.target()?;
            }
            Command::Evolve => {
                self.n
                    .ok_or_else(|| CliError::Config("evolve needs a target n".into()))?;
                self.couplings()?;
            }
            Command::Sweep => {}
        }
        if matches!(self.command, Command::Wigner | Command::Sweep) && self.out.is_none() {
            return Err(CliError::Config(format!(
                "{} writes a CSV file and needs --out",
                self.command.name()
            )));
        }
        Ok(())
    }

    pub fn target(&self) -> Result<TargetSpec, CliError> {
        match (self.n, self.zeta) {
            (Some(n), Some(z)) => Ok(TargetSpec::new(n, z)?),
            _ => Err(CliError::Config(format!(
                "{} needs a target: n and zeta (or G+ with G-)",
                self.command.name()
            ))),
        }
    }

    pub fn couplings(&self) -> Result<CouplingSet, CliError> {
        self.couplings
            .ok_or_else(|| CliError::Config("couplings could not be resolved".into()))
    }
}
