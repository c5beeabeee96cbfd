//! Scenario configuration: strict TOML, resolved into solver inputs.

use std::path::{Path, PathBuf};

use deadoil_core::coefficients::{builtin_set, CoefficientSet, DEFAULT_FAMILY};
use deadoil_core::io::{load_field, read_control_dir};
use deadoil_core::{
    solve_forward, ControlTrajectory, CostParams, Grid2D, Linearization, OptimizerOptions,
    ScalarField, SolverOptions, TimeGrid,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub cost: CostConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub adjoint: AdjointConfig,
    #[serde(default)]
    pub gradcheck: GradcheckConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "two")]
    pub c2: f64,
    /// Tabulated coefficients; overrides `family` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self {
            family: default_family(),
            c1: 1.0,
            c2: 2.0,
            table: None,
        }
    }
}

/// A static field on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude * sin(mx pi x / lx) sin(my pi y / ly)`
    Sines {
        amplitude: f64,
        #[serde(default = "one_usize")]
        mx: usize,
        #[serde(default = "one_usize")]
        my: usize,
    },
    File {
        path: PathBuf,
    },
    /// Terminal state of a forward solve driven by `cost.reference_control`
    /// (targets only).
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub u0: FieldSpec,
    pub p0: FieldSpec,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            u0: FieldSpec::Zero,
            p0: FieldSpec::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub beta1: f64,
    pub q0: f64,
    pub target_u: FieldSpec,
    pub target_p: FieldSpec,
    /// Control held constant in time that generates `reference` targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_control: Option<FieldSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControlInit {
    Zero,
    /// A static field repeated at every step.
    Field {
        field: FieldSpec,
    },
    /// Directory of `f_%04d.csv`, one file per step.
    Trajectory {
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub init: ControlInit,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            init: ControlInit::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub shrink: f64,
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let d = OptimizerOptions::default();
        Self {
            grad_tol: d.grad_tol,
            max_iter: d.max_iter,
            armijo_c: d.armijo_c,
            shrink: d.shrink,
            initial_step: d.initial_step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearizationConfig {
    Terminal,
    TimeAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdjointConfig {
    pub linearization: LinearizationConfig,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for AdjointConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            linearization: LinearizationConfig::Terminal,
            tol: d.tol,
            max_iter: d.max_iter,
            restart: d.restart,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub directions: usize,
    pub step: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            directions: 10,
            step: 1e-5,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub mms: bool,
    pub mms_t_final: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            mms: true,
            mms_t_final: 0.05,
            r_min: -10.0,
            r_max: 10.0,
            samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            stride: 1,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn one_usize() -> usize {
    1
}

fn default_family() -> String {
    DEFAULT_FAMILY.to_string()
}

/// Solver inputs built from a config.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: Grid2D,
    pub tg: TimeGrid,
    pub coef: CoefficientSet,
    pub u0: ScalarField,
    pub p0: ScalarField,
    pub params: CostParams,
    pub control: ControlTrajectory,
    pub optimizer: OptimizerOptions,
    pub linearization: Linearization,
    pub solver: SolverOptions,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory and must exist.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.check_files(&base)?;
        Ok((cfg, base))
    }

    fn referenced_files(&self) -> Vec<&Path> {
        let mut specs = vec![
            &self.initial.u0,
            &self.initial.p0,
            &self.cost.target_u,
            &self.cost.target_p,
        ];
        specs.extend(&self.cost.reference_control);
        let mut out: Vec<&Path> = Vec::new();
        match &self.control.init {
            ControlInit::Field { field } => specs.push(field),
            ControlInit::Trajectory { dir } => out.push(dir),
            ControlInit::Zero => {}
        }
        for spec in specs {
            if let FieldSpec::File { path } = spec {
                out.push(path);
            }
        }
        out.extend(self.coefficients.table.as_deref());
        out
    }

    fn check_files(&self, base: &Path) -> Result<(), CliError> {
        for p in self.referenced_files() {
            let full = base.join(p);
            if !full.exists() {
                return Err(CliError::Config(format!(
                    "referenced path {} does not exist",
                    full.display()
                )));
            }
        }
        Ok(())
    }

    /// Builds every solver input. Precondition violations surface as config
    /// errors carrying the solver's message.
    pub fn resolve(&self, base: &Path) -> Result<Scenario, CliError> {
        let pre = CliError::precondition;
        let g = &self.grid;
        let grid = Grid2D::new(g.nx, g.ny, g.lx, g.ly).map_err(pre)?;
        let tg = TimeGrid::new(self.time.t_final, self.time.steps).map_err(pre)?;
        let c = &self.coefficients;
        let coef = match &c.table {
            Some(t) => CoefficientSet::from_table_csv(&base.join(t), c.c1, c.c2).map_err(pre)?,
            None => builtin_set(&c.family, c.c1, c.c2).map_err(pre)?,
        };
        let static_field = |spec: &FieldSpec, what: &str| -> Result<ScalarField, CliError> {
            match spec {
                FieldSpec::Zero => Ok(ScalarField::zeros(&grid)),
                FieldSpec::Constant { value } => Ok(ScalarField::constant(&grid, *value)),
                FieldSpec::Sines { amplitude, mx, my } => {
                    let (kx, ky) = (
                        *mx as f64 * std::f64::consts::PI / grid.lx,
                        *my as f64 * std::f64::consts::PI / grid.ly,
                    );
                    Ok(ScalarField::from_fn(&grid, |x, y| {
                        amplitude * (kx * x).sin() * (ky * y).sin()
                    }))
                }
                FieldSpec::File { path } => load_field(&grid, &base.join(path)).map_err(pre),
                FieldSpec::Reference => Err(CliError::Config(format!(
                    "`reference` is only allowed for cost targets, not {what}"
                ))),
            }
        };
        let u0 = static_field(&self.initial.u0, "initial.u0")?;
        let p0 = static_field(&self.initial.p0, "initial.p0")?;

        let needs_reference = matches!(self.cost.target_u, FieldSpec::Reference)
            || matches!(self.cost.target_p, FieldSpec::Reference);
        let reference = if needs_reference {
            let spec = self.cost.reference_control.as_ref().ok_or_else(|| {
                CliError::Config("`reference` targets need cost.reference_control".into())
            })?;
            let f = static_field(spec, "cost.reference_control")?;
            let traj = solve_forward(
                &u0,
                &p0,
                &ControlTrajectory::uniform(f, tg.steps),
                &coef,
                &tg,
            )
            .map_err(CliError::Numeric)?;
            Some((traj.u[tg.steps].clone(), traj.p[tg.steps].clone()))
        } else {
            None
        };
        let target =
            |spec: &FieldSpec, pick: fn(&(ScalarField, ScalarField)) -> &ScalarField, what| match (
                spec, &reference,
            ) {
                (FieldSpec::Reference, Some(r)) => Ok(pick(r).clone()),
                _ => static_field(spec, what),
            };
        let target_u = target(&self.cost.target_u, |r| &r.0, "cost.target_u")?;
        let target_p = target(&self.cost.target_p, |r| &r.1, "cost.target_p")?;
        let params =
            CostParams::new(self.cost.beta1, self.cost.q0, target_u, target_p).map_err(pre)?;

        let control = match &self.control.init {
            ControlInit::Zero => ControlTrajectory::zeros(&grid, tg.steps),
            ControlInit::Field { field } => {
                ControlTrajectory::uniform(static_field(field, "control.init")?, tg.steps)
            }
            ControlInit::Trajectory { dir } => {
                read_control_dir(&grid, &base.join(dir), tg.steps).map_err(pre)?
            }
        };

        let o = &self.optimizer;
        let a = &self.adjoint;
        let solver = SolverOptions {
            tol: a.tol,
            max_iter: a.max_iter,
            restart: a.restart,
        };
        let linearization = match a.linearization {
            LinearizationConfig::Terminal => Linearization::Terminal,
            LinearizationConfig::TimeAverage => Linearization::TimeAverage,
        };
        let optimizer = OptimizerOptions {
            grad_tol: o.grad_tol,
            max_iter: o.max_iter,
            armijo_c: o.armijo_c,
            shrink: o.shrink,
            initial_step: o.initial_step,
            linearization,
            kkt_solver: solver,
        };
        if self.output.stride == 0 {
            return Err(CliError::Config("output.stride must be at least 1".into()));
        }
        let gc = &self.gradcheck;
        if gc.directions == 0 || !(gc.step > 0.0) || !(gc.tol > 0.0) {
            return Err(CliError::Config(
                "gradcheck needs directions >= 1, step > 0 and tol > 0".into(),
            ));
        }

        let v = &self.verify;
        if !(v.r_min < v.r_max) || v.samples < 2 || !(v.mms_t_final > 0.0) {
            return Err(CliError::Config(
                "verify needs r_min < r_max, samples >= 2 and mms_t_final > 0".into(),
            ));
        }

        Ok(Scenario {
            grid,
            tg,
            coef,
            u0,
            p0,
            params,
            control,
            optimizer,
            linearization,
            solver,
        })
    }

    /// Canonical TOML of the resolved config, as recorded in the manifest.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
