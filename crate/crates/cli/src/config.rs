use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use shapesig::integrator::Solver;
use shapesig::solvers::EigenMode;
use shapesig::{Method, Pde};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PdeArg {
    Heat,
    Wave,
}

impl From<PdeArg> for Pde {
    fn from(p: PdeArg) -> Self {
        match p {
            PdeArg::Heat => Pde::Heat,
            PdeArg::Wave => Pde::Wave,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Full,
    Mcr,
    Ksmor,
    Hks,
    Wks,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Full => Method::Full,
            MethodArg::Mcr => Method::Mcr,
            MethodArg::Ksmor => Method::Ksmor,
            MethodArg::Hks => Method::Hks,
            MethodArg::Wks => Method::Wks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverArg {
    Direct,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EigModeArg {
    Symmetric,
    Generalised,
}

impl From<EigModeArg> for EigenMode {
    fn from(m: EigModeArg) -> Self {
        match m {
            EigModeArg::Symmetric => EigenMode::Symmetric,
            EigModeArg::Generalised => EigenMode::Generalised,
        }
    }
}

/// Everything that determines a run. Serialised verbatim into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pde: PdeArg,
    pub method: MethodArg,
    /// Retained eigenmodes for mcr / hks / wks.
    pub modes: usize,
    /// Krylov dimension for ksmor.
    pub krylov: usize,
    /// Krylov expansion point.
    pub sigma: f64,
    pub t_max: f64,
    /// Time levels, or kernel samples for hks / wks.
    pub levels: usize,
    pub solver: SolverArg,
    pub eps: f64,
    pub max_iters: usize,
    pub adapt_time: bool,
    pub eig_mode: EigModeArg,
    pub reference: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Geodesic-error acceptance threshold.
    pub threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pde: PdeArg::Heat,
            method: MethodArg::Mcr,
            modes: 100,
            krylov: 3,
            sigma: 0.1,
            t_max: 25.0,
            levels: 25,
            solver: SolverArg::Direct,
            eps: 1e-6,
            max_iters: 1000,
            adapt_time: false,
            eig_mode: EigModeArg::Symmetric,
            reference: None,
            target: None,
            ground_truth: None,
            out_dir: None,
            threads: None,
            threshold: 0.25,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }

    pub fn solver(&self) -> Solver {
        match self.solver {
            SolverArg::Direct => Solver::Direct,
            SolverArg::Cg => Solver::Cg { eps: self.eps, max_iters: self.max_iters },
        }
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        let bad = |m: String| Err(UsageError(m));
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        match self.method {
            MethodArg::Mcr | MethodArg::Hks | MethodArg::Wks if self.modes == 0 => bad("modes must be at least 1".into()),
            MethodArg::Ksmor if self.krylov == 0 => bad("krylov must be at least 1".into()),
            MethodArg::Ksmor if self.sigma == 0.0 || !self.sigma.is_finite() => {
                bad(format!("sigma must be finite and nonzero, got {}", self.sigma))
            }
            _ if self.solver == SolverArg::Cg && !(self.eps > 0.0 && self.max_iters > 0) => {
                bad("cg needs eps > 0 and max_iters > 0".into())
            }
            _ => Ok(()),
        }
    }

    pub fn require_reference(&self) -> Result<&Path, UsageError> {
        self.reference.as_deref().ok_or_else(|| UsageError("a reference mesh is required (--reference)".into()))
    }

    pub fn require_target(&self) -> Result<&Path, UsageError> {
        self.target.as_deref().ok_or_else(|| UsageError("a target mesh is required (--target)".into()))
    }
}

/// Command-line overrides; anything given here wins over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    #[arg(long, value_enum)]
    pub pde: Option<PdeArg>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Retained eigenmodes (mcr, hks, wks).
    #[arg(long)]
    pub modes: Option<usize>,
    /// Krylov dimension (ksmor).
    #[arg(long)]
    pub krylov: Option<usize>,
    /// Krylov expansion point (ksmor).
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    /// Integration horizon.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Number of time levels or kernel samples.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// Relative residual tolerance for cg.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stretch the horizon to the slowest retained mode (mcr).
    #[arg(long)]
    pub adapt_time: bool,
    #[arg(long, value_enum)]
    pub eig_mode: Option<EigModeArg>,
    /// Reference mesh (.off or .vert/.tri).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Target mesh.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Ground-truth file, or `identity`.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

impl ConfigArgs {
    pub fn apply(self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(pde, method, modes, krylov, sigma, t_max, levels, solver, eps, max_iters, eig_mode, threshold);
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if self.$f.is_some() { cfg.$f = self.$f; } )* };
        }
        set_opt!(reference, target, ground_truth, out_dir);
        if self.adapt_time {
            cfg.adapt_time = true;
        }
    }
}
