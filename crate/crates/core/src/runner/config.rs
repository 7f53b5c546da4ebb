use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::certificate::CertifyOptions;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::minimizer::SolverOptions;
use crate::operators::Scheme;
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Certify,
    CheckGrad,
    Wirtinger,
    OracleCompare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Certify => "certify",
            Command::CheckGrad => "check-grad",
            Command::Wirtinger => "wirtinger",
            Command::OracleCompare => "oracle-compare",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Command::Solve,
            Command::Certify,
            Command::CheckGrad,
            Command::Wirtinger,
            Command::OracleCompare,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub p: usize,
    pub periods: Vec<f64>,
    pub resolutions: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<TorusGrid>> {
        TorusGrid::shared(self.p, &self.periods, &self.resolutions)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub dump_field: bool,
    pub csv: bool,
    pub trace: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            dump_field: true,
            csv: false,
            trace: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditOptions {
    /// Random directions per scheme for `check-grad`.
    pub directions: usize,
    pub epsilon: f64,
    pub tolerance: f64,
    /// Random fields for `wirtinger`.
    pub wirtinger_trials: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            directions: 20,
            epsilon: 1e-6,
            tolerance: 1e-5,
            wirtinger_trials: 100,
        }
    }
}

fn default_scheme() -> Scheme {
    Scheme::Spectral
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    pub grid: GridSpec,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Newton polish after the descent, down to this residual.
    #[serde(default)]
    pub refine_tol: Option<f64>,
    #[serde(default)]
    pub certify: CertifyOptions,
    #[serde(default)]
    pub audit: AuditOptions,
    #[serde(default)]
    pub outputs: OutputSpec,
    /// Overrides `solver.seed` and `certify.seed` when present.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks everything that can be checked without running: grid shape,
    /// solver options and potential dimensions.
    pub fn validate(&self) -> Result<Arc<TorusGrid>> {
        let grid = self.grid.build()?;
        self.solver.validate()?;
        if self.potential.n() == 0 {
            return Err(Error::Config(
                "potential must have at least one component".into(),
            ));
        }
        if let Some(tol) = self.refine_tol {
            if !(tol > 0.0) {
                return Err(Error::Config("refine_tol must be positive".into()));
            }
        }
        Ok(grid)
    }
}
