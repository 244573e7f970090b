//! Run configuration: a structured TOML document plus command-line
//! overrides. Unknown keys are rejected so reports always reflect the
//! configuration they claim.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::solver::DtChoice;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub problem: Option<String>,
    pub levels: Option<Vec<u32>>,
    pub stencil_width: Option<u8>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub solver: Option<SolverSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: Option<DtField>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

/// `dt` is either the literal string "auto" or a positive step.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum DtField {
    Auto(String),
    Value(f64),
}

impl DtField {
    pub fn to_choice(&self) -> Result<DtChoice> {
        match self {
            DtField::Auto(s) if s == "auto" => Ok(DtChoice::Auto),
            DtField::Auto(s) => Err(Error::InvalidConfig(format!(
                "solver.dt must be \"auto\" or a positive number, got \"{s}\""
            ))),
            DtField::Value(v) if *v > 0.0 => Ok(DtChoice::Fixed(*v)),
            DtField::Value(v) => Err(Error::InvalidConfig(format!(
                "solver.dt must be positive, got {v}"
            ))),
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// Fully resolved run configuration (defaults, then file, then flags).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: String,
    pub n: usize,
    pub levels: Vec<u32>,
    pub width: u8,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub dt: Option<DtChoice>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: String::new(),
            n: 16,
            levels: vec![3, 4, 5, 6],
            width: 1,
            seed: 42,
            out: None,
            csv: None,
            dt: None,
            tol: None,
            max_iters: None,
        }
    }
}

impl RunConfig {
    pub fn apply_file(&mut self, file: &FileConfig) -> Result<()> {
        if let Some(p) = &file.problem {
            self.problem = p.clone();
        }
        if let Some(l) = &file.levels {
            self.levels = l.clone();
        }
        if let Some(w) = file.stencil_width {
            self.width = w;
        }
        if let Some(s) = file.seed {
            self.seed = s;
        }
        if let Some(o) = &file.out {
            self.out = Some(o.clone());
        }
        if let Some(solver) = &file.solver {
            if let Some(dt) = &solver.dt {
                self.dt = Some(dt.to_choice()?);
            }
            if let Some(t) = solver.tol {
                self.tol = Some(t);
            }
            if let Some(m) = solver.max_iters {
                self.max_iters = Some(m);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.width) {
            return Err(Error::UnsupportedWidth(self.width));
        }
        if self.n < 2 {
            return Err(Error::TooFewIntervals(self.n));
        }
        if self.levels.is_empty() || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "levels must be nonempty and strictly increasing".into(),
            ));
        }
        if let Some(t) = self.tol {
            if !t.is_finite() || t <= 0.0 {
                return Err(Error::InvalidConfig("solver.tol must be positive".into()));
            }
        }
        if let Some(m) = self.max_iters {
            if m < 1 {
                return Err(Error::InvalidConfig("solver.max_iters must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// Solve parameters for the chosen problem with overrides applied.
    pub fn solve_params(&self, problem: &crate::problems::PdeProblem) -> crate::solver::SolveParams {
        let mut params = crate::solver::SolveParams::for_problem(problem);
        if let Some(dt) = self.dt {
            params.dt = dt;
        }
        if let Some(t) = self.tol {
            params.tol = t;
        }
        if let Some(m) = self.max_iters {
            params.max_iters = m;
        }
        params
    }
}

/// Parses an inclusive level range written `a..b`.
pub fn parse_levels(s: &str) -> std::result::Result<Vec<u32>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a range like 3..6, got \"{s}\""))?;
    let lo: u32 = a.trim().parse().map_err(|_| format!("bad level \"{a}\""))?;
    let hi: u32 = b.trim().parse().map_err(|_| format!("bad level \"{b}\""))?;
    if hi < lo {
        return Err(format!("range {lo}..{hi} is empty"));
    }
    Ok((lo..=hi).collect())
}
