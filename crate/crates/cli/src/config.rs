//! Run configuration: one JSON document per experiment.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use gqrp_due::{ScalingMode, ScheduleCost, SolveOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum NetworkSource {
    Json {
        path: PathBuf,
    },
    Tntp {
        net: PathBuf,
        trips: PathBuf,
        destination: u64,
        #[serde(default = "one")]
        capacity_scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub lp_tol: f64,
    pub support_threshold: Option<f64>,
    /// Relative zero test for the flow gap, and the residual pass level.
    pub acceptance_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let o = SolveOptions::default();
        Tolerances {
            lp_tol: o.lp_tol,
            support_threshold: o.support_threshold,
            acceptance_threshold: o.acceptance,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Flags {
    pub force_numeric_flow_step: bool,
    pub export_mps: bool,
    pub export_curves: bool,
    pub run_dso: bool,
    /// Solve the flow LP even when the constructive route succeeds.
    pub cross_check: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KappaSpec {
    pub grid: Vec<f64>,
    #[serde(default)]
    pub mode: ScalingMode,
    #[serde(default = "default_bisection")]
    pub bisection_steps: usize,
}

fn default_bisection() -> usize {
    6
}

impl Default for KappaSpec {
    fn default() -> Self {
        KappaSpec {
            grid: vec![1.0, 0.75, 0.5],
            mode: ScalingMode::LateSide,
            bisection_steps: default_bisection(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub network: NetworkSource,
    pub grid: GridSpec,
    pub schedule: ScheduleCost,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub kappa: Option<KappaSpec>,
}

impl RunConfig {
    /// Reads a config; relative paths inside it resolve against its folder.
    pub fn from_file(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.network {
            NetworkSource::Json { path } => fix(path),
            NetworkSource::Tntp { net, trips, .. } => {
                fix(net);
                fix(trips);
            }
        }
        if let Some(out) = &mut self.output_dir {
            fix(out);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let paths: Vec<&PathBuf> = match &self.network {
            NetworkSource::Json { path } => vec![path],
            NetworkSource::Tntp { net, trips, .. } => vec![net, trips],
        };
        for p in paths {
            if !p.exists() {
                bail!("network file {} does not exist", p.display());
            }
        }
        let t = &self.tolerances;
        if !(t.lp_tol > 0.0) || !(t.acceptance_threshold > 0.0) || t.support_threshold.is_some_and(|s| !(s > 0.0)) {
            bail!("tolerances must be positive");
        }
        if let Some(k) = &self.kappa {
            if k.grid.is_empty() {
                bail!("kappa grid is empty");
            }
        }
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            lp_tol: self.tolerances.lp_tol,
            support_threshold: self.tolerances.support_threshold,
            acceptance: self.tolerances.acceptance_threshold,
        }
    }
}
