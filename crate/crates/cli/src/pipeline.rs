//! Orchestration of the full solve: load, cost step, flow step, verify and
//! optionally the system optimum.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use gqrp_due::network::load_tntp;
use gqrp_due::verify::CumulativeCurves;
use gqrp_due::{
    compare_dso_due, due_qp_objective, due_residuals, eulerian_reconstruct, pareto_report, run_flow_step,
    solve_cost_step, solve_dso, CostStep, DsoComparison, DsoSolution, DueObjective, DueSolution, FlowRoute,
    FlowStep, FlowStepOptions, GqrpVerdict, Instance, Network, ParetoReport, Provenance, ResidualReport,
    SolveOptions, TimeGrid,
};
use serde::Serialize;

use crate::config::{NetworkSource, RunConfig};

/// A failure tagged with the pipeline stage it came from.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {:#}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

/// Command-line overrides applied on top of the config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub force_numeric: bool,
    pub run_dso: bool,
    pub export_curves: bool,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO_GQRP: i32 = 2;

#[derive(Debug, Clone, Serialize)]
pub struct Iterations {
    pub cost_primal: usize,
    pub cost_dual: usize,
    pub flow: usize,
    pub dso: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DsoSummary {
    pub comparison: DsoComparison,
    pub pareto: ParetoReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub grid_points: usize,
    pub dt: f64,
    pub verdict: GqrpVerdict,
    pub rho: BTreeMap<u64, f64>,
    pub duality_gap: f64,
    pub dual_degeneracy: f64,
    pub boundary_warning: bool,
    /// Gap objective of the verified (or closest) solution.
    pub objective: Option<DueObjective>,
    pub residual_max: BTreeMap<String, f64>,
    pub residuals_pass: bool,
    pub iterations: Iterations,
    pub dso: Option<DsoSummary>,
    pub exit_code: i32,
    /// Wall-clock seconds per stage; not part of the determinism contract.
    pub timings: BTreeMap<String, f64>,
}

pub struct PipelineOutput {
    pub config: RunConfig,
    pub instance: Instance,
    pub cost: CostStep,
    pub flow: FlowStep,
    /// Verified equilibrium when the verdict holds, otherwise the closest
    /// flow under the candidate costs.
    pub solution: Option<DueSolution>,
    pub residuals: Option<ResidualReport>,
    pub curves: Option<CumulativeCurves>,
    pub dso: Option<DsoSolution>,
    pub summary: RunSummary,
}

pub fn load_network(source: &NetworkSource) -> anyhow::Result<Network> {
    Ok(match source {
        NetworkSource::Json { path } => Network::from_json_file(path)?,
        NetworkSource::Tntp {
            net,
            trips,
            destination,
            capacity_scale,
        } => {
            let net = std::fs::read_to_string(net)?;
            let trips = std::fs::read_to_string(trips)?;
            load_tntp(&net, &trips, *destination, *capacity_scale)?
        }
    })
}

pub fn build_instance(cfg: &RunConfig, dt: Option<f64>) -> Result<Instance, StageError> {
    cfg.validate().stage("load")?;
    let network = load_network(&cfg.network).stage("load")?;
    let g = cfg.grid;
    let grid = TimeGrid::new(g.t_start, g.t_end, dt.unwrap_or(g.dt)).stage("grid")?;
    cfg.schedule.check().stage("grid")?;
    let report = gqrp_due::network::validate_network(&network, &cfg.schedule, Some(&grid));
    for d in &report.diagnostics {
        log::warn!("{d:?}");
    }
    Instance::new(network, grid, cfg.schedule.clone()).stage("grid")
}

pub fn run_pipeline(cfg: &RunConfig, ov: &Overrides) -> Result<PipelineOutput, StageError> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    let inst = build_instance(cfg, ov.dt)?;
    lap("load", &mut timings);
    let opts: SolveOptions = cfg.solve_options();
    let solver = opts.simplex();

    let cost = solve_cost_step(&inst, &solver, &opts).stage("cost")?;
    lap("cost", &mut timings);
    let fopts = FlowStepOptions {
        force_numeric: ov.force_numeric || cfg.flags.force_numeric_flow_step,
        cross_check: cfg.flags.cross_check,
    };
    let flow = run_flow_step(&inst, &cost, &solver, &opts, &fopts).stage("flow")?;
    lap("flow", &mut timings);

    let provenance = match flow.verdict.route {
        FlowRoute::Constructive => Provenance::Constructive,
        FlowRoute::Numeric => Provenance::Numeric,
    };
    let solution = flow.flow.as_ref().or(flow.diagnostic_flow.as_ref()).map(|f| DueSolution {
        cost: cost.cost.clone(),
        flow: f.clone(),
        provenance,
    });
    let tol = opts.acceptance;
    let residuals = solution.as_ref().map(|s| due_residuals(s, &inst, tol));
    let objective = solution.as_ref().map(|s| due_qp_objective(s, &inst));
    let curves = match (&solution, ov.export_curves || cfg.flags.export_curves) {
        (Some(s), true) if flow.verdict.holds => Some(eulerian_reconstruct(s, &inst).stage("verify")?),
        _ => None,
    };
    lap("verify", &mut timings);

    let mut dso = None;
    let mut dso_summary = None;
    if ov.run_dso || cfg.flags.run_dso {
        let d = solve_dso(&inst, &solver).stage("dso")?;
        if let Some(s) = &solution {
            dso_summary = Some(DsoSummary {
                comparison: compare_dso_due(&d, s, flow.verdict.holds, &inst, &opts),
                pareto: pareto_report(&d, s, &inst),
            });
        }
        dso = Some(d);
        lap("dso", &mut timings);
    }

    let residuals_pass = residuals.as_ref().is_some_and(|r| r.all_pass());
    let exit_code = if flow.verdict.holds && residuals_pass {
        EXIT_OK
    } else {
        EXIT_NO_GQRP
    };
    let summary = RunSummary {
        name: if cfg.name.is_empty() {
            inst.network.name.clone()
        } else {
            cfg.name.clone()
        },
        grid_points: inst.k(),
        dt: inst.grid.dt,
        verdict: flow.verdict.clone(),
        rho: inst.network.origin_ids().iter().copied().zip(cost.cost.rho.iter().copied()).collect(),
        duality_gap: cost.duality_gap,
        dual_degeneracy: cost.dual_degeneracy,
        boundary_warning: cost.boundary_warning,
        objective,
        residual_max: residuals
            .as_ref()
            .map(|r| r.conditions().iter().map(|(n, c)| (n.to_string(), c.max)).collect())
            .unwrap_or_default(),
        residuals_pass,
        iterations: Iterations {
            cost_primal: cost.primal_iterations,
            cost_dual: cost.dual_iterations,
            flow: flow.lp_iterations,
            dso: dso.as_ref().map(|d| d.iterations),
        },
        dso: dso_summary,
        exit_code,
        timings,
    };
    Ok(PipelineOutput {
        config: cfg.clone(),
        instance: inst,
        cost,
        flow,
        solution,
        residuals,
        curves,
        dso,
        summary,
    })
}
