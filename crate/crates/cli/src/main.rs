use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gqrp_due::{due_qp_objective, due_residuals, kappa_search, DueSolution, ScalingMode};
use gqrp_due_cli::config::KappaSpec;
use gqrp_due_cli::export::{default_out_dir, export_results};
use gqrp_due_cli::pipeline::{build_instance, run_pipeline, Overrides, EXIT_ERROR, EXIT_NO_GQRP, EXIT_OK};
use gqrp_due_cli::RunConfig;
use serde_json::json;

#[derive(Parser)]
#[command(name = "gqrp-due", version, about = "Dynamic user equilibrium by queue replacement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's, then out/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the grid step.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    force_numeric: bool,
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    LateSide,
    Global,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: cost step, flow step, verification, exports.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also solve the system optimum and compare.
        #[arg(long)]
        dso: bool,
        #[arg(long)]
        curves: bool,
    },
    /// Residuals of an externally supplied solution (JSON).
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Pipeline plus system optimum, pricing and Pareto report.
    Dso {
        #[command(flatten)]
        common: Common,
    },
    /// Schedule-cost scaling search for the sufficient condition.
    Kappa {
        #[command(flatten)]
        common: Common,
        /// Descending values in (0, 1].
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        bisection: Option<usize>,
    },
    /// Write the cost-step LPs and the flow LP in MPS format.
    ExportMps {
        #[command(flatten)]
        common: Common,
    },
}

fn init(quiet: bool) {
    let level = if quiet { "error" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(n) = std::env::var("GQRP_DUE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn load(common: &Common) -> anyhow::Result<RunConfig> {
    RunConfig::from_file(&common.config).context("load stage failed")
}

fn out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .unwrap_or_else(|| default_out_dir(cfg.output_dir.as_ref(), &cfg.name))
}

fn print(quiet: bool, value: &serde_json::Value) {
    if !quiet {
        println!("{}", serde_json::to_string_pretty(value).unwrap_or_default());
    }
}

fn solve(common: &Common, dso: bool, curves: bool) -> anyhow::Result<i32> {
    let cfg = load(common)?;
    let ov = Overrides {
        dt: common.dt,
        force_numeric: common.force_numeric,
        run_dso: dso,
        export_curves: curves,
    };
    let out = run_pipeline(&cfg, &ov)?;
    let dir = out_dir(common, &cfg);
    let manifest = export_results(&out, &dir, cfg.flags.export_mps)?;
    let s = &out.summary;
    print(
        common.quiet,
        &json!({
            "name": s.name,
            "holds": s.verdict.holds,
            "route": s.verdict.route,
            "flow_lp_objective": s.verdict.flow_lp_objective,
            "objective": s.objective,
            "residual_max": s.residual_max,
            "dso": s.dso,
            "out": dir,
            "files": manifest.files.len(),
        }),
    );
    Ok(s.exit_code)
}

fn verify(common: &Common, solution: &PathBuf) -> anyhow::Result<i32> {
    let cfg = load(common)?;
    let inst = build_instance(&cfg, common.dt)?;
    let text = std::fs::read_to_string(solution).with_context(|| format!("reading {}", solution.display()))?;
    let sol: DueSolution = serde_json::from_str(&text).context("parsing solution")?;
    if sol.flow.q.k != inst.k() || sol.cost.w.entities() != inst.n_links() || sol.cost.rho.len() != inst.n_origins() {
        anyhow::bail!("solution does not match the configured network and grid");
    }
    let r = due_residuals(&sol, &inst, cfg.tolerances.acceptance_threshold);
    let z = due_qp_objective(&sol, &inst);
    print(common.quiet, &json!({ "residuals": r, "objective": z }));
    Ok(if r.all_pass() { EXIT_OK } else { EXIT_NO_GQRP })
}

fn kappa(common: &Common, grid: Option<Vec<f64>>, mode: Option<Mode>, bisection: Option<usize>) -> anyhow::Result<i32> {
    let cfg = load(common)?;
    let inst = build_instance(&cfg, common.dt)?;
    let mut spec = cfg.kappa.clone().unwrap_or_default();
    if let Some(g) = grid {
        spec.grid = g;
    }
    if let Some(m) = mode {
        spec.mode = match m {
            Mode::LateSide => ScalingMode::LateSide,
            Mode::Global => ScalingMode::Global,
        };
    }
    if let Some(b) = bisection {
        spec.bisection_steps = b;
    }
    let KappaSpec {
        grid,
        mode,
        bisection_steps,
    } = spec;
    let opts = cfg.solve_options();
    let res = kappa_search(&inst, &grid, mode, bisection_steps, &opts.simplex(), &opts).context("kappa stage failed")?;
    let dir = out_dir(common, &cfg);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("kappa.json"), serde_json::to_string_pretty(&res)? + "\n")?;
    print(common.quiet, &serde_json::to_value(&res)?);
    Ok(if res.kappa_star.is_some() { EXIT_OK } else { EXIT_NO_GQRP })
}

fn export_mps(common: &Common) -> anyhow::Result<i32> {
    let mut cfg = load(common)?;
    cfg.flags.export_mps = true;
    let ov = Overrides {
        dt: common.dt,
        force_numeric: common.force_numeric,
        ..Default::default()
    };
    let out = run_pipeline(&cfg, &ov)?;
    let dir = out_dir(common, &cfg);
    let manifest = export_results(&out, &dir, true)?;
    let files: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).filter(|p| p.ends_with(".mps")).collect();
    print(common.quiet, &json!({ "out": dir, "mps": files }));
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Solve { common, .. }
        | Command::Verify { common, .. }
        | Command::Dso { common }
        | Command::Kappa { common, .. }
        | Command::ExportMps { common } => common,
    };
    init(common.quiet);
    let result = match &cli.command {
        Command::Solve { common, dso, curves } => solve(common, *dso, *curves),
        Command::Verify { common, solution } => verify(common, solution),
        Command::Dso { common } => solve(common, true, false),
        Command::Kappa {
            common,
            grid,
            mode,
            bisection,
        } => kappa(common, grid.clone(), *mode, *bisection),
        Command::ExportMps { common } => export_mps(common),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
