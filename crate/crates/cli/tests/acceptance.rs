//! End-to-end acceptance run over the shipped fixtures. Prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use gqrp_due::flow_step::{flow_gap, gap_breakdown};
use gqrp_due::lp::{enumerate_vertices_oracle, LpProblem, LpSolver, RowSense, Sense, Tag};
use gqrp_due::*;
use gqrp_due_cli::pipeline::build_instance;
use gqrp_due_cli::{run_pipeline, Overrides, PipelineOutput, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Flow-LP objective pinned for the Nguyen fixture at gamma = 1.2.
const NGUYEN_NOGQRP_OBJECTIVE: f64 = 81.968;

struct Outcome {
    pass: bool,
    detail: String,
}

fn config(name: &str) -> anyhow::Result<RunConfig> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/configs").join(name);
    RunConfig::from_file(path)
}

fn run(name: &str) -> anyhow::Result<(PipelineOutput, f64)> {
    let cfg = config(name)?;
    let t0 = Instant::now();
    let out = run_pipeline(&cfg, &Overrides::default())?;
    Ok((out, t0.elapsed().as_secs_f64()))
}

fn weighted_demand(out: &PipelineOutput) -> f64 {
    let net = &out.instance.network;
    net.demand.iter().zip(&out.cost.cost.rho).map(|(q, r)| q * r).sum()
}

fn braess(out: &PipelineOutput, secs: f64) -> Outcome {
    let v = &out.flow.verdict;
    let z = out.summary.objective.map_or(f64::INFINITY, |o| o.total);
    let bound = 1e-6 * (1.0 + weighted_demand(out));
    let res = out.residuals.as_ref().map_or(f64::INFINITY, |r| r.max());
    let diff = out.flow.cross_check.as_ref().map_or(f64::INFINITY, |c| c.max_cell_diff);
    Outcome {
        pass: v.holds && z.abs() <= bound && res <= 1e-6 && diff <= 1e-6 && secs < 10.0,
        detail: format!(
            "holds={} route={:?} Z={z:.3e} (bound {bound:.3e}) residual={res:.3e} route diff={diff:.3e} time={secs:.2}s",
            v.holds, v.route
        ),
    }
}

fn single_link() -> anyhow::Result<Outcome> {
    let (out, secs) = run("single_link.json")?;
    let rho = out.cost.cost.rho[0];
    let sol = out.solution.as_ref().ok_or_else(|| anyhow::anyhow!("no solution"))?;
    let thr = out.config.solve_options().support();
    let on: Vec<usize> = (0..out.instance.k()).filter(|&t| sol.flow.q.get(0, t) > thr).collect();
    let dt = out.instance.grid.dt;
    let window = on.last().zip(on.first()).map_or(0.0, |(b, a)| (b - a + 1) as f64 * dt);
    let revenue = out.summary.dso.as_ref().map_or(f64::NAN, |d| d.pareto.toll_revenue);
    Ok(Outcome {
        pass: (rho - 2.4).abs() <= 1e-4 && (window - 12.0).abs() <= dt + 1e-9 && (revenue - 720.0).abs() <= 1.0 && secs < 1.0,
        detail: format!("rho={rho:.6} window={window:.2} revenue={revenue:.4} time={secs:.2}s"),
    })
}

fn nguyen() -> anyhow::Result<Outcome> {
    let (valid, _) = run("nguyen_gqrp.json")?;
    let (broken, _) = run("nguyen_nogqrp.json")?;
    let (v, b) = (&valid.flow.verdict, &broken.flow.verdict);
    let split = b.breakdown;
    let pass = v.holds
        && v.flow_lp_objective.abs() <= 1e-8
        && !b.holds
        && b.flow_lp_objective > 0.0
        && split.dominant() == "queueing"
        && (b.flow_lp_objective - NGUYEN_NOGQRP_OBJECTIVE).abs() <= 1e-3;
    Ok(Outcome {
        pass,
        detail: format!(
            "gamma 0.6: holds={} objective={:.3e}; gamma 1.2: holds={} objective={:.4} (pinned {NGUYEN_NOGQRP_OBJECTIVE}) queueing={:.3} route={:.3} departure={:.3}",
            v.holds, v.flow_lp_objective, b.holds, b.flow_lp_objective, split.queueing, split.route, split.departure
        ),
    })
}

fn sioux_falls() -> anyhow::Result<Outcome> {
    let (out, secs) = run("siouxfalls.json")?;
    let v = &out.flow.verdict;
    let z = out.summary.objective.map_or(f64::INFINITY, |o| o.total);
    let bound = 1e-6 * (1.0 + weighted_demand(&out));
    let res = out.residuals.as_ref().map_or(f64::INFINITY, |r| r.max());
    Ok(Outcome {
        pass: v.holds && z.abs() < bound && res <= 1e-6,
        detail: format!(
            "links={} origins={} dt={} holds={} Z={z:.3e} (bound {bound:.3e}) residual={res:.3e} time={secs:.1}s",
            out.instance.n_links(),
            out.instance.n_origins(),
            out.instance.grid.dt,
            v.holds
        ),
    })
}

fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.gen_range(2..=5);
    let mut p = LpProblem::new("tiny", if rng.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize });
    for j in 0..n {
        p.add_col(Tag::scalar("x", j), rng.gen_range(-4..=4) as f64, 0.0, rng.gen_range(1..=5) as f64)
            .unwrap();
    }
    for i in 0..rng.gen_range(1..=4) {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-3..=3) as f64)).collect();
        let sense = [RowSense::Le, RowSense::Ge, RowSense::Eq][rng.gen_range(0..3)];
        p.add_row(Tag::scalar("r", i), &coeffs, sense, rng.gen_range(-3..=6) as f64).unwrap();
    }
    p
}

fn properties(out: &PipelineOutput) -> anyhow::Result<Outcome> {
    let inst = &out.instance;
    let cost = &out.cost.cost;
    let thr = out.config.solve_options().support();
    let sol = out.solution.as_ref().ok_or_else(|| anyhow::anyhow!("no solution"))?;
    let mult = &out.flow.multipliers;
    let mut failed = Vec::new();

    if out.cost.duality_gap > 1e-8 {
        failed.push("duality gap");
    }
    let pd = cost.pi.differentiate(&inst.grid);
    if pd.data.iter().any(|&v| v >= 1.0) {
        failed.push("pi-dot < 1");
    }
    let wd = cost.w.differentiate(&inst.grid);
    let slopes_ok = (0..inst.n_links()).all(|l| {
        (1..inst.k()).all(|t| {
            let queued = cost.w.get(l, t) > thr && cost.w.get(l, t - 1) > thr;
            let v = wd.get(l, t);
            !queued || v.abs() < 1e-6 || (v + inst.s_dot[t]).abs() < 1e-6
        })
    });
    if !slopes_ok {
        failed.push("w-dot in {-s-dot, 0}");
    }
    if mult.theta.data.iter().any(|&v| v < -1e-9) {
        failed.push("theta >= 0");
    }
    let totals_ok = (0..inst.n_links()).all(|l| {
        let a = sol.flow.y.integrate(&inst.grid, l);
        let b = out.cost.flow.y.integrate(&inst.grid, l);
        (a - b).abs() <= 1e-6 * (1.0 + b)
    });
    if !totals_ok {
        failed.push("cumulative link flow");
    }
    let gap = flow_gap(inst, cost, &sol.flow);
    let split = gap_breakdown(inst, cost, mult, &sol.flow).total();
    if (gap - split).abs() > 1e-9 * (1.0 + weighted_demand(out)) || gap.abs() > 1e-5 {
        failed.push("zero-objective identity");
    }
    let curves = out.curves.as_ref().ok_or_else(|| anyhow::anyhow!("no curves"))?;
    let fifo = curves.links.iter().all(|c| {
        [&c.entry_time, &c.bottleneck_exit_time, &c.exit_time]
            .iter()
            .all(|s| s.windows(2).all(|p| p[1] >= p[0] - 1e-9))
    });
    if !fifo {
        failed.push("FIFO");
    }
    let dt = inst.grid.dt;
    let d_slope = inst.network.links.iter().enumerate().all(|(l, link)| {
        let c = &curves.links[l];
        (1..inst.k() - 1).all(|t| {
            if cost.w.get(l, t) <= thr || cost.w.get(l, t - 1) <= thr {
                return true;
            }
            let slope = (c.cumulative[t] - c.cumulative[t - 1]) / (c.bottleneck_exit_time[t] - c.bottleneck_exit_time[t - 1]);
            (slope - link.capacity).abs() <= 2.0 / dt
        })
    });
    if !d_slope {
        failed.push("D slope");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let solver = out.config.solve_options().simplex();
    let mut agree = 0;
    let cases = 120;
    for _ in 0..cases {
        let p = random_lp(&mut rng);
        let a = solver.solve(&p)?;
        let b = enumerate_vertices_oracle(&p)?;
        let same = a.status == b.status && (!a.is_optimal() || (a.objective - b.objective).abs() <= 1e-9 * (1.0 + b.objective.abs()));
        agree += same as usize;
    }
    if agree < cases {
        failed.push("LP vs oracle");
    }
    Ok(Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("all property checks pass on braess; LP oracle agreement {agree}/{cases}")
        } else {
            format!("failed: {}; LP oracle agreement {agree}/{cases}", failed.join(", "))
        },
    })
}

fn dso(out: &PipelineOutput) -> Outcome {
    match &out.summary.dso {
        None => Outcome { pass: false, detail: "DSO did not run".into() },
        Some(d) => {
            let c = &d.comparison;
            let gap = d.pareto.revenue_gap();
            Outcome {
                pass: c.applicable && c.pricing_deviation <= 1e-6 && d.pareto.max_rho_gap() <= 1e-6 && gap <= 1e-4,
                detail: format!(
                    "|p - w|={:.3e} rho gap={:.3e} revenue={:.4} queue cost={:.4} relative gap={gap:.3e}",
                    c.pricing_deviation,
                    d.pareto.max_rho_gap(),
                    d.pareto.toll_revenue,
                    d.pareto.due_queue_cost
                ),
            }
        }
    }
}

fn kappa() -> anyhow::Result<Outcome> {
    let cfg = config("nguyen_nogqrp.json")?;
    let inst = build_instance(&cfg, None)?;
    let opts = cfg.solve_options();
    let spec = cfg.kappa.clone().unwrap_or_default();
    // two bisection steps are enough to land below 1; the CLI default refines further
    let res = kappa_search(&inst, &spec.grid, spec.mode, 2, &opts.simplex(), &opts)?;
    let monotone = res.margins_monotone(opts.support());
    let worst: Vec<String> = res
        .evaluations
        .iter()
        .map(|e| format!("{}:{:.3}", e.kappa, e.worst.map_or(f64::INFINITY, |m| m.margin)))
        .collect();
    Ok(Outcome {
        pass: res.kappa_star.is_some_and(|k| k < 1.0) && monotone,
        detail: format!(
            "kappa*={:?} per-cell monotone={monotone} decreasing cells={} worst margins [{}]",
            res.kappa_star,
            res.decreasing_cells,
            worst.join(", ")
        ),
    })
}

fn report(n: usize, name: &str, r: anyhow::Result<Outcome>) -> bool {
    let (pass, detail) = match r {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e:#}")),
    };
    println!("criterion {n} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() -> ExitCode {
    // cargo passes harness flags such as --list; only a plain run executes
    if std::env::args().skip(1).any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut ok = true;
    let braess_run = run("braess.json");
    match &braess_run {
        Ok((out, secs)) => ok &= report(1, "braess end-to-end", Ok(braess(out, *secs))),
        Err(e) => ok &= report(1, "braess end-to-end", Err(anyhow::anyhow!("{e:#}"))),
    }
    ok &= report(2, "single bottleneck closed form", single_link());
    ok &= report(3, "nguyen valid and no-GQRP", nguyen());
    ok &= report(4, "sioux falls", sioux_falls());
    match &braess_run {
        Ok((out, _)) => {
            ok &= report(5, "property suites", properties(out));
            ok &= report(6, "dso and pareto on braess", Ok(dso(out)));
        }
        Err(_) => {
            ok &= report(5, "property suites", Err(anyhow::anyhow!("braess run failed")));
            ok &= report(6, "dso and pareto on braess", Err(anyhow::anyhow!("braess run failed")));
        }
    }
    ok &= report(7, "kappa search", kappa());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
