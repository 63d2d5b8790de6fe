//! Result files: JSON reports, wide CSV series and per-link curves.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use gqrp_due::cost_step::{build_cost_dual, build_cost_primal};
use gqrp_due::flow_step::build_flow_lp;
use gqrp_due::lp::{write_mps, LpProblem};
use gqrp_due::verify::LinkCurves;
use gqrp_due::{Instance, SeriesSet};
use serde::{Deserialize, Serialize};

use crate::pipeline::PipelineOutput;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    /// Data rows for CSV files, lines for the rest.
    pub rows: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn contains(&self, path: &str) -> bool {
        self.files.iter().any(|f| f.path == path)
    }
}

/// Twelve significant digits, shortest round-trip form.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{r}")
}

struct Writer<'a> {
    root: &'a Path,
    manifest: Manifest,
}

impl Writer<'_> {
    fn record(&mut self, rel: &str, rows: usize) {
        self.manifest.files.push(ManifestEntry {
            path: rel.to_string(),
            rows,
        });
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        let path = self.root.join(rel);
        fs::write(&path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))?;
        self.record(rel, text.lines().count());
        Ok(())
    }

    fn csv(&mut self, rel: &str, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> anyhow::Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        let mut n = 0;
        for r in rows {
            w.write_record(&r)?;
            n += 1;
        }
        w.flush()?;
        self.record(rel, n);
        Ok(())
    }

    fn series(&mut self, rel: &str, inst: &Instance, s: &SeriesSet, prefix: &str, ids: &[u64]) -> anyhow::Result<()> {
        let mut header = vec!["time".to_string()];
        header.extend(ids.iter().map(|id| format!("{prefix}_{id}")));
        let rows = (0..inst.k()).map(|t| {
            let mut r = vec![fmt12(inst.grid.time(t))];
            r.extend((0..s.entities()).map(|e| fmt12(s.get(e, t))));
            r
        });
        self.csv(rel, &header, rows)
    }

    fn curve(&mut self, rel: &str, c: &LinkCurves) -> anyhow::Result<()> {
        let header: Vec<String> = ["physical_time", "cumulative_arrivals", "cumulative_departures"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows = c.events().into_iter().map(|(u, a, d)| vec![fmt12(u), fmt12(a), fmt12(d)]);
        self.csv(rel, &header, rows)
    }

    fn mps(&mut self, rel: &str, p: &LpProblem) -> anyhow::Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut buf = Vec::new();
        write_mps(p, &mut buf)?;
        fs::File::create(&path)?.write_all(&buf)?;
        self.record(rel, buf.iter().filter(|&&b| b == b'\n').count());
        Ok(())
    }
}

#[derive(Serialize)]
struct VerdictFile<'a> {
    holds: bool,
    objective: f64,
    route: gqrp_due::FlowRoute,
    breakdown: &'a gqrp_due::flow_step::GapBreakdown,
    sufficient_condition: bool,
    infeasible: bool,
}

pub fn export_results(out: &PipelineOutput, dir: &Path, export_mps: bool) -> anyhow::Result<Manifest> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = Writer {
        root: dir,
        manifest: Manifest::default(),
    };
    let inst = &out.instance;
    let link_ids: Vec<u64> = inst.network.links.iter().map(|l| l.id).collect();
    let origin_ids = inst.network.origin_ids().to_vec();

    w.json("summary.json", &out.summary)?;
    w.json("residuals.json", &out.residuals)?;
    let v = &out.flow.verdict;
    w.json(
        "verdict.json",
        &VerdictFile {
            holds: v.holds,
            objective: v.flow_lp_objective,
            route: v.route,
            breakdown: &v.breakdown,
            sufficient_condition: v.sufficient_condition,
            infeasible: v.infeasible,
        },
    )?;
    w.series("w.csv", inst, &out.cost.cost.w, "link", &link_ids)?;
    w.series("pi.csv", inst, &out.cost.cost.pi, "node", &origin_ids)?;
    if let Some(sol) = &out.solution {
        w.series("q.csv", inst, &sol.flow.q, "node", &origin_ids)?;
        w.series("y.csv", inst, &sol.flow.y, "link", &link_ids)?;
    }
    if let Some(d) = &out.dso {
        w.series("p.csv", inst, &d.pricing, "link", &link_ids)?;
    }
    if let Some(curves) = &out.curves {
        for c in &curves.links {
            w.curve(&format!("curves/link_{}.csv", c.link_id), c)?;
        }
    }
    if export_mps {
        w.mps("mps/cost_primal.mps", &build_cost_primal(inst)?)?;
        w.mps("mps/cost_dual.mps", &build_cost_dual(inst)?)?;
        let opts = out.config.solve_options();
        w.mps("mps/flow.mps", &build_flow_lp(inst, &out.cost.cost, &out.flow.multipliers, &opts)?)?;
    }
    let mut manifest = w.manifest;
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), format!("{text}\n"))?;
    manifest.files.push(ManifestEntry {
        path: "manifest.json".into(),
        rows: text.lines().count(),
    });
    Ok(manifest)
}

pub fn default_out_dir(cfg_out: Option<&PathBuf>, name: &str) -> PathBuf {
    cfg_out.cloned().unwrap_or_else(|| PathBuf::from("out").join(name))
}
