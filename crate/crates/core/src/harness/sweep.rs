use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{execute, write_run, StabilityReport};
use super::io::Manifest;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub l: f64,
    pub dir: PathBuf,
    /// Loaded from a previous complete run instead of recomputed.
    pub resumed: bool,
    pub report: Option<StabilityReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn get(&self, alpha: f64, l: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.alpha == alpha && r.l == l)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "alpha,L,status,sup_eps_h12,eps_ratio,sup_center_rate_dev,sup_speed_dev,speed_constant,local_mass_ratio,tracking_ok\n",
        );
        for r in &self.rows {
            match &r.report {
                Some(rep) => {
                    let _ = writeln!(
                        s,
                        "{},{},ok,{},{},{},{},{},{},{}",
                        r.alpha,
                        r.l,
                        rep.sup_eps_h12,
                        rep.eps_ratio,
                        rep.sup_center_rate_dev,
                        rep.sup_speed_dev,
                        rep.speed_constant,
                        rep.local_mass_ratio,
                        rep.flags.tracking_ok
                    );
                }
                None => {
                    let _ = writeln!(s, "{},{},failed,,,,,,,false", r.alpha, r.l);
                }
            }
        }
        s
    }
}

/// Cell directory name, stable across runs.
pub fn cell_name(alpha: f64, l: f64) -> String {
    format!("alpha_{alpha}_L_{l}")
}

/// Config of one cell: the base with `alpha` and `L` replaced and centers re-derived.
pub fn cell_config(base: &ExperimentConfig, alpha: f64, l: f64, dir: &Path) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.alpha = alpha;
    cfg.l = l;
    cfg.centers = None;
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn completed(dir: &Path, cfg: &ExperimentConfig) -> Option<StabilityReport> {
    let manifest = Manifest::read(dir).ok()?;
    if manifest.header.get("config_hash") != Some(&cfg.hash()) || !manifest.verify(dir) {
        return None;
    }
    let text = fs::read_to_string(dir.join("report.json")).ok()?;
    serde_json::from_str(&text).ok()
}

/// Runs every `(alpha, L)` cell in parallel under `out/`. Cells whose directory
/// already holds a verified run of the same configuration are skipped; failed
/// cells are recorded and the sweep continues.
pub fn run_sweep(
    base: &ExperimentConfig,
    alphas: &[f64],
    ls: &[f64],
    out: &Path,
) -> Result<SweepTable> {
    fs::create_dir_all(out)?;
    let cells: Vec<(f64, f64)> = ls
        .iter()
        .flat_map(|&l| alphas.iter().map(move |&a| (a, l)))
        .collect();
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(alpha, l)| {
            let rel = PathBuf::from(cell_name(alpha, l));
            let dir = out.join(&rel);
            let cfg = cell_config(base, alpha, l, &dir);
            if let Some(report) = completed(&dir, &cfg) {
                return SweepRow {
                    alpha,
                    l,
                    dir: rel,
                    resumed: true,
                    report: Some(report),
                    error: None,
                };
            }
            let result = execute(&cfg).and_then(|run| {
                write_run(&run, &cfg, &dir)?;
                Ok(run.report)
            });
            match result {
                Ok(report) => SweepRow {
                    alpha,
                    l,
                    dir: rel,
                    resumed: false,
                    report: Some(report),
                    error: None,
                },
                Err(e) => SweepRow {
                    alpha,
                    l,
                    dir: rel,
                    resumed: false,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let table = SweepTable { rows };

    fs::write(out.join("sweep.csv"), table.to_csv())?;
    let mut header = BTreeMap::new();
    header.insert("base_config_hash".to_string(), base.hash());
    header.insert("kind".to_string(), "sweep".to_string());
    header.insert("seed".to_string(), base.seed.to_string());
    header.insert("version".to_string(), env!("CARGO_PKG_VERSION").to_string());
    let mut files = vec![PathBuf::from("sweep.csv")];
    for row in &table.rows {
        if let Ok(m) = Manifest::read(&out.join(&row.dir)) {
            files.extend(m.files.keys().map(|f| row.dir.join(f)));
            files.push(row.dir.join(super::io::MANIFEST));
        }
    }
    Manifest::write(out, header, &files)?;
    Ok(table)
}
