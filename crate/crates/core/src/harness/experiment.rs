use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PerturbationKind};
use super::io::{write_snapshot, Manifest};
use crate::analysis::inequalities::{random_band_limited, smooth_bump, trial_rng};
use crate::error::{Error, Result};
use crate::evolution::{evolve, Trajectory};
use crate::lyapunov::{
    bound_scale, energy_decomposition_residual, local_mass, lyapunov_weights, monotonicity_report,
    theta0, MonotonicityReport, WeightConfig,
};
use crate::modulation::{track_with, ModulationSeries, ModulationState, TrackOptions};
use crate::soliton::{soliton_sum, SolitonTrain};
use crate::spectral::{sobolev_norm, Grid, RealField};

/// Accepted empirical factor in front of every measured envelope.
pub const EMPIRICAL_CONSTANT: f64 = 10.0;

/// Perturbation with `||p||_{H^{1/2}} = alpha`.
pub fn perturbation(cfg: &ExperimentConfig, grid: &Grid, train: &SolitonTrain) -> Result<RealField> {
    if cfg.alpha == 0.0 || cfg.perturbation == PerturbationKind::None {
        return Ok(RealField::zeros(grid));
    }
    let shape = match cfg.perturbation {
        PerturbationKind::None => unreachable!(),
        PerturbationKind::Bump => {
            let center = train.params()[0].center() + cfg.bump_offset;
            smooth_bump(grid, center, 0.5 * cfg.bump_width)
        }
        PerturbationKind::Mode => {
            let dk = grid.fundamental();
            let xi = (cfg.mode_wavenumber / dk).round().max(1.0) * dk;
            RealField::from_fn(grid, |x| (xi * x).cos())?
        }
        PerturbationKind::SeededNoise => {
            random_band_limited(grid, cfg.noise_cutoff, &mut trial_rng(cfg.seed, 0))
        }
    };
    let norm = sobolev_norm(&shape, 0.5)?;
    if norm == 0.0 {
        return Err(Error::Config("perturbation shape vanishes on the grid".into()));
    }
    shape.scale(cfg.alpha / norm)
}

/// `u_0 = sum_k Q_{c_k}(x - x_k) + p`.
pub fn initial_data(cfg: &ExperimentConfig) -> Result<RealField> {
    let grid = cfg.grid()?;
    let train = cfg.train()?;
    soliton_sum(&grid, &train).add(&perturbation(cfg, &grid, &train)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaFlags {
    pub tracking_ok: bool,
    /// `sup ||eps||_{H^{1/2}} <= C (alpha + L^{-theta0})`.
    pub eps_within_envelope: bool,
    /// `max_k sup (I_k(t) - I_k(0)) <= C (L^{1/gamma-3/2} + L^{1-1/gamma} sup ||eps||^2)`.
    pub local_masses_within: bool,
    /// `sum_k |c_k(t) - c_k(0)| <= C g(t)` at every tracked time.
    pub speeds_within: bool,
}

impl CriteriaFlags {
    pub fn all(&self) -> bool {
        self.tracking_ok && self.eps_within_envelope && self.local_masses_within && self.speeds_within
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub solitons: usize,
    pub alpha: f64,
    pub l: f64,
    pub gamma: f64,
    pub theta0: f64,
    /// `alpha + L^{-theta0}`.
    pub envelope: f64,
    /// `||p||_{H^{1/2}}` of the perturbation actually applied.
    pub perturbation_h12: f64,
    pub eps0_h12: f64,
    pub sup_eps_h12: f64,
    pub sup_eps_l2: f64,
    pub eps_ratio: f64,
    /// `sup_t max_k |dx_k/dt - c_k^0|`.
    pub sup_center_rate_dev: f64,
    /// `sup_t sum_k |c_k(t) - c_k(0)|`.
    pub sup_speed_dev: f64,
    /// `sup_t sum_k |c_k(t) - c_k(0)| / g(t)`.
    pub speed_constant: f64,
    pub max_local_mass_increase: Vec<f64>,
    pub local_mass_envelope: f64,
    pub local_mass_ratio: f64,
    pub g_drift: f64,
    pub max_energy_decomposition_residual: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub t_final: f64,
    pub tracking_lost_at: Option<f64>,
    pub tracking_lost_reason: Option<String>,
    pub blow_up_at: Option<f64>,
    pub regime_exit: Option<f64>,
    pub flags: CriteriaFlags,
    pub output_dir: PathBuf,
}

/// Everything computed by one experiment, before anything is written.
#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub report: StabilityReport,
    pub trajectory: Trajectory,
    pub series: ModulationSeries,
    pub monotonicity: Option<MonotonicityReport>,
    pub weights: WeightConfig,
}

fn empty_series(reason: String) -> ModulationSeries {
    ModulationSeries {
        times: vec![],
        speeds: vec![],
        centers: vec![],
        eps_l2: vec![],
        eps_h12: vec![],
        ortho_defects: vec![],
        center_rates: vec![],
        speed_rates: vec![],
        lost_at: Some(0.0),
        lost_reason: Some(reason),
        regime_exit: None,
    }
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

/// Builds the data, evolves, tracks and measures without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let train = cfg.train()?;
    let pert = perturbation(cfg, &grid, &train)?;
    let u0 = soliton_sum(&grid, &train).add(&pert)?;
    let weights = WeightConfig::new(cfg.gamma, cfg.l, &train.speeds(), &train.centers())?;

    let (trajectory, blow_up_at) = match evolve(&u0, &cfg.evolution()) {
        Ok(t) => (t, None),
        Err(Error::BlowUp { time, partial, .. }) => {
            let traj = partial.map(|b| *b).ok_or_else(|| {
                Error::Numerical(format!("blow-up at t = {time} before anything was recorded"))
            })?;
            (traj, Some(time))
        }
        Err(e) => return Err(e),
    };

    let opts = TrackOptions {
        tol: cfg.tol,
        min_separation: Some(0.5 * cfg.l),
        regime_radius: (cfg.alpha > 0.0).then(|| cfg.alpha.sqrt()),
    };
    let series = match track_with(&trajectory, &train, &opts) {
        Ok(s) => s,
        Err(e) => empty_series(e.to_string()),
    };
    let monotonicity = if series.is_empty() {
        None
    } else {
        Some(monotonicity_report(&trajectory, &series, &weights)?)
    };

    let c0 = train.speeds();
    let gamma = cfg.gamma;
    let th0 = theta0(gamma);
    let envelope = cfg.alpha + cfg.l.powf(-th0);
    let sup_eps_h12 = max_of(series.eps_h12.iter().copied());
    let sup_eps_l2 = max_of(series.eps_l2.iter().copied());
    let eps0_h12 = series.eps_h12.first().copied().unwrap_or(f64::NAN);
    let sup_center_rate_dev = max_of(
        series
            .center_rates
            .iter()
            .flat_map(|r| r.iter().zip(&c0).map(|(a, c)| (a - c).abs())),
    );

    let fitted0 = series.speeds.first().cloned().unwrap_or_else(|| c0.clone());
    let mut sup_speed_dev = 0.0_f64;
    let mut speed_constant = 0.0_f64;
    let mut running_l2_sq = 0.0_f64;
    let scale = bound_scale(gamma, cfg.l);
    for i in 0..series.len() {
        running_l2_sq = running_l2_sq.max(series.eps_l2[i].powi(2));
        let dev: f64 = series.speeds[i]
            .iter()
            .zip(&fitted0)
            .map(|(a, b)| (a - b).abs())
            .sum();
        let g = scale
            + cfg.l.powf(1.0 - 1.0 / gamma) * running_l2_sq
            + series.eps_h12[i].powi(2)
            + eps0_h12.powi(2);
        sup_speed_dev = sup_speed_dev.max(dev);
        speed_constant = speed_constant.max(dev / g);
    }

    let mut max_residual = 0.0_f64;
    for i in 0..series.len() {
        let t = series.times[i];
        let fitted = SolitonTrain::from_speeds_and_centers(&series.speeds[i], &series.centers[i])?;
        let u = &trajectory.snapshots[i];
        let fit = ModulationState {
            speeds: series.speeds[i].clone(),
            centers: series.centers[i].clone(),
            residual: u.sub(&soliton_sum(&grid, &fitted))?,
            ortho_defect: series.ortho_defects[i],
            defect_history: vec![],
        };
        max_residual = max_residual.max(energy_decomposition_residual(u, &fit, t, &weights, &fitted0)?);
    }

    let (max_increase, local_mass_envelope, local_mass_ratio, g_drift) = match &monotonicity {
        Some(m) => (m.max_increase.clone(), m.envelope, m.ratio, m.g_drift),
        None => (vec![], f64::NAN, f64::NAN, f64::NAN),
    };

    let tracking_ok = series.tracking_ok() && blow_up_at.is_none();
    let flags = CriteriaFlags {
        tracking_ok,
        eps_within_envelope: tracking_ok && sup_eps_h12 <= EMPIRICAL_CONSTANT * envelope,
        local_masses_within: tracking_ok && local_mass_ratio <= EMPIRICAL_CONSTANT,
        speeds_within: tracking_ok && speed_constant <= EMPIRICAL_CONSTANT,
    };

    let report = StabilityReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        solitons: train.len(),
        alpha: cfg.alpha,
        l: cfg.l,
        gamma,
        theta0: th0,
        envelope,
        perturbation_h12: sobolev_norm(&pert, 0.5)?,
        eps0_h12,
        sup_eps_h12,
        sup_eps_l2,
        eps_ratio: sup_eps_h12 / envelope,
        sup_center_rate_dev,
        sup_speed_dev,
        speed_constant,
        max_local_mass_increase: max_increase,
        local_mass_envelope,
        local_mass_ratio,
        g_drift,
        max_energy_decomposition_residual: max_residual,
        mass_drift: trajectory.mass_drift(),
        energy_drift: trajectory.energy_drift(),
        t_final: trajectory.times.last().copied().unwrap_or(0.0),
        tracking_lost_at: series.lost_at,
        tracking_lost_reason: series.lost_reason.clone(),
        blow_up_at,
        regime_exit: series.regime_exit,
        flags,
        output_dir: cfg.output_dir.clone(),
    };
    Ok(ExperimentRun {
        report,
        trajectory,
        series,
        monotonicity,
        weights,
    })
}

/// Header of the time-series CSV for `k` solitons.
pub fn csv_header(k: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=k).map(|j| format!("c_{j}")));
    cols.extend((1..=k).map(|j| format!("x_{j}")));
    cols.extend(["eps_l2", "eps_h12", "N", "E"].map(String::from));
    cols.extend((1..=k).map(|j| format!("I_{j}")));
    cols.extend(["G", "tracking_ok"].map(String::from));
    cols.join(",")
}

pub fn timeseries_csv(run: &ExperimentRun) -> Result<String> {
    let k = run.weights.len();
    let series = &run.series;
    let d = lyapunov_weights(series.speeds.first().map_or(&[][..], |v| v));
    let d = if d.is_empty() { vec![f64::NAN; k] } else { d };
    let mut out = csv_header(k);
    out.push('\n');
    let traj = &run.trajectory;
    for i in 0..traj.len() {
        let t = traj.times[i];
        let u = &traj.snapshots[i];
        let mut row: Vec<String> = vec![t.to_string()];
        let tracked = i < series.len();
        for j in 0..k {
            row.push(if tracked { series.speeds[i][j].to_string() } else { String::new() });
        }
        for j in 0..k {
            row.push(if tracked { series.centers[i][j].to_string() } else { String::new() });
        }
        row.push(if tracked { series.eps_l2[i].to_string() } else { String::new() });
        row.push(if tracked { series.eps_h12[i].to_string() } else { String::new() });
        let diag = traj.diagnostics[i];
        row.push(diag.mass.to_string());
        row.push(diag.energy.to_string());
        let mut g = diag.energy;
        for (j, dj) in d.iter().enumerate() {
            let ij = local_mass(u, j, t, &run.weights)?;
            g += dj * ij;
            row.push(ij.to_string());
        }
        row.push(g.to_string());
        row.push(tracked.to_string());
        let _ = writeln!(out, "{}", row.join(","));
    }
    Ok(out)
}

/// Writes config, CSV, report, snapshots and manifest into `dir`.
pub fn write_run(run: &ExperimentRun, cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut files = vec![];
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    files.push(PathBuf::from("config.txt"));
    fs::write(dir.join("timeseries.csv"), timeseries_csv(run)?)?;
    files.push(PathBuf::from("timeseries.csv"));
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&run.report)? + "\n",
    )?;
    files.push(PathBuf::from("report.json"));
    if let Some(m) = &run.monotonicity {
        fs::write(dir.join("monotonicity.json"), serde_json::to_string_pretty(m)? + "\n")?;
        files.push(PathBuf::from("monotonicity.json"));
    }
    fs::write(
        dir.join("modulation.json"),
        serde_json::to_string_pretty(&run.series)? + "\n",
    )?;
    files.push(PathBuf::from("modulation.json"));

    let traj = &run.trajectory;
    let last = traj.len().saturating_sub(1);
    let snap_dir = dir.join("snapshots");
    for i in 0..traj.len() {
        let keep = i == 0
            || i == last
            || (cfg.snapshot_every > 0 && i % cfg.snapshot_every == 0);
        if keep {
            let stem = format!("u_{i:06}");
            for name in write_snapshot(&snap_dir, &stem, &traj.snapshots[i], traj.times[i])? {
                files.push(Path::new("snapshots").join(name));
            }
        }
    }

    let mut header = BTreeMap::new();
    header.insert("config_hash".to_string(), run.report.config_hash.clone());
    header.insert("kind".to_string(), "experiment".to_string());
    header.insert("seed".to_string(), cfg.seed.to_string());
    header.insert("version".to_string(), run.report.version.clone());
    Manifest::write(dir, header, &files)
}

/// Runs one experiment and persists it under `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<StabilityReport> {
    let run = execute(cfg)?;
    write_run(&run, cfg, &cfg.output_dir)?;
    Ok(run.report)
}
