use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use bolab::analysis::inequalities::{
    commutator_constant, commutator_sweep, gn_ratio, gn_sweep, hilbert_commutator_sweep,
    psi_besov_decay, smooth_bump,
};
use bolab::analysis::{
    assemble_h, constrained_gap, eigen_spectrum, gamma_from_kk, projection_kk, ClosedForm,
};
use bolab::harness::config::parse_list;
use bolab::harness::io::read_snapshot;
use bolab::harness::{
    run_experiment, run_sweep, run_verification_suite, ExperimentConfig, VerifyOptions,
};
use bolab::lyapunov::WeightConfig;
use bolab::modulation::decompose;
use bolab::soliton::{soliton_profile, SolitonParams, SolitonTrain};
use bolab::spectral::{derivative, Grid};

#[derive(Parser, Debug)]
#[command(name = "bolab", version, about = "Benjamin-Ono soliton-train laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one stability experiment.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an (alpha, L) grid of experiments; completed cells are skipped on rerun.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "0.005,0.01,0.02")]
        alphas: String,
        #[arg(long, default_value = "40,80,160")]
        ls: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a soliton train to a stored snapshot.
    Decompose {
        /// Either file of a snapshot pair (`.f64` samples or `.json` sidecar).
        #[arg(long)]
        snapshot: PathBuf,
        /// Initial guess for the speeds, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        speeds: String,
        /// Initial guess for the centers, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        centers: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spectrum and constrained gaps of D + c - 2Q_c(x - a).
    Spectrum {
        #[arg(long, default_value_t = 256.0)]
        domain_length: f64,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long, default_value_t = 0.0)]
        center: f64,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Identity checks across all modules.
    Verify {
        #[arg(long, default_value_t = 256.0)]
        domain_length: f64,
        /// Exit with status 1 if any check fails.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measured constants of the commutator, Besov and GN estimates.
    Inequalities {
        #[arg(long, default_value_t = 256.0)]
        domain_length: f64,
        #[arg(long, default_value_t = 2048)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// One flag per configuration key; flags override the file.
#[derive(Args, Debug)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    domain_length: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    speeds: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    centers: Option<String>,
    #[arg(long)]
    separation_margin: Option<String>,
    #[arg(long)]
    perturbation: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    bump_offset: Option<String>,
    #[arg(long)]
    bump_width: Option<String>,
    #[arg(long)]
    mode_wavenumber: Option<String>,
    #[arg(long)]
    noise_cutoff: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    t_end: Option<String>,
    #[arg(long)]
    dealias: Option<String>,
    #[arg(long)]
    record_every: Option<String>,
    #[arg(long)]
    safety: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long = "L", id = "L")]
    l: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    snapshot_every: Option<String>,
}

impl ConfigArgs {
    fn build(&self, seed: u64, out: &Path) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("domain_length", &self.domain_length),
            ("n", &self.n),
            ("speeds", &self.speeds),
            ("centers", &self.centers),
            ("separation_margin", &self.separation_margin),
            ("perturbation", &self.perturbation),
            ("alpha", &self.alpha),
            ("bump_offset", &self.bump_offset),
            ("bump_width", &self.bump_width),
            ("mode_wavenumber", &self.mode_wavenumber),
            ("noise_cutoff", &self.noise_cutoff),
            ("dt", &self.dt),
            ("t_end", &self.t_end),
            ("dealias", &self.dealias),
            ("record_every", &self.record_every),
            ("safety", &self.safety),
            ("gamma", &self.gamma),
            ("L", &self.l),
            ("tol", &self.tol),
            ("snapshot_every", &self.snapshot_every),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.seed = seed;
        cfg.output_dir = out.to_path_buf();
        Ok(cfg)
    }
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(path)
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn simulate(cfg: ExperimentConfig) -> Result<()> {
    let r = run_experiment(&cfg)?;
    println!("results in {}", cfg.output_dir.display());
    println!("config hash            {}", r.config_hash);
    println!("sup ||eps||_H1/2       {:.6e}  (envelope alpha + L^-theta0 = {:.6e})", r.sup_eps_h12, r.envelope);
    println!("sup max |dx/dt - c0|   {:.6e}", r.sup_center_rate_dev);
    println!("sup sum |c(t) - c(0)|  {:.6e}  (constant {:.3e})", r.sup_speed_dev, r.speed_constant);
    println!("local-mass ratio       {:.6e}", r.local_mass_ratio);
    println!("mass / energy drift    {:.3e} / {:.3e}", r.mass_drift, r.energy_drift);
    if let Some(t) = r.tracking_lost_at {
        println!("tracking lost at t = {t}: {}", r.tracking_lost_reason.unwrap_or_default());
    }
    if let Some(t) = r.blow_up_at {
        println!("blow-up at t = {t}");
    }
    println!("[{}] tracking", pass(r.flags.tracking_ok));
    println!("[{}] eps within envelope", pass(r.flags.eps_within_envelope));
    println!("[{}] local masses within bound", pass(r.flags.local_masses_within));
    println!("[{}] speeds within bound", pass(r.flags.speeds_within));
    Ok(())
}

fn sweep(cfg: ExperimentConfig, alphas: &str, ls: &str) -> Result<()> {
    let alphas = parse_list("alphas", alphas)?;
    let ls = parse_list("ls", ls)?;
    let out = cfg.output_dir.clone();
    let table = run_sweep(&cfg, &alphas, &ls, &out)?;
    print!("{}", table.to_csv());
    for row in table.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("cell alpha={} L={} failed: {}", row.alpha, row.l, row.error.as_deref().unwrap_or(""));
    }
    Ok(())
}

fn decompose_cmd(snapshot: &Path, speeds: &str, centers: &str, tol: f64, out: &Path) -> Result<()> {
    let (u, meta) = read_snapshot(snapshot)?;
    let guess = SolitonTrain::from_speeds_and_centers(
        &parse_list("speeds", speeds)?,
        &parse_list("centers", centers)?,
    )?;
    let fit = decompose(&u, &guess, tol)?;
    let value = json!({
        "t": meta.t,
        "speeds": fit.speeds,
        "centers": fit.centers,
        "ortho_defect": fit.ortho_defect,
        "eps_l2": fit.eps_l2(),
        "eps_h12": fit.eps_h12(),
        "defect_history": fit.defect_history,
    });
    let path = write_json(out, "decomposition.json", &value)?;
    println!("{}", serde_json::to_string_pretty(&value)?);
    println!("written to {}", path.display());
    Ok(())
}

fn spectrum(domain_length: f64, n: usize, c: f64, center: f64, count: usize, out: &Path) -> Result<()> {
    let grid = Grid::new(domain_length, n)?;
    let h = assemble_h(&grid, c, center)?;
    let rep = eigen_spectrum(&h, count.min(n))?;
    let qc = soliton_profile(&grid, &SolitonParams::new(c, center)?);
    let qx = derivative(&qc);
    let gap0 = constrained_gap(&h, &[qc.clone(), qx.clone()], 0.0)?;
    let gap_half = constrained_gap(&h, &[qc, qx.clone()], 0.5)?;
    let gap_no_q = constrained_gap(&h, &[qx], 0.0)?;
    let overlaps: Vec<serde_json::Value> = rep
        .overlaps
        .as_ref()
        .map(|o| {
            o.iter()
                .map(|row| {
                    json!({"phi_minus": row[0], "phi_zero": row[1], "phi_plus": row[2], "phi_one": row[3]})
                })
                .collect()
        })
        .unwrap_or_default();
    let value = json!({
        "operator": h.description(),
        "domain_length": domain_length,
        "n": n,
        "eigenvalues": rep.eigenvalues,
        "residuals": rep.residuals,
        "overlaps": overlaps,
        "measured_kk": rep.measured_kk,
        "closed_form_kk": projection_kk(),
        "gamma_from_measured_kk": rep.measured_kk.map(gamma_from_kk),
        "near_one_cluster_overlap": rep.cluster_overlap(ClosedForm::One, 0.9 * c, 1.1 * c),
        "gap_l2": gap0,
        "gap_h_half": gap_half,
        "gap_without_q": gap_no_q,
    });
    write_json(out, "spectrum.json", &value)?;
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn verify(domain_length: f64, strict: bool, out: &Path) -> Result<bool> {
    let opts = if domain_length == VerifyOptions::default().domain_length {
        VerifyOptions::default()
    } else {
        VerifyOptions::with_domain_length(domain_length)
    };
    let summary = run_verification_suite(&opts)?;
    write_json(out, "verification.json", &serde_json::to_value(&summary)?)?;
    for c in &summary.checks {
        println!(
            "[{}] {:<20} measured {:>14.6e}  expected {:>14.6e}  tol {:.1e}  margin {:+.3e}",
            pass(c.passed),
            c.name,
            c.measured,
            c.expected,
            c.tolerance,
            c.margin()
        );
    }
    println!("{} passed, {} failed", summary.passed, summary.failed);
    Ok(!strict || summary.all_passed())
}

fn inequalities(domain_length: f64, n: usize, samples: usize, seed: u64, out: &Path) -> Result<()> {
    let grid = Grid::new(domain_length, n)?;
    let q = soliton_profile(&grid, &SolitonParams::new(1.0, 0.0)?);
    let mut commutators = Vec::new();
    for w in [1.0, 4.0, 16.0] {
        let m = commutator_constant(&smooth_bump(&grid, 0.0, w), 8, seed)?;
        commutators.push(json!({"width": w, "ratio": m.ratio, "degenerate": m.degenerate}));
    }
    let big = Grid::new(1024.0, 16384)?;
    let wcfg = WeightConfig::new(0.8, 40.0, &[1.0, 2.0], &[-20.0, 21.0])?;
    let decay = psi_besov_decay(&big, &wcfg, 1, &[0.0, 1.0, 2.0, 4.0, 6.0, 9.0, 14.0])?;
    let value = json!({
        "domain_length": domain_length,
        "n": n,
        "seed": seed,
        "gn_ratio_Q": gn_ratio(&q)?,
        "gn_ratio_Q_expected": 5.0 / (2.0 * std::f64::consts::PI),
        "commutator_bumps": commutators,
        "commutator_sweep": commutator_sweep(&grid, samples, seed)?,
        "hilbert_commutator_sweep": hilbert_commutator_sweep(&grid, samples, seed)?,
        "gn_sweep": gn_sweep(&grid, samples, seed)?,
        "psi_besov_decay": decay,
    });
    write_json(out, "inequalities.json", &value)?;
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { config, seed, out } => simulate(config.build(seed, &out)?)?,
        Command::Sweep {
            config,
            alphas,
            ls,
            seed,
            out,
        } => sweep(config.build(seed, &out)?, &alphas, &ls)?,
        Command::Decompose {
            snapshot,
            speeds,
            centers,
            tol,
            out,
        } => decompose_cmd(&snapshot, &speeds, &centers, tol, &out)?,
        Command::Spectrum {
            domain_length,
            n,
            speed,
            center,
            count,
            out,
        } => spectrum(domain_length, n, speed, center, count, &out)?,
        Command::Verify {
            domain_length,
            strict,
            out,
        } => return verify(domain_length, strict, &out),
        Command::Inequalities {
            domain_length,
            n,
            samples,
            seed,
            out,
        } => inequalities(domain_length, n, samples, seed, &out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
