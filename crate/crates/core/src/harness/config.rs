//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored; list values are comma separated.
//! Unknown and repeated keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::EvolutionConfig;
use crate::soliton::SolitonTrain;
use crate::spectral::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    None,
    Bump,
    Mode,
    SeededNoise,
}

impl PerturbationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::None => "none",
            PerturbationKind::Bump => "bump",
            PerturbationKind::Mode => "mode",
            PerturbationKind::SeededNoise => "seeded-noise",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PerturbationKind::None),
            "bump" => Ok(PerturbationKind::Bump),
            "mode" => Ok(PerturbationKind::Mode),
            "seeded-noise" => Ok(PerturbationKind::SeededNoise),
            other => Err(Error::Config(format!(
                "unknown perturbation '{other}' (expected none, bump, mode or seeded-noise)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain_length: f64,
    pub n: usize,
    pub speeds: Vec<f64>,
    /// Explicit initial centers; when absent they are spaced `L + separation_margin`
    /// apart and shifted so the run stays centered in the box.
    pub centers: Option<Vec<f64>>,
    pub separation_margin: f64,
    pub perturbation: PerturbationKind,
    pub alpha: f64,
    pub seed: u64,
    /// Bump center relative to the first soliton.
    pub bump_offset: f64,
    pub bump_width: f64,
    pub mode_wavenumber: f64,
    pub noise_cutoff: f64,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    pub record_every: usize,
    pub safety: f64,
    pub gamma: f64,
    pub l: f64,
    pub tol: f64,
    /// Write a field snapshot every this many records; 0 keeps only the first and last.
    pub snapshot_every: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain_length: 512.0,
            n: 8192,
            speeds: vec![1.0, 2.0],
            centers: None,
            separation_margin: 1.0,
            perturbation: PerturbationKind::Bump,
            alpha: 0.01,
            seed: 0,
            bump_offset: -6.0,
            bump_width: 2.0,
            mode_wavenumber: 0.5,
            noise_cutoff: 2.0,
            dt: 0.00125,
            t_end: 50.0,
            dealias: true,
            record_every: 400,
            safety: 0.5,
            gamma: 0.8,
            l: 40.0,
            tol: 1e-10,
            snapshot_every: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Keys in canonical order.
pub const KEYS: &[&str] = &[
    "domain_length",
    "n",
    "speeds",
    "centers",
    "separation_margin",
    "perturbation",
    "alpha",
    "seed",
    "bump_offset",
    "bump_width",
    "mode_wavenumber",
    "noise_cutoff",
    "dt",
    "t_end",
    "dealias",
    "record_every",
    "safety",
    "gamma",
    "L",
    "tol",
    "snapshot_every",
    "output_dir",
];

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("{key}: '{v}' is not finite")));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: '{v}' is not a non-negative integer")))
}

pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "domain_length" => self.domain_length = parse_f64(key, v)?,
            "n" => self.n = parse_usize(key, v)?,
            "speeds" => self.speeds = parse_list(key, v)?,
            "centers" => {
                self.centers = if v.is_empty() || v == "auto" {
                    None
                } else {
                    Some(parse_list(key, v)?)
                }
            }
            "separation_margin" => self.separation_margin = parse_f64(key, v)?,
            "perturbation" => self.perturbation = PerturbationKind::parse(v)?,
            "alpha" => self.alpha = parse_f64(key, v)?,
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| Error::Config(format!("seed: '{v}' is not an unsigned integer")))?
            }
            "bump_offset" => self.bump_offset = parse_f64(key, v)?,
            "bump_width" => self.bump_width = parse_f64(key, v)?,
            "mode_wavenumber" => self.mode_wavenumber = parse_f64(key, v)?,
            "noise_cutoff" => self.noise_cutoff = parse_f64(key, v)?,
            "dt" => self.dt = parse_f64(key, v)?,
            "t_end" => self.t_end = parse_f64(key, v)?,
            "dealias" => {
                self.dealias = match v {
                    "true" => true,
                    "false" => false,
                    _ => return Err(Error::Config(format!("dealias: '{v}' is not true/false"))),
                }
            }
            "record_every" => self.record_every = parse_usize(key, v)?,
            "safety" => self.safety = parse_f64(key, v)?,
            "gamma" => self.gamma = parse_f64(key, v)?,
            "L" => self.l = parse_f64(key, v)?,
            "tol" => self.tol = parse_f64(key, v)?,
            "snapshot_every" => self.snapshot_every = parse_usize(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Defaults overridden by the text's entries.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every key in canonical order, one per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let _ = writeln!(s, "{key} = {}", self.value_text(key));
        }
        s
    }

    fn value_text(&self, key: &str) -> String {
        match key {
            "domain_length" => self.domain_length.to_string(),
            "n" => self.n.to_string(),
            "speeds" => fmt_list(&self.speeds),
            "centers" => self.centers.as_deref().map_or("auto".into(), fmt_list),
            "separation_margin" => self.separation_margin.to_string(),
            "perturbation" => self.perturbation.as_str().into(),
            "alpha" => self.alpha.to_string(),
            "seed" => self.seed.to_string(),
            "bump_offset" => self.bump_offset.to_string(),
            "bump_width" => self.bump_width.to_string(),
            "mode_wavenumber" => self.mode_wavenumber.to_string(),
            "noise_cutoff" => self.noise_cutoff.to_string(),
            "dt" => self.dt.to_string(),
            "t_end" => self.t_end.to_string(),
            "dealias" => self.dealias.to_string(),
            "record_every" => self.record_every.to_string(),
            "safety" => self.safety.to_string(),
            "gamma" => self.gamma.to_string(),
            "L" => self.l.to_string(),
            "tol" => self.tol.to_string(),
            "snapshot_every" => self.snapshot_every.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// SHA-256 of the canonical text without `output_dir`, so relocating a run
    /// does not change its identity.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for key in KEYS.iter().filter(|k| **k != "output_dir") {
            h.update(format!("{key} = {}\n", self.value_text(key)).as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain_length, self.n).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn evolution(&self) -> EvolutionConfig {
        EvolutionConfig {
            dt: self.dt,
            t_end: self.t_end,
            dealias: self.dealias,
            record_every: self.record_every,
            safety: self.safety,
        }
    }

    /// Initial centers, explicit or derived.
    pub fn initial_centers(&self) -> Vec<f64> {
        if let Some(c) = &self.centers {
            return c.clone();
        }
        let k = self.speeds.len();
        let gap = self.l + self.separation_margin;
        let offsets: Vec<f64> = (0..k).map(|j| j as f64 * gap).collect();
        let last_speed = self.speeds.last().copied().unwrap_or(0.0);
        let shift = 0.5 * (offsets[k - 1] + last_speed * self.t_end);
        offsets.into_iter().map(|x| x - shift).collect()
    }

    pub fn train(&self) -> Result<SolitonTrain> {
        SolitonTrain::from_speeds_and_centers(&self.speeds, &self.initial_centers())
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Distance kept between every soliton and the box edge over the whole run.
    pub fn edge_margin(&self) -> f64 {
        self.domain_length / 16.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let grid = self.grid()?;
        if self.speeds.is_empty() {
            return bad("speeds must list at least one soliton".into());
        }
        if let Some(c) = &self.centers {
            if c.len() != self.speeds.len() {
                return bad(format!(
                    "{} centers for {} speeds",
                    c.len(),
                    self.speeds.len()
                ));
            }
        }
        self.train()?;
        if !(self.l > 0.0) {
            return bad(format!("L must be > 0, got {}", self.l));
        }
        let centers = self.initial_centers();
        for w in centers.windows(2) {
            if !(w[1] - w[0] > self.l) {
                return bad(format!(
                    "centers {} and {} are not more than L = {} apart",
                    w[0], w[1], self.l
                ));
            }
        }
        if !(self.alpha >= 0.0) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.gamma > 2.0 / 3.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (2/3, 1), got {}", self.gamma));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be > 0, got {}", self.tol));
        }
        if self.perturbation == PerturbationKind::Bump && !(self.bump_width > 0.0) {
            return bad("bump_width must be > 0".into());
        }
        if self.perturbation == PerturbationKind::Mode && !(self.mode_wavenumber > 0.0) {
            return bad("mode_wavenumber must be > 0".into());
        }
        if self.perturbation == PerturbationKind::SeededNoise && !(self.noise_cutoff > 0.0) {
            return bad("noise_cutoff must be > 0".into());
        }
        self.evolution()
            .validate(&grid)
            .map_err(|e| Error::Config(e.to_string()))?;
        let half = 0.5 * self.domain_length - self.edge_margin();
        for (&c, &x) in self.speeds.iter().zip(&centers) {
            let end = x + c * self.t_end;
            if x < -half || end > half {
                return bad(format!(
                    "soliton starting at {x} with speed {c} leaves [{}, {}] before t_end",
                    -half, half
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_centered() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let c = cfg.initial_centers();
        assert_eq!(c, vec![-70.5, -29.5]);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("centers", "-80, -30").unwrap();
        cfg.set("perturbation", "seeded-noise").unwrap();
        let back = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(matches!(
            ExperimentConfig::parse("alpah = 0.1"),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::parse("alpha = 0.1\nalpha = 0.2").is_err());
        assert!(ExperimentConfig::parse("alpha 0.1").is_err());
        assert!(ExperimentConfig::parse("dealias = yes").is_err());
        let ok = ExperimentConfig::parse("# comment\n\nalpha = 0.02  # trailing\n").unwrap();
        assert_eq!(ok.alpha, 0.02);
    }

    #[test]
    fn rejects_crowded_or_escaping_trains() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("centers", "-70, -40").unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.set("t_end", "400").unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.set("alpha", "-1").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.alpha = 0.02;
        assert_ne!(a.hash(), b.hash());
    }
}
