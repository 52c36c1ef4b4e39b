//! Integrating-factor RK4 for `u_t = (D u - u^2)_x` on the periodic grid.
//!
//! In Fourier space `u_hat_t = L u_hat + N(u)` with `L = i xi |xi|` and
//! `N(u) = -i xi (u^2)^`. The linear part is propagated exactly by
//! `exp(L dt)` (unit modulus), so only the nonlinear term limits the step.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::soliton::{energy, mass};
use crate::spectral::{dealias_mask, Grid, RealField};

/// Max-norm above which a run is declared blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    /// Diagnostic cadence in steps.
    pub record_every: usize,
    /// Guard `dt <= safety * spacing`.
    pub safety: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt: 0.005,
            t_end: 10.0,
            dealias: true,
            record_every: 100,
            safety: 0.5,
        }
    }
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        let cfg = EvolutionConfig {
            dt,
            t_end,
            ..Default::default()
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid(format!("t_end must be > 0, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be positive"));
        }
        if !(self.safety.is_finite() && self.safety > 0.0) {
            return Err(Error::invalid("safety factor must be > 0"));
        }
        Ok(())
    }

    /// Checks the config and the step-size guard against `grid`.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.check()?;
        check_guard(self.dt, self.safety, grid)
    }

    /// Number of uniform steps; the effective step is `t_end / steps()`.
    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

fn check_guard(dt: f64, safety: f64, grid: &Grid) -> Result<()> {
    if dt > safety * grid.spacing() {
        return Err(Error::invalid(format!(
            "dt = {dt} violates the stability guard dt <= {safety} * spacing = {}",
            safety * grid.spacing()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mass: f64,
    pub energy: f64,
}

impl Diagnostics {
    pub fn of(u: &RealField) -> Self {
        Diagnostics {
            mass: mass(u),
            energy: energy(u),
        }
    }
}

/// Recorded states of one run. `times` is strictly increasing and parallel
/// to `snapshots` and `diagnostics`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<RealField>,
    pub diagnostics: Vec<Diagnostics>,
}

impl Trajectory {
    fn new() -> Self {
        Trajectory {
            times: Vec::new(),
            snapshots: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn record(&mut self, t: f64, u: RealField) {
        self.diagnostics.push(Diagnostics::of(&u));
        self.times.push(t);
        self.snapshots.push(u);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&RealField> {
        self.snapshots.last()
    }

    /// `max_t |N(t) - N(0)| / |N(0)|`.
    pub fn mass_drift(&self) -> f64 {
        relative_drift(self.diagnostics.iter().map(|d| d.mass))
    }

    /// `max_t |E(t) - E(0)| / |E(0)|`.
    pub fn energy_drift(&self) -> f64 {
        relative_drift(self.diagnostics.iter().map(|d| d.energy))
    }
}

fn relative_drift(mut values: impl Iterator<Item = f64>) -> f64 {
    let Some(first) = values.next() else {
        return 0.0;
    };
    let scale = first.abs().max(f64::MIN_POSITIVE);
    values.fold(0.0, |m, v| m.max((v - first).abs() / scale))
}

/// Reusable IF-RK4 stepper working on unnormalized DFT coefficients.
/// Owns its scratch buffers, so one instance serves one thread.
pub struct Stepper {
    grid: Grid,
    dt: f64,
    half_propagator: Vec<Complex64>,
    // -i xi, zeroed outside the retained band (and at Nyquist).
    nonlinear_symbol: Vec<Complex64>,
    band: Option<Vec<bool>>,
    physical: Vec<Complex64>,
    scratch: Vec<Complex64>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    d: Vec<Complex64>,
    stage: Vec<Complex64>,
}

impl Stepper {
    pub fn new(grid: &Grid, dt: f64, dealias: bool) -> Self {
        let n = grid.n();
        let band = dealias.then(|| dealias_mask(grid));
        let xi = grid.fft_wavenumbers();
        let half_propagator = (0..n)
            .map(|k| {
                if k == n / 2 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, xi[k] * xi[k].abs() * dt * 0.5)
                }
            })
            .collect();
        let nonlinear_symbol = (0..n)
            .map(|k| {
                let keep = band.as_ref().is_none_or(|m| m[k]);
                if k == n / 2 || !keep {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -xi[k])
                }
            })
            .collect();
        let zero = vec![Complex64::new(0.0, 0.0); n];
        Stepper {
            grid: grid.clone(),
            dt,
            half_propagator,
            nonlinear_symbol,
            band,
            physical: zero.clone(),
            scratch: vec![Complex64::new(0.0, 0.0); grid.fft_scratch_len()],
            a: zero.clone(),
            b: zero.clone(),
            c: zero.clone(),
            d: zero.clone(),
            stage: zero,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Unnormalized DFT of `u`, band-limited when de-aliasing is on.
    pub fn to_state(&self, u: &RealField) -> Vec<Complex64> {
        let mut s: Vec<Complex64> = u.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.fft_forward(&mut s);
        if let Some(band) = &self.band {
            for (c, &keep) in s.iter_mut().zip(band) {
                if !keep {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
        s
    }

    pub fn to_field(&mut self, state: &[Complex64]) -> RealField {
        self.physical.copy_from_slice(state);
        self.grid
            .fft_inverse_with_scratch(&mut self.physical, &mut self.scratch);
        let inv_n = 1.0 / self.grid.n() as f64;
        RealField::from_vec_unchecked(
            &self.grid,
            self.physical.iter().map(|c| c.re * inv_n).collect(),
        )
    }

    // out = -i xi (u^2)^ with u = IFFT(input) / n.
    fn nonlinear(
        grid: &Grid,
        symbol: &[Complex64],
        physical: &mut [Complex64],
        scratch: &mut [Complex64],
        input: &[Complex64],
        out: &mut [Complex64],
    ) {
        physical.copy_from_slice(input);
        grid.fft_inverse_with_scratch(physical, scratch);
        let inv_n = 1.0 / grid.n() as f64;
        for p in physical.iter_mut() {
            let v = p.re * inv_n;
            *p = Complex64::new(v * v, 0.0);
        }
        grid.fft_forward_with_scratch(physical, scratch);
        for ((o, p), s) in out.iter_mut().zip(physical.iter()).zip(symbol) {
            *o = p * s;
        }
    }

    /// Advances `state` by one step.
    pub fn advance(&mut self, state: &mut [Complex64]) {
        let h = self.dt;
        let e = &self.half_propagator;
        let grid = &self.grid;
        let sym = &self.nonlinear_symbol;

        Self::nonlinear(grid, sym, &mut self.physical, &mut self.scratch, state, &mut self.a);
        for k in 0..state.len() {
            self.stage[k] = e[k] * (state[k] + 0.5 * h * self.a[k]);
        }
        Self::nonlinear(grid, sym, &mut self.physical, &mut self.scratch, &self.stage, &mut self.b);
        for k in 0..state.len() {
            self.stage[k] = e[k] * state[k] + 0.5 * h * self.b[k];
        }
        Self::nonlinear(grid, sym, &mut self.physical, &mut self.scratch, &self.stage, &mut self.c);
        for k in 0..state.len() {
            self.stage[k] = e[k] * e[k] * state[k] + h * e[k] * self.c[k];
        }
        Self::nonlinear(grid, sym, &mut self.physical, &mut self.scratch, &self.stage, &mut self.d);
        for k in 0..state.len() {
            let e2 = e[k] * e[k];
            state[k] = e2 * state[k]
                + (h / 6.0)
                    * (e2 * self.a[k] + 2.0 * e[k] * (self.b[k] + self.c[k]) + self.d[k]);
        }
    }

    /// `None` if the state is finite and below [`BLOWUP_THRESHOLD`], else a reason.
    pub fn blow_up_reason(&mut self, state: &[Complex64]) -> Option<String> {
        let n = self.grid.n() as f64;
        let mut bound = 0.0;
        for c in state {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Some("non-finite Fourier coefficient".into());
            }
            bound += c.norm();
        }
        // sum |U_k| / n bounds max |u|; only transform back when the bound is inconclusive.
        if bound / n <= BLOWUP_THRESHOLD {
            return None;
        }
        let u = self.to_field(state);
        let m = u.max_abs();
        (m > BLOWUP_THRESHOLD).then(|| format!("max |u| = {m:e} exceeds {BLOWUP_THRESHOLD:e}"))
    }
}

/// One IF-RK4 step with de-aliasing.
pub fn step(u: &RealField, dt: f64) -> Result<RealField> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
    }
    check_guard(dt, EvolutionConfig::default().safety, u.grid())?;
    let mut stepper = Stepper::new(u.grid(), dt, true);
    let mut state = stepper.to_state(u);
    stepper.advance(&mut state);
    if let Some(reason) = stepper.blow_up_reason(&state) {
        return Err(Error::BlowUp {
            time: dt,
            reason,
            partial: None,
        });
    }
    Ok(stepper.to_field(&state))
}

/// Evolves `u0` to `cfg.t_end`, recording every `cfg.record_every` steps and at the end.
pub fn evolve(u0: &RealField, cfg: &EvolutionConfig) -> Result<Trajectory> {
    cfg.validate(u0.grid())?;
    let steps = cfg.steps();
    let dt = cfg.t_end / steps as f64;
    let mut stepper = Stepper::new(u0.grid(), dt, cfg.dealias);
    let mut state = stepper.to_state(u0);
    let mut traj = Trajectory::new();
    traj.record(0.0, stepper.to_field(&state));
    for i in 1..=steps {
        stepper.advance(&mut state);
        let t = i as f64 * dt;
        if let Some(reason) = stepper.blow_up_reason(&state) {
            return Err(Error::BlowUp {
                time: t,
                reason,
                partial: Some(Box::new(traj)),
            });
        }
        if i % cfg.record_every == 0 || i == steps {
            traj.record(t, stepper.to_field(&state));
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{soliton_profile, SolitonParams};

    #[test]
    fn zero_and_constant_are_fixed() {
        let g = Grid::new(64.0, 256).unwrap();
        let z = RealField::zeros(&g);
        assert_eq!(step(&z, 0.01).unwrap().max_abs(), 0.0);
        let k = RealField::constant(&g, 0.7).unwrap();
        let out = step(&k, 0.01).unwrap();
        assert!(out.sub(&k).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_steps() {
        let g = Grid::new(64.0, 256).unwrap();
        let z = RealField::zeros(&g);
        assert!(step(&z, 0.0).is_err());
        assert!(step(&z, -0.01).is_err());
        // spacing is 0.25; guard is 0.125
        assert!(step(&z, 0.2).is_err());
        assert!(EvolutionConfig::new(0.01, 0.0).is_err());
        let cfg = EvolutionConfig::new(0.2, 1.0).unwrap();
        assert!(evolve(&z, &cfg).is_err());
    }

    #[test]
    fn records_at_cadence_and_end() {
        let g = Grid::new(64.0, 256).unwrap();
        let u = soliton_profile(&g, &SolitonParams::new(1.0, 0.0).unwrap());
        let cfg = EvolutionConfig {
            dt: 0.01,
            t_end: 0.255,
            record_every: 10,
            ..Default::default()
        };
        let traj = evolve(&u, &cfg).unwrap();
        // 26 steps of 0.0098..., recorded at 0, 10, 20, 26
        assert_eq!(traj.len(), 4);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert!((traj.times[3] - 0.255).abs() < 1e-12);
        assert_eq!(traj.snapshots.len(), traj.diagnostics.len());
    }

    #[test]
    fn blow_up_is_reported_with_partial_trajectory() {
        // Huge smooth data leaves the stability region and overflows quickly.
        let g = Grid::new(16.0, 64).unwrap();
        let u = RealField::from_fn(&g, |x| 1e5 * (-(x * x)).exp()).unwrap();
        let cfg = EvolutionConfig {
            dt: 0.1,
            t_end: 50.0,
            record_every: 1,
            ..Default::default()
        };
        match evolve(&u, &cfg) {
            Err(Error::BlowUp { time, partial, .. }) => {
                let p = partial.unwrap();
                assert!(!p.is_empty());
                assert!(time > *p.times.last().unwrap());
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
