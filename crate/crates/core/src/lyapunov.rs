//! Moving cut-offs `psi_k`, local masses `I_k`, the functional
//! `G = E + sum_k d_k I_k` and the localized quadratic form `(eps, H_K eps)`.
//!
//! Soliton indices are 0-based: `psi_0 == 1`, and `psi_k` for `k >= 1` switches
//! on between solitons `k - 1` and `k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::modulation::{ModulationSeries, ModulationState};
use crate::soliton::{energy, mass, soliton_profile, SolitonParams};
use crate::spectral::{abs_derivative, Grid, RealField};

/// `630 * int_0^x s^4 (1 - s)^4 ds`, clamped to `[0, 1]` outside the unit interval.
pub fn zeta(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else if x > 0.5 {
        // zeta(x) = 1 - zeta(1 - x); avoids cancellation near 1.
        1.0 - zeta_poly(1.0 - x)
    } else {
        zeta_poly(x)
    }
}

fn zeta_poly(x: f64) -> f64 {
    let x5 = x.powi(5);
    x5 * (126.0 + x * (-420.0 + x * (540.0 + x * (-315.0 + x * 70.0))))
}

pub fn zeta_prime(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        630.0 * (x * (1.0 - x)).powi(4)
    }
}

/// `(1/2)(3/2 - 1/gamma)`.
pub fn theta0(gamma: f64) -> f64 {
    0.5 * (1.5 - 1.0 / gamma)
}

/// Scale `L^{1/gamma - 3/2}` of the local-mass and speed bounds.
pub fn bound_scale(gamma: f64, l: f64) -> f64 {
    l.powf(1.0 / gamma - 1.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    gamma: f64,
    l: f64,
    b: f64,
    sigmas: Vec<f64>,
    midpoints: Vec<f64>,
}

impl WeightConfig {
    /// `speeds` and `centers` are the nominal initial parameters of the train.
    pub fn new(gamma: f64, l: f64, speeds: &[f64], centers: &[f64]) -> Result<Self> {
        if !(gamma > 2.0 / 3.0 && gamma < 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (2/3, 1), got {gamma}")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::invalid(format!("L must be > 0, got {l}")));
        }
        if speeds.is_empty() || speeds.len() != centers.len() {
            return Err(Error::invalid("need matching, non-empty speeds and centers"));
        }
        let sigmas = speeds.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let midpoints = centers.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(WeightConfig {
            gamma,
            l,
            b: (l / 16.0).powf(1.0 / gamma),
            sigmas,
            midpoints,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    /// Number of solitons K.
    pub fn len(&self) -> usize {
        self.sigmas.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn theta0(&self) -> f64 {
        theta0(self.gamma)
    }

    /// Transition width `(b + t)^gamma`.
    pub fn width(&self, t: f64) -> f64 {
        (self.b + t).powf(self.gamma)
    }

    /// Left edge of the `psi_k` transition at time `t`.
    pub fn transition_start(&self, k: usize, t: f64) -> f64 {
        self.midpoints[k - 1] + self.sigmas[k - 1] * t
    }

    fn check(&self, k: usize, t: f64) -> Result<()> {
        if k >= self.len() {
            return Err(Error::invalid(format!(
                "weight index {k} out of range for K = {}",
                self.len()
            )));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("time must be >= 0, got {t}")));
        }
        Ok(())
    }

    fn psi_at(&self, k: usize, t: f64, x: f64) -> f64 {
        if k == 0 {
            1.0
        } else {
            zeta((x - self.transition_start(k, t)) / self.width(t))
        }
    }

    fn phi_at(&self, k: usize, t: f64, x: f64) -> f64 {
        if k + 1 < self.len() {
            self.psi_at(k, t, x) - self.psi_at(k + 1, t, x)
        } else {
            self.psi_at(k, t, x)
        }
    }
}

/// `psi_k(t, .)` sampled on the grid.
pub fn weight_psi(k: usize, t: f64, grid: &Grid, cfg: &WeightConfig) -> Result<RealField> {
    cfg.check(k, t)?;
    RealField::from_fn(grid, |x| cfg.psi_at(k, t, x))
}

/// `d/dx psi_k(t, .)` in closed form.
pub fn weight_psi_dx(k: usize, t: f64, grid: &Grid, cfg: &WeightConfig) -> Result<RealField> {
    cfg.check(k, t)?;
    if k == 0 {
        return Ok(RealField::zeros(grid));
    }
    let w = cfg.width(t);
    let x0 = cfg.transition_start(k, t);
    RealField::from_fn(grid, |x| zeta_prime((x - x0) / w) / w)
}

/// `psi_k` minus the ramp `(x + P/2)/P`: the periodic function sharing the
/// nonzero Fourier content of `psi_k`'s derivative. This is the representative
/// whose Besov norm is meaningful on the box.
pub fn weight_psi_periodic(k: usize, t: f64, grid: &Grid, cfg: &WeightConfig) -> Result<RealField> {
    cfg.check(k, t)?;
    let p = grid.domain_length();
    RealField::from_fn(grid, |x| {
        let ramp = if k == 0 { 0.0 } else { (x + 0.5 * p) / p };
        cfg.psi_at(k, t, x) - ramp
    })
}

/// `phi_k = psi_k - psi_{k+1}`, and `phi_{K-1} = psi_{K-1}`.
pub fn weight_phi(k: usize, t: f64, grid: &Grid, cfg: &WeightConfig) -> Result<RealField> {
    cfg.check(k, t)?;
    RealField::from_fn(grid, |x| cfg.phi_at(k, t, x))
}

/// `I_k(t) = (1/2) int psi_k u^2`.
pub fn local_mass(u: &RealField, k: usize, t: f64, cfg: &WeightConfig) -> Result<f64> {
    cfg.check(k, t)?;
    let h = u.grid().spacing();
    let grid = u.grid();
    Ok(0.5
        * h
        * u.samples()
            .iter()
            .enumerate()
            .map(|(j, v)| cfg.psi_at(k, t, grid.x(j)) * v * v)
            .sum::<f64>())
}

/// `d_0 = c_0(0)`, `d_k = c_k(0) - c_{k-1}(0)`.
pub fn lyapunov_weights(initial_speeds: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    initial_speeds
        .iter()
        .map(|&c| {
            let d = c - prev;
            prev = c;
            d
        })
        .collect()
}

/// `G(t) = E(u) + sum_k d_k I_k(t)`.
pub fn lyapunov_g(u: &RealField, t: f64, d: &[f64], cfg: &WeightConfig) -> Result<f64> {
    if d.len() != cfg.len() {
        return Err(Error::invalid(format!(
            "expected {} weights d_k, got {}",
            cfg.len(),
            d.len()
        )));
    }
    let mut g = energy(u);
    for (k, dk) in d.iter().enumerate() {
        g += dk * local_mass(u, k, t, cfg)?;
    }
    Ok(g)
}

fn check_fit(fit: &ModulationState, cfg: &WeightConfig) -> Result<()> {
    if fit.len() != cfg.len() {
        return Err(Error::invalid(format!(
            "fit has {} solitons, weights expect {}",
            fit.len(),
            cfg.len()
        )));
    }
    Ok(())
}

/// `(eps, H_K eps)` with `H_K = D - 2R + sum_k c_k(t) phi_k`, `R` the fitted sum.
pub fn quadratic_form_hk(
    eps: &RealField,
    fit: &ModulationState,
    t: f64,
    cfg: &WeightConfig,
) -> Result<f64> {
    check_fit(fit, cfg)?;
    cfg.check(0, t)?;
    let grid = eps.grid();
    let params = fit.params();
    let potential = hk_potential(grid, &params, t, cfg);
    let d_eps = abs_derivative(eps);
    let local: f64 = eps
        .samples()
        .iter()
        .zip(&potential)
        .map(|(e, v)| v * e * e)
        .sum::<f64>()
        * grid.spacing();
    Ok(eps.dot(&d_eps)? + local)
}

/// Multiplication part `-2R + sum_k c_k phi_k` of `H_K` on the grid.
pub fn hk_potential(grid: &Grid, params: &[SolitonParams], t: f64, cfg: &WeightConfig) -> Vec<f64> {
    grid.points()
        .map(|x| {
            let mut partition = 0.0;
            let mut v = 0.0;
            for (k, p) in params.iter().enumerate() {
                let phi = cfg.phi_at(k, t, x);
                partition += phi;
                v += p.speed() * phi - 2.0 * p.value(x);
            }
            debug_assert!((partition - 1.0).abs() < 1e-12, "phi_k must sum to 1");
            v
        })
        .collect()
}

/// `|G(t) - {sum_k [E(R_k) + c_k(0) N(R_k)] + (1/2)(eps, H_K eps)}|` with `d`
/// built from the initial speeds `c0`. `E(R_k)` and `N(R_k)` are quadratures on
/// the grid so that box truncation cancels.
pub fn energy_decomposition_residual(
    u: &RealField,
    fit: &ModulationState,
    t: f64,
    cfg: &WeightConfig,
    c0: &[f64],
) -> Result<f64> {
    check_fit(fit, cfg)?;
    if c0.len() != cfg.len() {
        return Err(Error::invalid("c0 must have one speed per soliton"));
    }
    let d = lyapunov_weights(c0);
    let g = lyapunov_g(u, t, &d, cfg)?;
    let mut main = 0.5 * quadratic_form_hk(&fit.residual, fit, t, cfg)?;
    for (p, &c) in fit.params().iter().zip(c0) {
        let rk = soliton_profile(u.grid(), p);
        main += energy(&rk) + c * mass(&rk);
    }
    Ok((g - main).abs())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub times: Vec<f64>,
    /// `local_masses[k][i] = I_k(times[i])`.
    pub local_masses: Vec<Vec<f64>>,
    /// `sup_t (I_k(t) - I_k(0))` per k.
    pub max_increase: Vec<f64>,
    pub g: Vec<f64>,
    /// `sup_t (G(t) - G(0))`.
    pub g_drift: f64,
    pub d: Vec<f64>,
    pub theta0: f64,
    /// `L^{1/gamma - 3/2}`.
    pub bound_scale: f64,
    pub sup_eps_l2_sq: f64,
    /// `L^{1/gamma - 3/2} + L^{1 - 1/gamma} sup ||eps||_{L^2}^2`.
    pub envelope: f64,
    /// `max_k max_increase[k] / envelope`.
    pub ratio: f64,
}

/// Local masses and `G` along the tracked part of a trajectory.
pub fn monotonicity_report(
    traj: &Trajectory,
    series: &ModulationSeries,
    cfg: &WeightConfig,
) -> Result<MonotonicityReport> {
    let m = series.len();
    if m == 0 {
        return Err(Error::invalid("modulation series is empty"));
    }
    if traj.len() < m {
        return Err(Error::invalid("series is longer than the trajectory"));
    }
    for (a, b) in traj.times.iter().zip(&series.times) {
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            return Err(Error::invalid("series times do not match the trajectory"));
        }
    }
    let k_count = cfg.len();
    let d = lyapunov_weights(&series.speeds[0]);
    let mut local_masses = vec![Vec::with_capacity(m); k_count];
    let mut g = Vec::with_capacity(m);
    for i in 0..m {
        let t = series.times[i];
        let u = &traj.snapshots[i];
        let mut gi = energy(u);
        for (k, series_k) in local_masses.iter_mut().enumerate() {
            let ik = local_mass(u, k, t, cfg)?;
            gi += d[k] * ik;
            series_k.push(ik);
        }
        g.push(gi);
    }
    let max_increase: Vec<f64> = local_masses
        .iter()
        .map(|s| s.iter().map(|v| v - s[0]).fold(0.0, f64::max))
        .collect();
    let g_drift = g.iter().map(|v| v - g[0]).fold(0.0, f64::max);
    let sup_eps_l2_sq = series.eps_l2.iter().fold(0.0_f64, |a, e| a.max(e * e));
    let gamma = cfg.gamma();
    let scale = bound_scale(gamma, cfg.l());
    let envelope = scale + cfg.l().powf(1.0 - 1.0 / gamma) * sup_eps_l2_sq;
    let ratio = max_increase.iter().fold(0.0_f64, |a, v| a.max(*v)) / envelope;
    Ok(MonotonicityReport {
        times: series.times.clone(),
        local_masses,
        max_increase,
        g,
        g_drift,
        d,
        theta0: cfg.theta0(),
        bound_scale: scale,
        sup_eps_l2_sq,
        envelope,
        ratio,
    })
}
