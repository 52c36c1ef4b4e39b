//! Measured constants for the commutator, Besov and Gagliardo-Nirenberg
//! estimates used in the monotonicity argument.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{weight_psi_periodic, zeta, WeightConfig};
use crate::spectral::{
    derivative, half_derivative, hilbert, inverse_transform_real_part, sobolev_norm,
    transform, Grid, RealField, SpectralField,
};

/// Exponent parameter `eps` in the Besov index `2 - 2 eps`.
pub const BESOV_EPS: f64 = 0.2;

/// Sharp constant of the discrete commutator estimate in the normalization of
/// [`l1_half_symbol_norm`]: `|sqrt|a| - sqrt|b|| <= sqrt|a - b|` plus Young.
pub fn commutator_bound() -> f64 {
    1.0 / (2.0 * std::f64::consts::PI).sqrt()
}

/// `|| |xi|^{1/2} chi_hat ||_{L^1(d xi)}` with the unitary continuous transform,
/// discretized as `sqrt(2 pi / P) sum_m |xi_m|^{1/2} |chi_hat_m|`.
pub fn l1_half_symbol_norm(chi: &RealField) -> f64 {
    let spec = transform(chi);
    let p = chi.grid().domain_length();
    let sum: f64 = spec
        .coefficients()
        .iter()
        .zip(chi.grid().fft_wavenumbers())
        .map(|(c, xi)| xi.abs().sqrt() * c.norm())
        .sum();
    (2.0 * std::f64::consts::PI / p).sqrt() * sum
}

/// `[D^{1/2}, chi] u`.
pub fn half_derivative_commutator(chi: &RealField, u: &RealField) -> Result<RealField> {
    let a = half_derivative(&chi.mul(u)?);
    let b = chi.mul(&half_derivative(u))?;
    a.sub(&b)
}

/// `||[D^{1/2}, chi] u|| / (|| |xi|^{1/2} chi_hat ||_{L^1} ||u||)`.
pub fn commutator_ratio(chi: &RealField, u: &RealField) -> Result<f64> {
    let denom = l1_half_symbol_norm(chi) * u.l2_norm();
    if denom == 0.0 {
        return Err(Error::Degenerate("zero denominator in commutator ratio".into()));
    }
    Ok(half_derivative_commutator(chi, u)?.l2_norm() / denom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorMeasurement {
    /// Largest ratio over the trial fields; 0 when `degenerate`.
    pub ratio: f64,
    /// `chi` has no nonconstant Fourier content.
    pub degenerate: bool,
}

/// Default band limit for random trial fields, in physical wavenumber.
pub const TRIAL_CUTOFF: f64 = 4.0;

const POWER_ITERATIONS: usize = 25;

/// Max of [`commutator_ratio`] over `trials` random band-limited unit fields,
/// each refined by power iteration on `C^T C = -C^2`.
pub fn commutator_constant(chi: &RealField, trials: usize, seed: u64) -> Result<CommutatorMeasurement> {
    let l1 = l1_half_symbol_norm(chi);
    let chi_scale = chi.max_abs().max(1.0);
    if l1 <= 1e-13 * chi_scale {
        return Ok(CommutatorMeasurement {
            ratio: 0.0,
            degenerate: true,
        });
    }
    let grid = chi.grid();
    let cutoff = TRIAL_CUTOFF.min(0.25 * grid.xi_max());
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let mut rng = trial_rng(seed, trial as u64);
            let mut u = random_band_limited(grid, cutoff, &mut rng);
            let mut best = commutator_ratio(chi, &u)?;
            for _ in 0..POWER_ITERATIONS {
                let cu = half_derivative_commutator(chi, &u)?;
                let next = half_derivative_commutator(chi, &cu)?.scale(-1.0)?;
                let nrm = next.l2_norm();
                if nrm == 0.0 {
                    break;
                }
                u = next.scale(1.0 / nrm)?;
                best = best.max(commutator_ratio(chi, &u)?);
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(CommutatorMeasurement {
        ratio: ratios.into_iter().fold(0.0, f64::max),
        degenerate: false,
    })
}

/// Independent generator for trial `index` of a sweep seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Unit-L^2 random field `sum_m a_m cos(xi_m x) + b_m sin(xi_m x)` over
/// `0 < xi_m <= cutoff` with Gaussian coefficients drawn mode by mode, so the
/// same seed gives the same function on any grid that resolves the band.
pub fn random_band_limited(grid: &Grid, cutoff: f64, rng: &mut impl Rng) -> RealField {
    let dk = grid.fundamental();
    let top = ((cutoff / dk).floor() as usize).max(1);
    let coeffs: Vec<(f64, f64, f64)> = (1..=top)
        .map(|m| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (m as f64 * dk, a, b)
        })
        .collect();
    let u = RealField::from_vec_unchecked(
        grid,
        grid.points()
            .map(|x| {
                coeffs
                    .iter()
                    .map(|&(xi, a, b)| a * (xi * x).cos() + b * (xi * x).sin())
                    .sum()
            })
            .collect(),
    );
    let nrm = u.l2_norm();
    RealField::from_vec_unchecked(grid, u.samples().iter().map(|v| v / nrm).collect())
}

/// Smooth compactly supported bump: plateau of half-width `width` around
/// `center` with `zeta` ramps of length `width` on each side.
pub fn smooth_bump(grid: &Grid, center: f64, width: f64) -> RealField {
    RealField::from_vec_unchecked(
        grid,
        grid.points()
            .map(|x| {
                let r = (x - center).abs();
                zeta((2.0 * width - r) / width)
            })
            .collect(),
    )
}

/// Homogeneous dyadic Besov norm `sum_N N^s ||P_N phi||_inf` with sharp blocks
/// `|xi| in [N, 2N)`, `N = 2^j`, covering every nonzero grid wavenumber.
pub fn besov_norm(phi: &RealField, s: f64) -> f64 {
    let grid = phi.grid();
    let spec = transform(phi);
    let xi = grid.fft_wavenumbers();
    let lo = grid.fundamental().log2().floor() as i32;
    let hi = grid.xi_max().log2().floor() as i32;
    let mut total = 0.0;
    for j in lo..=hi {
        let n_lo = 2f64.powi(j);
        let n_hi = 2.0 * n_lo;
        let mut any = false;
        let coefficients = spec
            .coefficients()
            .iter()
            .zip(xi)
            .map(|(&c, &w)| {
                let a = w.abs();
                if a >= n_lo && a < n_hi {
                    any = true;
                    c
                } else {
                    num_complex::Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        if !any {
            continue;
        }
        let block = SpectralField::from_vec_unchecked(grid, coefficients);
        let sup = inverse_transform_real_part(&block).max_abs();
        total += n_lo.powf(s) * sup;
    }
    total
}

/// `int u^4 / (int |D^{1/2} u|^2 int u^2)`.
pub fn gn_ratio(u: &RealField) -> Result<f64> {
    let l2sq = u.dot(u)?;
    let half = half_derivative(u);
    let hsq = half.dot(&half)?;
    if l2sq == 0.0 || hsq == 0.0 {
        return Err(Error::invalid("GN ratio needs a field with nonconstant content"));
    }
    let quartic = u.grid().spacing() * u.samples().iter().map(|v| v.powi(4)).sum::<f64>();
    Ok(quartic / (hsq * l2sq))
}

/// `int u_x [H, phi] u_x`, with `H` the Hilbert transform.
pub fn hilbert_commutator_form(u: &RealField, phi: &RealField) -> Result<f64> {
    let ux = derivative(u);
    let a = hilbert(&phi.mul(&ux)?);
    let b = phi.mul(&hilbert(&ux))?;
    ux.dot(&a.sub(&b)?)
}

/// `|form| / (besov(phi, 2 - 2 eps) ||u||^2_{H^{1/2}})`.
pub fn hilbert_commutator_ratio(u: &RealField, phi: &RealField) -> Result<f64> {
    let b = besov_norm(phi, 2.0 - 2.0 * BESOV_EPS);
    let h = sobolev_norm(u, 0.5)?;
    if b == 0.0 || h == 0.0 {
        return Err(Error::Degenerate("zero denominator in Hilbert commutator ratio".into()));
    }
    Ok(hilbert_commutator_form(u, phi)?.abs() / (b * h * h))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub samples: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Trial index attaining the max.
    pub argmax: usize,
}

fn summarize(ratios: Vec<f64>) -> SweepSummary {
    let samples = ratios.len();
    let (argmax, max_ratio) = ratios
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, r)| if r > b.1 { (i, r) } else { b });
    SweepSummary {
        samples,
        max_ratio,
        mean_ratio: ratios.iter().sum::<f64>() / samples.max(1) as f64,
        argmax,
    }
}

fn random_width(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Commutator ratio over random bumps `chi` (widths 0.5..16) and random
/// band-limited `u`, without power iteration.
pub fn commutator_sweep(grid: &Grid, samples: usize, seed: u64) -> Result<SweepSummary> {
    let cutoff = TRIAL_CUTOFF.min(0.25 * grid.xi_max());
    let ratios = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let w = random_width(&mut rng, 0.5, 16.0);
            let center = (rng.random::<f64>() - 0.5) * 0.25 * grid.domain_length();
            let chi = smooth_bump(grid, center, w);
            let u = random_band_limited(grid, cutoff, &mut rng);
            commutator_ratio(&chi, &u)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(ratios))
}

/// GN ratio over random band-limited fields, Gaussians and modulated bumps.
pub fn gn_sweep(grid: &Grid, samples: usize, seed: u64) -> Result<SweepSummary> {
    let cutoff = TRIAL_CUTOFF.min(0.25 * grid.xi_max());
    let ratios = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let u = match i % 3 {
                0 => random_band_limited(grid, cutoff, &mut rng),
                1 => {
                    let w = random_width(&mut rng, 0.5, 16.0);
                    RealField::from_vec_unchecked(
                        grid,
                        grid.points().map(|x| (-(x / w).powi(2)).exp()).collect(),
                    )
                }
                _ => {
                    let w = random_width(&mut rng, 1.0, 16.0);
                    let k = rng.random::<f64>() * cutoff;
                    RealField::from_vec_unchecked(
                        grid,
                        grid.points()
                            .map(|x| (-(x / w).powi(2)).exp() * (1.0 + (k * x).cos()))
                            .collect(),
                    )
                }
            };
            gn_ratio(&u)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(ratios))
}

/// [`hilbert_commutator_ratio`] over random band-limited `u` and weights `phi`
/// built from one to three smooth bumps of random width and height.
pub fn hilbert_commutator_sweep(grid: &Grid, samples: usize, seed: u64) -> Result<SweepSummary> {
    let cutoff = TRIAL_CUTOFF.min(0.25 * grid.xi_max());
    let quarter = 0.25 * grid.domain_length();
    let ratios = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let bumps = 1 + (rng.random::<u32>() % 3) as usize;
            let mut phi = RealField::zeros(grid);
            for _ in 0..bumps {
                let w = random_width(&mut rng, 1.0, 16.0);
                let center = (rng.random::<f64>() - 0.5) * quarter;
                let height = 0.5 + rng.random::<f64>();
                phi = phi.axpy(height, &smooth_bump(grid, center, w))?;
            }
            let u = random_band_limited(grid, cutoff, &mut rng);
            hilbert_commutator_ratio(&u, &phi)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(ratios))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub times: Vec<f64>,
    /// `b + t`.
    pub scales: Vec<f64>,
    pub norms: Vec<f64>,
    /// Least-squares slope of `ln norm` against `ln(b + t)`.
    pub slope: f64,
    /// `-2 gamma (1 - eps)`.
    pub expected_slope: f64,
}

/// Besov norm of index `2 - 2 eps` of the periodic part of `psi_k` at each time.
pub fn psi_besov_decay(grid: &Grid, cfg: &WeightConfig, k: usize, times: &[f64]) -> Result<DecayFit> {
    if times.len() < 2 {
        return Err(Error::invalid("a decay fit needs at least two times"));
    }
    let s = 2.0 - 2.0 * BESOV_EPS;
    let mut scales = Vec::with_capacity(times.len());
    let mut norms = Vec::with_capacity(times.len());
    for &t in times {
        let psi = weight_psi_periodic(k, t, grid, cfg)?;
        scales.push(cfg.b() + t);
        norms.push(besov_norm(&psi, s));
    }
    let xs: Vec<f64> = scales.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    Ok(DecayFit {
        times: times.to_vec(),
        scales,
        norms,
        slope: least_squares_slope(&xs, &ys),
        expected_slope: -2.0 * cfg.gamma() * (1.0 - BESOV_EPS),
    })
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
