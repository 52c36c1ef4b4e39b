//! Periodic grid, Fourier transforms and Fourier-multiplier operators.
//!
//! Conventions:
//!
//! * Samples live at `x_j = -P/2 + j h`, `h = P/n`.
//! * The forward transform is unitary with respect to the quadrature inner
//!   product: `u_hat(xi_m) = (h / sqrt(P)) sum_j u_j exp(-i xi_m x_j)`, so that
//!   `sum_m |u_hat|^2 = (u, u)`. On the line this is `sqrt(2 pi / P)` times the
//!   transform `(2 pi)^{-1/2} int u exp(-i x xi) dx`.
//! * With this sign, `d/dx` has symbol `i xi`. The Hilbert transform has symbol
//!   `i sgn(xi)`, which makes `H d/dx = -D` with `D` the multiplier `|xi|`.
//! * `sgn(0) = 0`, so the mean mode is annihilated by `H`, `D` and `D^{1/2}`.
//!   The unpaired Nyquist mode keeps only the real part of a symbol, so odd
//!   symbols annihilate it and outputs stay real.

mod field;
mod grid;

pub use field::{RealField, SpectralField};
pub use grid::Grid;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Forward transform. The grid travels with the field, so there is nothing to mismatch.
pub fn transform(f: &RealField) -> SpectralField {
    let grid = f.grid();
    let mut buf: Vec<Complex64> = f.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.fft_forward(&mut buf);
    let scale = grid.spacing() / grid.domain_length().sqrt();
    for (k, c) in buf.iter_mut().enumerate() {
        // exp(-i xi_m x_0) = (-1)^m, and (-1)^m = (-1)^k because n is even.
        let sign = if k % 2 == 0 { scale } else { -scale };
        *c *= sign;
    }
    SpectralField::from_vec_unchecked(grid, buf)
}

/// Inverse transform. Fails if the coefficients are not (to round-off) those
/// of a real function.
pub fn inverse_transform(spectrum: &SpectralField) -> Result<RealField> {
    let grid = spectrum.grid();
    let mut buf = spectrum.coefficients().to_vec();
    let scale = 1.0 / grid.domain_length().sqrt();
    // Bound on every sample; round-off in the imaginary part is measured against it.
    let bound = scale * buf.iter().map(|c| c.norm()).sum::<f64>();
    for (k, c) in buf.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { scale } else { -scale };
        *c *= sign;
    }
    grid.fft_inverse(&mut buf);
    let max_im = buf.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if max_im > 1e-9 * bound {
        return Err(Error::invalid(format!(
            "coefficients do not represent a real field (imaginary part {max_im:e} vs scale {bound:e})"
        )));
    }
    RealField::from_samples(grid, buf.into_iter().map(|c| c.re).collect())
}

/// Real part of the inverse transform, for spectra known to come from masking
/// a real field's spectrum with an even mask.
pub(crate) fn inverse_transform_real_part(spectrum: &SpectralField) -> RealField {
    let grid = spectrum.grid();
    let scale = 1.0 / grid.domain_length().sqrt();
    let mut buf: Vec<Complex64> = spectrum
        .coefficients()
        .iter()
        .enumerate()
        .map(|(k, &c)| if k % 2 == 0 { c * scale } else { -c * scale })
        .collect();
    grid.fft_inverse(&mut buf);
    RealField::from_vec_unchecked(grid, buf.into_iter().map(|c| c.re).collect())
}

/// Applies the Fourier multiplier `symbol(xi)`.
///
/// The symbol must be finite on the grid and satisfy `symbol(-xi) = conj(symbol(xi))`
/// so the output is real.
pub fn apply_multiplier(f: &RealField, symbol: impl Fn(f64) -> Complex64) -> Result<RealField> {
    let grid = f.grid();
    let n = grid.n();
    let xi = grid.fft_wavenumbers();
    let values: Vec<Complex64> = xi.iter().map(|&w| symbol(w)).collect();
    if let Some(k) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::invalid(format!("symbol is not finite at xi = {}", xi[k])));
    }
    let tol = |v: Complex64| 1e-12 * v.norm().max(1.0);
    if values[0].im.abs() > tol(values[0]) {
        return Err(Error::invalid("symbol is not real at xi = 0"));
    }
    for k in 1..n / 2 {
        if (values[n - k] - values[k].conj()).norm() > tol(values[k]) {
            return Err(Error::invalid(format!(
                "symbol is not Hermitian at xi = {}",
                xi[k]
            )));
        }
    }
    Ok(apply_symbol_values(f, &values))
}

/// Multiplies by precomputed symbol values (FFT order); Nyquist uses the real part.
pub(crate) fn apply_symbol_values(f: &RealField, values: &[Complex64]) -> RealField {
    let grid = f.grid();
    let n = grid.n();
    let mut buf: Vec<Complex64> = f.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.fft_forward(&mut buf);
    for (k, (c, v)) in buf.iter_mut().zip(values).enumerate() {
        *c *= if k == n / 2 { Complex64::new(v.re, 0.0) } else { *v };
    }
    grid.fft_inverse(&mut buf);
    let inv_n = 1.0 / n as f64;
    RealField::from_vec_unchecked(grid, buf.into_iter().map(|c| c.re * inv_n).collect())
}

fn apply_real_symbol(f: &RealField, symbol: impl Fn(f64) -> f64) -> RealField {
    let values: Vec<Complex64> = f
        .grid()
        .fft_wavenumbers()
        .iter()
        .map(|&w| Complex64::new(symbol(w), 0.0))
        .collect();
    apply_symbol_values(f, &values)
}

fn apply_imag_symbol(f: &RealField, symbol: impl Fn(f64) -> f64) -> RealField {
    let values: Vec<Complex64> = f
        .grid()
        .fft_wavenumbers()
        .iter()
        .map(|&w| Complex64::new(0.0, symbol(w)))
        .collect();
    apply_symbol_values(f, &values)
}

fn sgn(xi: f64) -> f64 {
    if xi > 0.0 {
        1.0
    } else if xi < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// First column of the circulant matrix of a real even symbol acting on samples.
pub(crate) fn circulant_column(grid: &Grid, symbol: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut delta = vec![0.0; grid.n()];
    delta[0] = 1.0;
    apply_real_symbol(&RealField::from_vec_unchecked(grid, delta), symbol).into_samples()
}

/// `d/dx`, symbol `i xi`.
pub fn derivative(f: &RealField) -> RealField {
    apply_imag_symbol(f, |xi| xi)
}

/// Hilbert transform, symbol `i sgn(xi)`.
pub fn hilbert(f: &RealField) -> RealField {
    apply_imag_symbol(f, sgn)
}

/// `D = |d/dx|`, symbol `|xi|`.
pub fn abs_derivative(f: &RealField) -> RealField {
    apply_real_symbol(f, f64::abs)
}

/// `D^{1/2}`, symbol `|xi|^{1/2}`.
pub fn half_derivative(f: &RealField) -> RealField {
    apply_real_symbol(f, |xi| xi.abs().sqrt())
}

/// `(f, g) = spacing * sum_j f_j g_j`.
pub fn inner_product(f: &RealField, g: &RealField) -> Result<f64> {
    f.dot(g)
}

/// `( sum_m (1 + |xi_m|)^{2s} |f_hat(xi_m)|^2 )^{1/2}`.
pub fn sobolev_norm(f: &RealField, s: f64) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("Sobolev index must be >= 0, got {s}")));
    }
    let spectrum = transform(f);
    Ok(sobolev_norm_spectral(&spectrum, s))
}

pub(crate) fn sobolev_norm_spectral(spectrum: &SpectralField, s: f64) -> f64 {
    let xi = spectrum.grid().fft_wavenumbers();
    spectrum
        .coefficients()
        .iter()
        .zip(xi)
        .map(|(c, &w)| (1.0 + w.abs()).powf(2.0 * s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Largest mode number kept by the 2/3 rule: `|m| <= floor(n/3)`.
pub fn dealias_cutoff(grid: &Grid) -> usize {
    grid.n() / 3
}

/// `true` for storage indices kept by the 2/3 rule.
pub fn dealias_mask(grid: &Grid) -> Vec<bool> {
    let cut = dealias_cutoff(grid) as i64;
    (0..grid.n()).map(|k| grid.mode(k).abs() <= cut).collect()
}

/// Zeroes every coefficient with `|xi| > (2/3) xi_max`.
pub fn dealias(spectrum: &SpectralField) -> SpectralField {
    let mask = dealias_mask(spectrum.grid());
    let coefficients = spectrum
        .coefficients()
        .iter()
        .zip(mask)
        .map(|(&c, keep)| if keep { c } else { Complex64::new(0.0, 0.0) })
        .collect();
    SpectralField::from_vec_unchecked(spectrum.grid(), coefficients)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: &Grid, seed: u64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealField::from_samples(grid, (0..grid.n()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn rel_err(a: &RealField, b: &RealField) -> f64 {
        a.sub(b).unwrap().l2_norm() / b.l2_norm().max(1e-300)
    }

    #[test]
    fn zero_field_transforms_to_zero() {
        let g = Grid::new(10.0, 64).unwrap();
        let z = RealField::zeros(&g);
        let s = transform(&z);
        assert!(s.coefficients().iter().all(|c| c.norm() == 0.0));
        assert_eq!(inverse_transform(&s).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn cosine_has_two_equal_modes() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let f = RealField::from_fn(&g, |x| (5.0 * x).cos()).unwrap();
        let s = transform(&f);
        let big: Vec<i64> = (0..64)
            .filter(|&k| s.coefficients()[k].norm() > 1e-12)
            .map(|k| g.mode(k))
            .collect();
        assert_eq!(big.len(), 2);
        assert!(big.contains(&5) && big.contains(&-5));
        let a = s.mode(5).unwrap().norm();
        let b = s.mode(-5).unwrap().norm();
        assert!((a - b).abs() < 1e-14);
        // |c|^2 sum = (f, f) = pi
        assert!((2.0 * a * a - PI).abs() < 1e-12);
    }

    #[test]
    fn random_round_trip() {
        let g = Grid::new(37.0, 256).unwrap();
        let f = random_field(&g, 1);
        let back = inverse_transform(&transform(&f)).unwrap();
        let err = f.sub(&back).unwrap().max_abs() / f.max_abs();
        assert!(err < 1e-12, "round trip error {err}");
        assert!(transform(&f).hermitian_defect() < 1e-13);
    }

    #[test]
    fn inverse_rejects_non_hermitian() {
        let g = Grid::new(10.0, 16).unwrap();
        let mut c = vec![Complex64::new(0.0, 0.0); 16];
        c[1] = Complex64::new(1.0, 0.0);
        let s = SpectralField::from_coefficients(&g, c).unwrap();
        assert!(inverse_transform(&s).is_err());
    }

    #[test]
    fn hilbert_of_cosine() {
        // With H d/dx = -D the Hilbert transform sends cos to -sin.
        let g = Grid::new(2.0 * PI, 128).unwrap();
        let f = RealField::from_fn(&g, |x| (7.0 * x).cos()).unwrap();
        let expected = RealField::from_fn(&g, |x| -(7.0 * x).sin()).unwrap();
        assert!(hilbert(&f).sub(&expected).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn d_kills_constants() {
        let g = Grid::new(20.0, 64).unwrap();
        let f = RealField::constant(&g, 3.5).unwrap();
        assert!(abs_derivative(&f).max_abs() < 1e-13);
        assert!(hilbert(&f).max_abs() < 1e-13);
        assert!(half_derivative(&f).max_abs() < 1e-13);
    }

    #[test]
    fn hilbert_derivative_is_minus_d() {
        let g = Grid::new(50.0, 512).unwrap();
        // The Nyquist mode has no odd symbol, so compare away from it.
        let f = inverse_transform(&dealias(&transform(&random_field(&g, 2)))).unwrap();
        let lhs = hilbert(&derivative(&f));
        let rhs = abs_derivative(&f).scale(-1.0).unwrap();
        assert!(rel_err(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn derivative_matches_physical_space() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let f = RealField::from_fn(&g, |x| (3.0 * x).sin()).unwrap();
        let expected = RealField::from_fn(&g, |x| 3.0 * (3.0 * x).cos()).unwrap();
        assert!(derivative(&f).sub(&expected).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn generic_multiplier_matches_named_operators() {
        let g = Grid::new(30.0, 256).unwrap();
        let f = random_field(&g, 3);
        let d = apply_multiplier(&f, |xi| Complex64::new(xi.abs(), 0.0)).unwrap();
        assert!(rel_err(&d, &abs_derivative(&f)) < 1e-14);
        let h = apply_multiplier(&f, |xi| Complex64::new(0.0, sgn(xi))).unwrap();
        assert!(rel_err(&h, &hilbert(&f)) < 1e-14);
    }

    #[test]
    fn multiplier_rejects_bad_symbols() {
        let g = Grid::new(30.0, 64).unwrap();
        let f = random_field(&g, 4);
        // i * |xi| is not Hermitian.
        assert!(apply_multiplier(&f, |xi| Complex64::new(0.0, xi.abs())).is_err());
        assert!(apply_multiplier(&f, |_| Complex64::new(0.0, 1.0)).is_err());
        assert!(apply_multiplier(&f, |xi| Complex64::new(1.0 / xi, 0.0)).is_err());
    }

    #[test]
    fn odd_symbols_kill_nyquist() {
        let g = Grid::new(2.0 * PI, 16).unwrap();
        let f = RealField::from_fn(&g, |x| (8.0 * x).cos()).unwrap();
        assert!(derivative(&f).max_abs() < 1e-13);
        assert!(hilbert(&f).max_abs() < 1e-13);
        assert!((abs_derivative(&f).sub(&f.scale(8.0).unwrap()).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn sobolev_norms() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        assert_eq!(sobolev_norm(&RealField::zeros(&g), 0.5).unwrap(), 0.0);
        let f = random_field(&g, 5);
        let l2 = f.l2_norm();
        assert!((sobolev_norm(&f, 0.0).unwrap() - l2).abs() < 1e-12 * l2);
        let k = 4.0;
        let c = RealField::from_fn(&g, |x| (k * x).cos()).unwrap();
        let lhs = sobolev_norm(&c, 0.5).unwrap().powi(2);
        let rhs = (1.0 + k) * c.l2_norm().powi(2);
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
        assert!(sobolev_norm(&f, -0.5).is_err());
    }

    #[test]
    fn dealias_keeps_floor_band() {
        let g = Grid::new(10.0, 128).unwrap();
        let f = random_field(&g, 6);
        let d = dealias(&transform(&f));
        let kept = d.coefficients().iter().filter(|c| c.norm() > 0.0).count();
        assert_eq!(kept, 2 * (128 / 3) + 1);
        for k in 0..128 {
            let keep = (g.mode(k).abs() as f64) <= (2.0 / 3.0) * 64.0;
            assert_eq!(d.coefficients()[k].norm() > 0.0, keep, "mode {}", g.mode(k));
        }
        let dd = dealias(&d);
        assert_eq!(dd.coefficients(), d.coefficients());
    }

    #[test]
    fn parseval() {
        let g = Grid::new(17.0, 256).unwrap();
        let f = random_field(&g, 7);
        let h = random_field(&g, 8);
        let lhs = f.dot(&h).unwrap();
        let rhs: f64 = transform(&f)
            .coefficients()
            .iter()
            .zip(transform(&h).coefficients())
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        assert!((lhs - rhs).abs() <= 1e-10 * f.l2_norm() * h.l2_norm());
    }
}
