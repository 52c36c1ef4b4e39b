use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Real samples `u(x_j)` on a [`Grid`]. Samples are always finite.
#[derive(Clone, Debug)]
pub struct RealField {
    grid: Grid,
    samples: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: &Grid) -> Self {
        RealField {
            grid: grid.clone(),
            samples: vec![0.0; grid.n()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Result<Self> {
        Self::from_samples(grid, vec![value; grid.n()])
    }

    pub fn from_samples(grid: &Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n() {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                grid.n(),
                samples.len()
            )));
        }
        check_finite(&samples)?;
        Ok(RealField {
            grid: grid.clone(),
            samples,
        })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_samples(grid, grid.points().map(f).collect())
    }

    pub(crate) fn from_vec_unchecked(grid: &Grid, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), grid.n());
        RealField {
            grid: grid.clone(),
            samples,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Quadrature `(self, other) = spacing * sum_j self_j other_j`.
    pub fn dot(&self, other: &RealField) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.dot_unchecked(other))
    }

    pub(crate) fn dot_unchecked(&self, other: &RealField) -> f64 {
        self.grid.spacing()
            * self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot_unchecked(self).sqrt()
    }

    /// `spacing * sum_j u_j`.
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.samples.iter().sum::<f64>()
    }

    pub fn add(&self, other: &RealField) -> Result<RealField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RealField) -> Result<RealField> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &RealField) -> Result<RealField> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &RealField) -> Result<RealField> {
        self.zip_with(other, |a, b| a + factor * b)
    }

    pub fn scale(&self, factor: f64) -> Result<RealField> {
        self.map(|v| factor * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<RealField> {
        Self::from_samples(&self.grid, self.samples.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Result<RealField> {
        self.grid.ensure_same(&other.grid)?;
        Self::from_samples(
            &self.grid,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Grid-commensurate periodic translation: the result `v` satisfies
    /// `v(x) = u(x - shift * spacing)`.
    pub fn translate(&self, shift: isize) -> RealField {
        let n = self.len() as isize;
        let samples = (0..n)
            .map(|j| self.samples[(j - shift).rem_euclid(n) as usize])
            .collect();
        RealField::from_vec_unchecked(&self.grid, samples)
    }

    /// Reflection `v(x) = u(-x)` (exact on the grid since `x_{n-j} = -x_j` mod the box).
    pub fn reflect(&self) -> RealField {
        let n = self.len();
        let samples = (0..n).map(|j| self.samples[(n - j) % n]).collect();
        RealField::from_vec_unchecked(&self.grid, samples)
    }
}

/// Fourier coefficients `u_hat(xi_m)` in FFT storage order (see [`Grid::fft_wavenumbers`]).
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn from_coefficients(grid: &Grid, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.n() {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                grid.n(),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::invalid("non-finite Fourier coefficient"));
        }
        Ok(SpectralField {
            grid: grid.clone(),
            coefficients,
        })
    }

    pub(crate) fn from_vec_unchecked(grid: &Grid, coefficients: Vec<Complex64>) -> Self {
        SpectralField {
            grid: grid.clone(),
            coefficients,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<Complex64> {
        self.coefficients
    }

    /// Coefficient of signed mode `m`, or `None` if off-grid.
    pub fn mode(&self, m: i64) -> Option<Complex64> {
        self.grid.index_of_mode(m).map(|k| self.coefficients[k])
    }

    /// Largest violation of `u_hat(-xi) = conj(u_hat(xi))` over paired modes,
    /// plus the imaginary parts of the unpaired mean and Nyquist modes.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n();
        let c = &self.coefficients;
        let mut defect = c[0].im.abs().max(c[n / 2].im.abs());
        for k in 1..n / 2 {
            defect = defect.max((c[n - k] - c[k].conj()).norm());
        }
        defect
    }

    pub fn norm_squared(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }
}

fn check_finite(samples: &[f64]) -> Result<()> {
    match samples.iter().position(|v| !v.is_finite()) {
        Some(j) => Err(Error::invalid(format!(
            "non-finite sample {} at index {j}",
            samples[j]
        ))),
        None => Ok(()),
    }
}
