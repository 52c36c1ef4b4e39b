use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[-domain_length/2, domain_length/2)`.
///
/// Cloning is cheap: the FFT plans and wavenumber table are shared.
/// Two grids compare equal when they have the same length and sample count.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    domain_length: f64,
    n: usize,
    spacing: f64,
    // FFT storage order: index k holds mode m = k for k < n/2, m = k - n otherwise.
    fft_wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Grid {
    /// `n` must be a power of two (at least 4); `domain_length` positive and finite.
    pub fn new(domain_length: f64, n: usize) -> Result<Self> {
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(Error::invalid(format!(
                "domain length must be positive and finite, got {domain_length}"
            )));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "sample count must be a power of two >= 4, got {n}"
            )));
        }
        let spacing = domain_length / n as f64;
        let dk = 2.0 * PI / domain_length;
        let fft_wavenumbers = (0..n)
            .map(|k| dk * signed_mode(k, n) as f64)
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Grid {
            inner: Arc::new(GridInner {
                domain_length,
                n,
                spacing,
                fft_wavenumbers,
                forward,
                inverse,
            }),
        })
    }

    pub fn domain_length(&self) -> f64 {
        self.inner.domain_length
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn spacing(&self) -> f64 {
        self.inner.spacing
    }

    /// Position of sample `j`.
    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.inner.domain_length + j as f64 * self.inner.spacing
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n()).map(move |j| self.x(j))
    }

    /// Wavenumbers `2 pi m / domain_length` for `m = -n/2 .. n/2 - 1`, ascending.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n() as i64;
        let dk = self.fundamental();
        (-n / 2..n / 2).map(|m| dk * m as f64).collect()
    }

    /// Wavenumbers in FFT storage order (matching [`SpectralField`] coefficients).
    ///
    /// [`SpectralField`]: crate::spectral::SpectralField
    pub fn fft_wavenumbers(&self) -> &[f64] {
        &self.inner.fft_wavenumbers
    }

    /// Signed mode number of storage index `k`.
    pub fn mode(&self, k: usize) -> i64 {
        signed_mode(k, self.n())
    }

    /// Storage index of signed mode `m`, if it is on the grid.
    pub fn index_of_mode(&self, m: i64) -> Option<usize> {
        let n = self.n() as i64;
        if m < -n / 2 || m >= n / 2 {
            return None;
        }
        Some(m.rem_euclid(n) as usize)
    }

    pub fn nyquist_index(&self) -> usize {
        self.n() / 2
    }

    /// Smallest nonzero wavenumber, `2 pi / domain_length`.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.domain_length()
    }

    /// Nyquist wavenumber `pi / spacing`.
    pub fn xi_max(&self) -> f64 {
        PI / self.spacing()
    }

    pub(crate) fn fft_forward(&self, buf: &mut [Complex64]) {
        self.inner.forward.process(buf);
    }

    pub(crate) fn fft_inverse(&self, buf: &mut [Complex64]) {
        self.inner.inverse.process(buf);
    }

    pub(crate) fn fft_forward_with_scratch(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inner.forward.process_with_scratch(buf, scratch);
    }

    pub(crate) fn fft_inverse_with_scratch(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inner.inverse.process_with_scratch(buf, scratch);
    }

    pub(crate) fn fft_scratch_len(&self) -> usize {
        self.inner
            .forward
            .get_inplace_scratch_len()
            .max(self.inner.inverse.get_inplace_scratch_len())
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::invalid(format!("grid mismatch: {self:?} vs {other:?}")))
        }
    }
}

fn signed_mode(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.n() == other.n()
                && self.domain_length().to_bits() == other.domain_length().to_bits())
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("domain_length", &self.domain_length())
            .field("n", &self.n())
            .field("spacing", &self.spacing())
            .finish()
    }
}
