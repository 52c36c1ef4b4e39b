//! Closed-form solitons `Q_c(x - x0) = c Q(c (x - x0))`, `Q(z) = 2 / (1 + z^2)`,
//! and the conserved functionals `N`, `E` and `F_c = E + c N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{abs_derivative, Grid, RealField};

/// `Q(z) = 2 / (1 + z^2)`.
#[inline]
pub fn q(z: f64) -> f64 {
    2.0 / (1.0 + z * z)
}

/// `Q'(z) = -4 z / (1 + z^2)^2`.
#[inline]
pub fn q_prime(z: f64) -> f64 {
    let d = 1.0 + z * z;
    -4.0 * z / (d * d)
}

/// `Q''(z) = (12 z^2 - 4) / (1 + z^2)^3`.
#[inline]
pub fn q_second(z: f64) -> f64 {
    let d = 1.0 + z * z;
    (12.0 * z * z - 4.0) / (d * d * d)
}

/// Speed `c > 0` and center `x0` of one soliton.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    speed: f64,
    center: f64,
}

impl SolitonParams {
    pub fn new(speed: f64, center: f64) -> Result<Self> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(Error::invalid(format!("soliton speed must be > 0, got {speed}")));
        }
        if !center.is_finite() {
            return Err(Error::invalid(format!("soliton center must be finite, got {center}")));
        }
        Ok(SolitonParams { speed, center })
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    #[inline]
    fn z(&self, x: f64) -> f64 {
        self.speed * (x - self.center)
    }

    /// `R(x) = c Q(c (x - x0))`.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.speed * q(self.z(x))
    }

    /// `dR/dx = c^2 Q'(z)`.
    #[inline]
    pub fn d_dx(&self, x: f64) -> f64 {
        self.speed * self.speed * q_prime(self.z(x))
    }

    /// `d^2R/dx^2 = c^3 Q''(z)`.
    #[inline]
    pub fn d2_dx2(&self, x: f64) -> f64 {
        self.speed.powi(3) * q_second(self.z(x))
    }

    /// `dR/dc = Q(z) + z Q'(z)`.
    #[inline]
    pub fn d_dc(&self, x: f64) -> f64 {
        let z = self.z(x);
        q(z) + z * q_prime(z)
    }

    /// `d^2R/(dc dx) = 2 c Q'(z) + c z Q''(z)`.
    #[inline]
    pub fn d_dc_dx(&self, x: f64) -> f64 {
        let z = self.z(x);
        self.speed * (2.0 * q_prime(z) + z * q_second(z))
    }
}

/// Ordered solitons with strictly increasing centers and speeds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolitonTrain {
    params: Vec<SolitonParams>,
}

impl SolitonTrain {
    pub fn new(params: Vec<SolitonParams>) -> Result<Self> {
        for w in params.windows(2) {
            if w[1].center <= w[0].center {
                return Err(Error::invalid("soliton centers must be strictly increasing"));
            }
            if w[1].speed <= w[0].speed {
                return Err(Error::invalid("soliton speeds must be strictly increasing"));
            }
        }
        Ok(SolitonTrain { params })
    }

    pub fn from_speeds_and_centers(speeds: &[f64], centers: &[f64]) -> Result<Self> {
        if speeds.len() != centers.len() {
            return Err(Error::invalid(format!(
                "{} speeds but {} centers",
                speeds.len(),
                centers.len()
            )));
        }
        let params = speeds
            .iter()
            .zip(centers)
            .map(|(&c, &x)| SolitonParams::new(c, x))
            .collect::<Result<Vec<_>>>()?;
        Self::new(params)
    }

    pub fn single(params: SolitonParams) -> Self {
        SolitonTrain { params: vec![params] }
    }

    pub fn params(&self) -> &[SolitonParams] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.speed).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.center).collect()
    }

    /// Smallest gap between consecutive centers (infinite for K < 2).
    pub fn min_separation(&self) -> f64 {
        self.params
            .windows(2)
            .map(|w| w[1].center - w[0].center)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Samples `Q_c(x - x0)` (no periodization).
pub fn soliton_profile(grid: &Grid, p: &SolitonParams) -> RealField {
    RealField::from_vec_unchecked(grid, grid.points().map(|x| p.value(x)).collect())
}

/// Pointwise sum of the train's profiles; zero for an empty train.
pub fn soliton_sum(grid: &Grid, train: &SolitonTrain) -> RealField {
    let samples = grid
        .points()
        .map(|x| train.params.iter().map(|p| p.value(x)).sum())
        .collect();
    RealField::from_vec_unchecked(grid, samples)
}

/// `N(u) = (1/2) (u, u)`.
pub fn mass(u: &RealField) -> f64 {
    0.5 * u.dot_unchecked(u)
}

/// `int u^3` by the grid quadrature.
pub fn cubic_integral(u: &RealField) -> f64 {
    u.grid().spacing() * u.samples().iter().map(|v| v * v * v).sum::<f64>()
}

/// `E(u) = (1/2) (u, D u) - (1/3) int u^3`.
pub fn energy(u: &RealField) -> f64 {
    let du = abs_derivative(u);
    0.5 * u.dot_unchecked(&du) - cubic_integral(u) / 3.0
}

/// `F_c(u) = E(u) + c N(u)`.
pub fn f_functional(u: &RealField, c: f64) -> f64 {
    energy(u) + c * mass(u)
}

/// L2 norm of `H d/dx Q_c + Q_c^2 - c Q_c = -D Q_c + Q_c^2 - c Q_c` on the grid.
pub fn soliton_residual(grid: &Grid, p: &SolitonParams) -> f64 {
    field_residual(&soliton_profile(grid, p), p.speed)
}

/// Same residual for an arbitrary field and speed.
pub fn field_residual(u: &RealField, c: f64) -> f64 {
    let du = abs_derivative(u);
    let r: Vec<f64> = u
        .samples()
        .iter()
        .zip(du.samples())
        .map(|(&v, &d)| -d + v * v - c * v)
        .collect();
    RealField::from_vec_unchecked(u.grid(), r).l2_norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_values() {
        let g = Grid::new(16.0, 64).unwrap();
        let p = SolitonParams::new(1.0, 0.0).unwrap();
        let u = soliton_profile(&g, &p);
        let at = |x: f64| u.samples()[((x + 8.0) / g.spacing()).round() as usize];
        assert_eq!(at(0.0), 2.0);
        assert_eq!(at(1.0), 1.0);
        assert_eq!(at(-1.0), 1.0);
        let p2 = SolitonParams::new(2.0, 0.0).unwrap();
        assert_eq!(soliton_profile(&g, &p2).max_abs(), 4.0);
    }

    #[test]
    fn invalid_params() {
        assert!(SolitonParams::new(0.0, 0.0).is_err());
        assert!(SolitonParams::new(-1.0, 0.0).is_err());
        assert!(SolitonParams::new(1.0, f64::NAN).is_err());
        assert!(SolitonTrain::from_speeds_and_centers(&[1.0, 2.0], &[0.0, -1.0]).is_err());
        assert!(SolitonTrain::from_speeds_and_centers(&[2.0, 1.0], &[0.0, 10.0]).is_err());
        assert!(SolitonTrain::from_speeds_and_centers(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn derivative_closed_forms_match_finite_differences() {
        let p = SolitonParams::new(1.7, 0.4).unwrap();
        let h = 1e-5;
        for &x in &[-3.0, -0.2, 0.0, 0.9, 5.0] {
            let fd_x = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
            assert!((fd_x - p.d_dx(x)).abs() < 1e-8);
            let fd_xx = (p.d_dx(x + h) - p.d_dx(x - h)) / (2.0 * h);
            assert!((fd_xx - p.d2_dx2(x)).abs() < 1e-7);
            let pc = |c: f64| SolitonParams::new(c, 0.4).unwrap();
            let fd_c = (pc(1.7 + h).value(x) - pc(1.7 - h).value(x)) / (2.0 * h);
            assert!((fd_c - p.d_dc(x)).abs() < 1e-8);
            let fd_cx = (pc(1.7 + h).d_dx(x) - pc(1.7 - h).d_dx(x)) / (2.0 * h);
            assert!((fd_cx - p.d_dc_dx(x)).abs() < 1e-7);
        }
    }

    #[test]
    fn sums() {
        let g = Grid::new(64.0, 256).unwrap();
        let p = SolitonParams::new(1.0, 3.0).unwrap();
        let single = soliton_sum(&g, &SolitonTrain::single(p));
        assert_eq!(single.samples(), soliton_profile(&g, &p).samples());
        assert_eq!(soliton_sum(&g, &SolitonTrain::default()).max_abs(), 0.0);
    }

    #[test]
    fn two_soliton_peaks_carry_tail_of_the_other() {
        let g = Grid::new(256.0, 2048).unwrap();
        let train = SolitonTrain::from_speeds_and_centers(&[1.0, 2.0], &[-20.0, 20.0]).unwrap();
        let u = soliton_sum(&g, &train);
        let idx = |x: f64| ((x + 128.0) / g.spacing()).round() as usize;
        // Q_2 at distance 40 is 4 / (1 + 6400); Q_1 at distance 40 is 2 / (1 + 1600).
        let tail_on_1 = 4.0 / (1.0 + 4.0 * 1600.0);
        let tail_on_2 = 2.0 / (1.0 + 1600.0);
        assert!((u.samples()[idx(-20.0)] - (2.0 + tail_on_1)).abs() < 1e-14);
        assert!((u.samples()[idx(20.0)] - (4.0 + tail_on_2)).abs() < 1e-14);
    }

    #[test]
    fn functionals_trivial_cases() {
        let g = Grid::new(64.0, 256).unwrap();
        let z = RealField::zeros(&g);
        assert_eq!(mass(&z), 0.0);
        assert_eq!(energy(&z), 0.0);
        let u = soliton_profile(&g, &SolitonParams::new(1.0, 0.0).unwrap());
        let u2 = u.scale(2.0).unwrap();
        assert!((mass(&u2) - 4.0 * mass(&u)).abs() < 1e-12 * mass(&u));
        assert_eq!(f_functional(&u, 0.0), energy(&u));
    }

    #[test]
    fn gaussian_is_not_a_soliton() {
        let g = Grid::new(256.0, 4096).unwrap();
        let u = RealField::from_fn(&g, |x| 2.0 * (-x * x).exp()).unwrap();
        assert!(field_residual(&u, 1.0) > 0.1);
    }
}
