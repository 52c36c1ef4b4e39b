//! Modulation decomposition `u = sum_j R_j + eps` with `R_j = Q_{c_j}(x - x_j)` and
//! `(eps, R_j) = (eps, d/dx R_j) = 0`, solved by Newton iteration on the 2K
//! orthogonality conditions, and time tracking along a trajectory.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::soliton::{SolitonParams, SolitonTrain};
use crate::spectral::{sobolev_norm, Grid, RealField};

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 50;

/// A converged fit.
#[derive(Clone, Debug)]
pub struct ModulationState {
    pub speeds: Vec<f64>,
    pub centers: Vec<f64>,
    /// `eps = u - sum_j R_j`.
    pub residual: RealField,
    /// `max_j max(|(eps, R_j)|, |(eps, d/dx R_j)|)` at the returned parameters.
    pub ortho_defect: f64,
    /// Defect before each Newton update, ending with the final defect.
    pub defect_history: Vec<f64>,
}

impl ModulationState {
    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    pub fn params(&self) -> Vec<SolitonParams> {
        self.speeds
            .iter()
            .zip(&self.centers)
            .map(|(&c, &x)| SolitonParams::new(c, x).expect("fitted speeds are positive"))
            .collect()
    }

    pub fn train(&self) -> Result<SolitonTrain> {
        SolitonTrain::new(self.params())
    }

    pub fn eps_l2(&self) -> f64 {
        self.residual.l2_norm()
    }

    pub fn eps_h12(&self) -> f64 {
        sobolev_norm(&self.residual, 0.5).expect("s = 1/2 is valid")
    }
}

// Closed-form profile and its derivatives sampled on the grid.
struct Basis {
    r: Vec<f64>,
    rx: Vec<f64>,
    rxx: Vec<f64>,
    rc: Vec<f64>,
    rcx: Vec<f64>,
}

impl Basis {
    fn new(grid: &Grid, p: &SolitonParams) -> Self {
        let n = grid.n();
        let mut b = Basis {
            r: Vec::with_capacity(n),
            rx: Vec::with_capacity(n),
            rxx: Vec::with_capacity(n),
            rc: Vec::with_capacity(n),
            rcx: Vec::with_capacity(n),
        };
        for x in grid.points() {
            b.r.push(p.value(x));
            b.rx.push(p.d_dx(x));
            b.rxx.push(p.d2_dx2(x));
            b.rc.push(p.d_dc(x));
            b.rcx.push(p.d_dc_dx(x));
        }
        b
    }
}

fn dot(h: f64, a: &[f64], b: &[f64]) -> f64 {
    h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

fn residual_samples(u: &RealField, bases: &[Basis]) -> Vec<f64> {
    let mut w = u.samples().to_vec();
    for b in bases {
        for (wi, ri) in w.iter_mut().zip(&b.r) {
            *wi -= ri;
        }
    }
    w
}

fn map_from(h: f64, bases: &[Basis], w: &[f64]) -> Vec<f64> {
    let k = bases.len();
    let mut f = vec![0.0; 2 * k];
    for (j, b) in bases.iter().enumerate() {
        f[j] = dot(h, &b.r, w);
        f[k + j] = dot(h, &b.rx, w);
    }
    f
}

fn jacobian_from(h: f64, bases: &[Basis], w: &[f64]) -> DMatrix<f64> {
    let k = bases.len();
    let mut jac = DMatrix::zeros(2 * k, 2 * k);
    for (j, bj) in bases.iter().enumerate() {
        for (m, bm) in bases.iter().enumerate() {
            // d/dy_m R_m = -d/dx R_m
            jac[(j, m)] = dot(h, &bj.r, &bm.rx);
            jac[(j, k + m)] = -dot(h, &bj.r, &bm.rc);
            jac[(k + j, m)] = dot(h, &bj.rx, &bm.rx);
            jac[(k + j, k + m)] = -dot(h, &bj.rx, &bm.rc);
        }
        jac[(j, j)] -= dot(h, &bj.rx, w);
        jac[(j, k + j)] += dot(h, &bj.rc, w);
        jac[(k + j, j)] -= dot(h, &bj.rxx, w);
        jac[(k + j, k + j)] += dot(h, &bj.rcx, w);
    }
    jac
}

/// `F(u, y, c) = ((R_j, u - R))_j ++ ((d/dx R_j, u - R))_j`.
pub fn orthogonality_map(u: &RealField, params: &[SolitonParams]) -> Vec<f64> {
    let bases: Vec<Basis> = params.iter().map(|p| Basis::new(u.grid(), p)).collect();
    let w = residual_samples(u, &bases);
    map_from(u.grid().spacing(), &bases, &w)
}

/// Exact derivative of [`orthogonality_map`] with respect to `(y_1..y_K, c_1..c_K)`.
///
/// At `u = R` for well separated solitons this is close to
/// `pi [[0, -I], [diag(c^3), 0]]`.
pub fn modulation_jacobian(u: &RealField, train: &SolitonTrain) -> DMatrix<f64> {
    jacobian_at(u, train.params())
}

pub fn jacobian_at(u: &RealField, params: &[SolitonParams]) -> DMatrix<f64> {
    let bases: Vec<Basis> = params.iter().map(|p| Basis::new(u.grid(), p)).collect();
    let w = residual_samples(u, &bases);
    jacobian_from(u.grid().spacing(), &bases, &w)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton solve of the orthogonality conditions starting from `guess`.
pub fn decompose(u: &RealField, guess: &SolitonTrain, tol: f64) -> Result<ModulationState> {
    if guess.is_empty() {
        return Err(Error::invalid("decomposition needs at least one soliton"));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be > 0, got {tol}")));
    }
    let grid = u.grid();
    let h = grid.spacing();
    let k = guess.len();
    let mut y = guess.centers();
    let mut c = guess.speeds();
    let mut history = Vec::new();

    let eval = |y: &[f64], c: &[f64]| -> Option<(Vec<Basis>, Vec<f64>, Vec<f64>)> {
        let params: Vec<SolitonParams> = y
            .iter()
            .zip(c)
            .map(|(&x, &s)| SolitonParams::new(s, x))
            .collect::<Result<_>>()
            .ok()?;
        let bases: Vec<Basis> = params.iter().map(|p| Basis::new(grid, p)).collect();
        let w = residual_samples(u, &bases);
        let f = map_from(h, &bases, &w);
        Some((bases, w, f))
    };

    let (mut bases, mut w, mut f) =
        eval(&y, &c).ok_or_else(|| Error::invalid("guess has non-positive speed"))?;
    let mut defect = max_abs(&f);
    history.push(defect);
    let mut iterations = 0;
    while defect > tol {
        if iterations == MAX_ITERATIONS {
            return Err(Error::TrackingLost(format!(
                "Newton did not converge in {MAX_ITERATIONS} iterations (defect {defect:e})"
            )));
        }
        iterations += 1;
        let jac = jacobian_from(h, &bases, &w);
        let sv = jac.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 1e-12 * smax) {
            return Err(Error::Degenerate(format!(
                "modulation Jacobian is numerically singular (singular values {smin:e} .. {smax:e})"
            )));
        }
        let rhs = DVector::from_iterator(2 * k, f.iter().map(|v| -v));
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("modulation Jacobian is singular".into()))?;

        // Backtrack until the defect decreases and speeds stay positive.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let ty: Vec<f64> = (0..k).map(|j| y[j] + step * delta[j]).collect();
            let tc: Vec<f64> = (0..k).map(|j| c[j] + step * delta[k + j]).collect();
            if let Some(next) = eval(&ty, &tc) {
                let d = max_abs(&next.2);
                if d < defect || d <= tol {
                    accepted = Some((ty, tc, next, d));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((ty, tc, next, d)) = accepted else {
            return Err(Error::TrackingLost(format!(
                "Newton line search stalled at defect {defect:e}"
            )));
        };
        y = ty;
        c = tc;
        (bases, w, f) = next;
        defect = d;
        history.push(defect);
    }

    Ok(ModulationState {
        speeds: c,
        centers: y,
        residual: RealField::from_samples(grid, w)?,
        ortho_defect: defect,
        defect_history: history,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackOptions {
    pub tol: f64,
    /// Tracking counts as lost once consecutive centers come closer than this (L/2).
    pub min_separation: Option<f64>,
    /// Radius (sqrt(alpha)) of the closeness regime; leaving it is flagged, not fatal.
    pub regime_radius: Option<f64>,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions {
            tol: DEFAULT_TOL,
            min_separation: None,
            regime_radius: None,
        }
    }
}

/// Fitted modulation parameters over a trajectory's recorded times.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulationSeries {
    pub times: Vec<f64>,
    pub speeds: Vec<Vec<f64>>,
    pub centers: Vec<Vec<f64>>,
    pub eps_l2: Vec<f64>,
    pub eps_h12: Vec<f64>,
    pub ortho_defects: Vec<f64>,
    /// Finite-difference `dx_j/dt`.
    pub center_rates: Vec<Vec<f64>>,
    /// Finite-difference `dc_j/dt`.
    pub speed_rates: Vec<Vec<f64>>,
    /// First recorded time at which the fit failed, if any; the series stops before it.
    pub lost_at: Option<f64>,
    pub lost_reason: Option<String>,
    /// First time the fitted `||eps||_{H^{1/2}}` reached `regime_radius`.
    pub regime_exit: Option<f64>,
}

impl ModulationSeries {
    pub fn tracking_ok(&self) -> bool {
        self.lost_at.is_none()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Warm-started decomposition at each recorded time.
pub fn track(traj: &Trajectory, initial_guess: &SolitonTrain, tol: f64) -> Result<ModulationSeries> {
    track_with(
        traj,
        initial_guess,
        &TrackOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn track_with(
    traj: &Trajectory,
    initial_guess: &SolitonTrain,
    opts: &TrackOptions,
) -> Result<ModulationSeries> {
    let k = initial_guess.len();
    let mut series = ModulationSeries {
        times: Vec::new(),
        speeds: Vec::new(),
        centers: Vec::new(),
        eps_l2: Vec::new(),
        eps_h12: Vec::new(),
        ortho_defects: Vec::new(),
        center_rates: Vec::new(),
        speed_rates: Vec::new(),
        lost_at: None,
        lost_reason: None,
        regime_exit: None,
    };
    let mut guess = initial_guess.clone();
    let mut prev_time = traj.times.first().copied().unwrap_or(0.0);
    for (i, (&t, u)) in traj.times.iter().zip(&traj.snapshots).enumerate() {
        if i > 0 {
            let dt = t - prev_time;
            let last = series.speeds.len() - 1;
            let advanced: Vec<SolitonParams> = series.speeds[last]
                .iter()
                .zip(&series.centers[last])
                .map(|(&c, &x)| SolitonParams::new(c, x + dt * c))
                .collect::<Result<_>>()?;
            guess = match SolitonTrain::new(advanced) {
                Ok(g) => g,
                Err(e) => {
                    series.lost_at = Some(t);
                    series.lost_reason = Some(e.to_string());
                    break;
                }
            };
        }
        let fit = match decompose(u, &guess, opts.tol) {
            Ok(fit) => fit,
            Err(e) if i == 0 => return Err(e),
            Err(e) => {
                series.lost_at = Some(t);
                series.lost_reason = Some(e.to_string());
                break;
            }
        };
        if let Err(reason) = check_fit(&fit, opts) {
            if i == 0 {
                return Err(Error::TrackingLost(reason));
            }
            series.lost_at = Some(t);
            series.lost_reason = Some(reason);
            break;
        }
        let h12 = fit.eps_h12();
        if let (Some(r), None) = (opts.regime_radius, series.regime_exit) {
            if h12 >= r {
                series.regime_exit = Some(t);
            }
        }
        series.times.push(t);
        series.eps_l2.push(fit.eps_l2());
        series.eps_h12.push(h12);
        series.ortho_defects.push(fit.ortho_defect);
        series.speeds.push(fit.speeds);
        series.centers.push(fit.centers);
        prev_time = t;
    }
    series.center_rates = finite_difference(&series.times, &series.centers, k);
    series.speed_rates = finite_difference(&series.times, &series.speeds, k);
    Ok(series)
}

fn check_fit(fit: &ModulationState, opts: &TrackOptions) -> std::result::Result<(), String> {
    for w in fit.centers.windows(2) {
        let gap = w[1] - w[0];
        if gap <= 0.0 {
            return Err("fitted centers are no longer ordered".into());
        }
        if let Some(min) = opts.min_separation {
            if gap < min {
                return Err(format!("fitted centers {gap} apart, below {min}"));
            }
        }
    }
    Ok(())
}

/// Central differences inside, one-sided at the ends; zeros for a single sample.
pub fn finite_difference(times: &[f64], values: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let m = times.len();
    (0..m)
        .map(|i| {
            if m < 2 {
                return vec![0.0; k];
            }
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == m - 1 {
                (m - 2, m - 1)
            } else {
                (i - 1, i + 1)
            };
            let dt = times[b] - times[a];
            (0..k).map(|j| (values[b][j] - values[a][j]) / dt).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::soliton_sum;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(256.0, 2048).unwrap()
    }

    #[test]
    fn exact_sum_is_a_fixed_point() {
        let g = grid();
        let train = SolitonTrain::from_speeds_and_centers(&[1.0, 2.0], &[-30.0, 20.0]).unwrap();
        let u = soliton_sum(&g, &train);
        let fit = decompose(&u, &train, 1e-10).unwrap();
        assert_eq!(fit.speeds, train.speeds());
        assert_eq!(fit.centers, train.centers());
        assert!(fit.residual.max_abs() < 1e-14);
        assert_eq!(fit.defect_history.len(), 1);
    }

    #[test]
    fn recovers_shift() {
        let g = grid();
        let truth = SolitonParams::new(1.0, 0.3).unwrap();
        let u = soliton_sum(&g, &SolitonTrain::single(truth));
        let guess = SolitonTrain::single(SolitonParams::new(1.0, 0.0).unwrap());
        let fit = decompose(&u, &guess, 1e-10).unwrap();
        assert!((fit.centers[0] - 0.3).abs() < 1e-10);
        assert!((fit.speeds[0] - 1.0).abs() < 1e-10);
        assert!(fit.eps_l2() < 1e-9);
        assert!(fit.ortho_defect <= 1e-10);
    }

    #[test]
    fn jacobian_block_structure() {
        let g = grid();
        for &c in &[1.0, 2.0] {
            let train = SolitonTrain::single(SolitonParams::new(c, 0.0).unwrap());
            let u = soliton_sum(&g, &train);
            let j = modulation_jacobian(&u, &train);
            assert!(j[(0, 0)].abs() < 1e-10);
            assert!((j[(0, 1)] + PI).abs() < 2e-2);
            assert!((j[(1, 0)] - PI * c * c * c).abs() < 2e-2 * c * c * c);
            assert!(j[(1, 1)].abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_empty_guess_and_bad_tol() {
        let g = grid();
        let u = RealField::zeros(&g);
        assert!(decompose(&u, &SolitonTrain::default(), 1e-10).is_err());
        let guess = SolitonTrain::single(SolitonParams::new(1.0, 0.0).unwrap());
        assert!(decompose(&u, &guess, 0.0).is_err());
    }

    #[test]
    fn far_off_guess_loses_tracking() {
        // A zero field has no soliton to lock onto.
        let g = grid();
        let u = RealField::zeros(&g);
        let guess = SolitonTrain::single(SolitonParams::new(1.0, 0.0).unwrap());
        match decompose(&u, &guess, 1e-10) {
            Err(Error::TrackingLost(_)) | Err(Error::Degenerate(_)) => {}
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn finite_differences_of_linear_motion() {
        let times = vec![0.0, 0.5, 1.0, 2.0];
        let values: Vec<Vec<f64>> = times.iter().map(|t| vec![3.0 * t + 1.0]).collect();
        let d = finite_difference(&times, &values, 1);
        for row in d {
            assert!((row[0] - 3.0).abs() < 1e-12);
        }
        assert_eq!(finite_difference(&[0.0], &[vec![1.0]], 1), vec![vec![0.0]]);
    }
}
