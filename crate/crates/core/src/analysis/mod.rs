//! Dense discretizations of the linearized operators `H = D + c - 2Q_c(x - a)`
//! and `H_K`, their spectra, and constrained Rayleigh-quotient minima.
//!
//! Matrices act on sample vectors, so `(f, A g) = spacing * f^T A g` under the
//! quadrature inner product and the plain symmetric eigenproblem applies.

pub mod inequalities;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{hk_potential, WeightConfig};
use crate::modulation::ModulationState;
use crate::soliton::{q, q_prime, soliton_profile, SolitonParams};
use crate::spectral::{circulant_column, Grid, RealField};

/// Dense solves are O(n^3); larger grids are rejected.
pub const MAX_DENSE_N: usize = 2048;

pub fn lambda_minus() -> f64 {
    0.5 * (-1.0 - 5f64.sqrt())
}

pub fn lambda_plus() -> f64 {
    0.5 * (5f64.sqrt() - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OperatorKind {
    /// `D + c - 2 Q_c(x - a)`.
    Soliton { speed: f64, center: f64 },
    /// `H_K` at time `t`.
    Localized { time: f64 },
    /// `D + V` for a caller-supplied potential.
    Potential,
}

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    grid: Grid,
    entries: DMatrix<f64>,
    kind: OperatorKind,
}

impl OperatorMatrix {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn description(&self) -> String {
        match &self.kind {
            OperatorKind::Soliton { speed, center } => {
                format!("D + {speed} - 2Q_c(x - {center}), c = {speed}")
            }
            OperatorKind::Localized { time } => format!("H_K at t = {time}"),
            OperatorKind::Potential => "D + V".to_string(),
        }
    }

    pub fn apply(&self, f: &RealField) -> Result<RealField> {
        self.grid.ensure_same(f.grid())?;
        let v = &self.entries * nalgebra::DVector::from_column_slice(f.samples());
        RealField::from_samples(&self.grid, v.as_slice().to_vec())
    }

    /// `(f, A f)`.
    pub fn quadratic_form(&self, f: &RealField) -> Result<f64> {
        let af = self.apply(f)?;
        f.dot(&af)
    }

    /// `max |A - A^T| / max |A|`.
    pub fn asymmetry(&self) -> f64 {
        let a = &self.entries;
        let scale = a.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (a - a.transpose()).amax() / scale
    }
}

fn check_dense(grid: &Grid) -> Result<()> {
    if grid.n() > MAX_DENSE_N {
        return Err(Error::invalid(format!(
            "dense analysis grid is capped at n = {MAX_DENSE_N}, got {}",
            grid.n()
        )));
    }
    Ok(())
}

fn circulant(grid: &Grid, symbol: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = grid.n();
    let col = circulant_column(grid, symbol);
    DMatrix::from_fn(n, n, |j, l| col[(j + n - l) % n])
}

/// Dense `D` on samples.
pub fn dense_abs_derivative(grid: &Grid) -> Result<DMatrix<f64>> {
    check_dense(grid)?;
    Ok(circulant(grid, f64::abs))
}

/// Gram matrix of the `H^s` norm used by [`crate::spectral::sobolev_norm`]:
/// `||f||_{H^s}^2 = spacing * f^T G f`.
pub fn sobolev_gram(grid: &Grid, s: f64) -> Result<DMatrix<f64>> {
    check_dense(grid)?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("Sobolev index must be >= 0, got {s}")));
    }
    Ok(circulant(grid, |xi| (1.0 + xi.abs()).powf(2.0 * s)))
}

/// `D + diag(V)`.
pub fn assemble_potential(grid: &Grid, potential: &[f64]) -> Result<OperatorMatrix> {
    assemble_with(grid, potential, OperatorKind::Potential)
}

fn assemble_with(grid: &Grid, potential: &[f64], kind: OperatorKind) -> Result<OperatorMatrix> {
    if potential.len() != grid.n() {
        return Err(Error::invalid("potential length does not match the grid"));
    }
    let mut entries = dense_abs_derivative(grid)?;
    for (j, v) in potential.iter().enumerate() {
        entries[(j, j)] += v;
    }
    Ok(OperatorMatrix {
        grid: grid.clone(),
        entries,
        kind,
    })
}

/// `H^{c,a} = D + c - 2 Q_c(x - a)`.
pub fn assemble_h(grid: &Grid, c: f64, center: f64) -> Result<OperatorMatrix> {
    let p = SolitonParams::new(c, center)?;
    let potential: Vec<f64> = grid.points().map(|x| c - 2.0 * p.value(x)).collect();
    assemble_with(
        grid,
        &potential,
        OperatorKind::Soliton {
            speed: c,
            center,
        },
    )
}

/// `H_K = D - 2R + sum_k c_k(t) phi_k` around a fitted train.
pub fn assemble_hk(
    grid: &Grid,
    fit: &ModulationState,
    t: f64,
    cfg: &WeightConfig,
) -> Result<OperatorMatrix> {
    if fit.len() != cfg.len() {
        return Err(Error::invalid("fit and weight configuration disagree on K"));
    }
    let potential = hk_potential(grid, &fit.params(), t, cfg);
    assemble_with(grid, &potential, OperatorKind::Localized { time: t })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosedForm {
    /// `phi_-`, eigenvalue `(-1 - sqrt 5)/2`.
    Minus,
    /// `Q_x / sqrt(pi)`, eigenvalue 0.
    Zero,
    /// `phi_+`, eigenvalue `(sqrt 5 - 1)/2`.
    Plus,
    /// `(x Q + Q_x) / sqrt(pi)`, eigenvalue 1 at the continuum edge.
    One,
}

impl ClosedForm {
    pub const ALL: [ClosedForm; 4] = [
        ClosedForm::Minus,
        ClosedForm::Zero,
        ClosedForm::Plus,
        ClosedForm::One,
    ];

    /// Eigenvalue for speed 1.
    pub fn eigenvalue(self) -> f64 {
        match self {
            ClosedForm::Minus => lambda_minus(),
            ClosedForm::Zero => 0.0,
            ClosedForm::Plus => lambda_plus(),
            ClosedForm::One => 1.0,
        }
    }

    /// Unit-speed profile at `z`.
    pub fn profile(self, z: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let qz = q(z);
        match self {
            ClosedForm::Minus | ClosedForm::Plus => {
                let l = self.eigenvalue();
                let sign = if self == ClosedForm::Plus { 1.0 } else { -1.0 };
                let norm = ((1.0 + sign * 2.0 / 5f64.sqrt()) / pi).sqrt();
                norm * ((1.0 + l) * qz - qz * qz)
            }
            ClosedForm::Zero => q_prime(z) / pi.sqrt(),
            ClosedForm::One => (z * qz + q_prime(z)) / pi.sqrt(),
        }
    }
}

/// Eigenfunction of `H^{c,a}` in closed form, `sqrt(c) phi(c (x - a))`; the
/// eigenvalue is `c * form.eigenvalue()`.
pub fn closed_form_eigenfunction(grid: &Grid, form: ClosedForm, c: f64, center: f64) -> RealField {
    let sc = c.sqrt();
    RealField::from_vec_unchecked(
        grid,
        grid.points().map(|x| sc * form.profile(c * (x - center))).collect(),
    )
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    /// Lowest `m` eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Matching eigenvectors with unit quadrature norm.
    pub eigenvectors: Vec<RealField>,
    /// `||A v - lambda v|| / ||A||` in the Euclidean norm of unit sample vectors.
    pub residuals: Vec<f64>,
    /// `overlaps[i][f]`: `|(v_i, phi_f)|` against the normalized closed form
    /// `ClosedForm::ALL[f]`; present for soliton operators.
    pub overlaps: Option<Vec<[f64; 4]>>,
    /// `(k, k) = 1 - (v_0, Q_c)^2 / (Q_c, Q_c)` from the lowest eigenvector.
    pub measured_kk: Option<f64>,
}

impl SpectrumReport {
    /// Best overlap of any reported eigenvector with `form`.
    pub fn best_overlap(&self, form: ClosedForm) -> Option<f64> {
        let f = form_index(form);
        self.overlaps
            .as_ref()
            .map(|o| o.iter().fold(0.0_f64, |m, row| m.max(row[f])))
    }

    /// Norm of the projection of `form` onto the eigenvectors with eigenvalues in `[lo, hi]`.
    pub fn cluster_overlap(&self, form: ClosedForm, lo: f64, hi: f64) -> Option<f64> {
        let f = form_index(form);
        self.overlaps.as_ref().map(|o| {
            o.iter()
                .zip(&self.eigenvalues)
                .filter(|(_, &l)| l >= lo && l <= hi)
                .map(|(row, _)| row[f] * row[f])
                .sum::<f64>()
                .sqrt()
        })
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(*r))
    }
}

fn form_index(form: ClosedForm) -> usize {
    ClosedForm::ALL.iter().position(|&f| f == form).unwrap()
}

fn symmetric_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let scale = m.amax();
    SymmetricEigen::try_new(m, f64::EPSILON, 200 * n.max(1)).ok_or_else(|| {
        Error::Numerical(format!(
            "symmetric eigensolver did not converge (n = {n}, max |entry| = {scale:e})"
        ))
    })
}

/// Lowest `m` eigenpairs of a dense operator.
pub fn eigen_spectrum(a: &OperatorMatrix, m: usize) -> Result<SpectrumReport> {
    let n = a.grid.n();
    if m > n {
        return Err(Error::invalid(format!("requested {m} eigenpairs of an {n}x{n} matrix")));
    }
    let eig = symmetric_eigen(a.entries.clone())?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    order.truncate(m);

    let norm = a.entries.norm();
    let inv_sqrt_h = 1.0 / a.grid.spacing().sqrt();
    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenvectors = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    for &i in &order {
        let lambda = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i);
        residuals.push((&a.entries * v - v * lambda).norm() / norm);
        eigenvalues.push(lambda);
        eigenvectors.push(RealField::from_vec_unchecked(
            &a.grid,
            v.iter().map(|x| x * inv_sqrt_h).collect(),
        ));
    }

    let (overlaps, measured_kk) = match a.kind {
        OperatorKind::Soliton { speed, center } => {
            let forms: Vec<RealField> = ClosedForm::ALL
                .iter()
                .map(|&f| {
                    let phi = closed_form_eigenfunction(&a.grid, f, speed, center);
                    let nrm = phi.l2_norm();
                    phi.scale(1.0 / nrm).expect("finite closed form")
                })
                .collect();
            let overlaps = eigenvectors
                .iter()
                .map(|v| {
                    let mut row = [0.0; 4];
                    for (r, phi) in row.iter_mut().zip(&forms) {
                        *r = v.dot_unchecked(phi).abs();
                    }
                    row
                })
                .collect();
            let kk = eigenvectors.first().map(|v0| {
                let qc = soliton_profile(&a.grid, &SolitonParams::new(speed, center).unwrap());
                let vq = v0.dot_unchecked(&qc);
                1.0 - vq * vq / (qc.dot_unchecked(&qc) * v0.dot_unchecked(v0))
            });
            (Some(overlaps), kk)
        }
        _ => (None, None),
    };

    Ok(SpectrumReport {
        eigenvalues,
        eigenvectors,
        residuals,
        overlaps,
        measured_kk,
    })
}

/// `min (eps, A eps) / ||eps||_{H^s}^2` over `eps` orthogonal to every constraint.
///
/// The complement is spanned by the trailing Householder directions of a QR
/// factorization of the constraint block; the projected pencil is reduced with
/// a Cholesky factor of the projected Gram matrix.
pub fn constrained_gap(a: &OperatorMatrix, constraints: &[RealField], s: f64) -> Result<f64> {
    let n = a.grid.n();
    let m = constraints.len();
    if m >= n {
        return Err(Error::invalid("too many constraints for the grid"));
    }
    let gram = sobolev_gram(&a.grid, s)?;
    for c in constraints {
        a.grid.ensure_same(c.grid())?;
    }

    let (a_t, g_t) = if m == 0 {
        (a.entries.clone(), gram)
    } else {
        let block = DMatrix::from_fn(n, m, |j, k| constraints[k].samples()[j]);
        let qr = block.qr();
        let r = qr.r();
        let rmax = r.diagonal().amax();
        if r.diagonal().iter().any(|d| d.abs() <= 1e-10 * rmax) || rmax == 0.0 {
            return Err(Error::invalid("constraints are linearly dependent"));
        }
        let project = |mat: &DMatrix<f64>| {
            let mut t = mat.clone();
            qr.q_tr_mul(&mut t);
            t.transpose_mut();
            qr.q_tr_mul(&mut t);
            t.view((m, m), (n - m, n - m)).into_owned()
        };
        (project(&a.entries), project(&gram))
    };

    let chol = g_t.cholesky().ok_or_else(|| {
        Error::invalid(format!("H^{s} Gram matrix is not positive definite on the complement"))
    })?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(&a_t)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let x = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let sym = (&x + x.transpose()) * 0.5;
    let eig = symmetric_eigen(sym)?;
    Ok(eig.eigenvalues.min())
}

/// `(k, k)` for `phi_- = b Q + k`, `k` orthogonal to `Q`, by quadrature on `grid`.
pub fn projection_kk_on(grid: &Grid) -> f64 {
    let phi = closed_form_eigenfunction(grid, ClosedForm::Minus, 1.0, 0.0);
    let qf = soliton_profile(grid, &SolitonParams::new(1.0, 0.0).unwrap());
    let pq = phi.dot_unchecked(&qf);
    phi.dot_unchecked(&phi) - pq * pq / qf.dot_unchecked(&qf)
}

/// [`projection_kk_on`] on a 256-wide box with spacing 1/16.
pub fn projection_kk() -> f64 {
    projection_kk_on(&Grid::new(256.0, 4096).unwrap())
}

/// `lambda_+ - (lambda_+ - lambda_-) (k, k)`.
pub fn gamma_from_kk(kk: f64) -> f64 {
    lambda_plus() - (lambda_plus() - lambda_minus()) * kk
}
