use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    assemble_h, constrained_gap, eigen_spectrum, gamma_from_kk, lambda_minus, lambda_plus,
    projection_kk, ClosedForm,
};
use crate::error::Result;
use crate::lyapunov::{weight_phi, WeightConfig};
use crate::modulation::modulation_jacobian;
use crate::soliton::{
    cubic_integral, energy, f_functional, mass, soliton_profile, soliton_residual, SolitonParams,
    SolitonTrain,
};
use crate::spectral::{abs_derivative, derivative, hilbert, Grid, RealField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Box for the quadrature and modulation checks.
    pub domain_length: f64,
    pub n: usize,
    /// Box and size of the dense spectral checks.
    pub analysis_domain_length: f64,
    pub analysis_n: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            domain_length: 256.0,
            n: 4096,
            analysis_domain_length: 256.0,
            analysis_n: 1024,
        }
    }
}

impl VerifyOptions {
    /// Same spacings as the default on a box of the given length.
    pub fn with_domain_length(domain_length: f64) -> Self {
        let d = VerifyOptions::default();
        let ratio = domain_length / d.domain_length;
        let scale = |n: usize| ((n as f64 * ratio).round() as usize).next_power_of_two().max(16);
        VerifyOptions {
            domain_length,
            n: scale(d.n),
            analysis_domain_length: domain_length,
            analysis_n: scale(d.analysis_n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    /// `|measured - expected| <= tolerance`, or the one-sided bound named by `kind`.
    pub tolerance: f64,
    pub kind: CheckKind,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Within,
    AtLeast,
    AtMost,
}

impl Check {
    fn within(name: &str, measured: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            expected,
            tolerance,
            kind: CheckKind::Within,
            passed: (measured - expected).abs() <= tolerance,
        }
    }

    /// `measured >= expected - tolerance`.
    fn at_least(name: &str, measured: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            expected,
            tolerance,
            kind: CheckKind::AtLeast,
            passed: measured >= expected - tolerance,
        }
    }

    /// `measured <= expected + tolerance`.
    fn at_most(name: &str, measured: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            expected,
            tolerance,
            kind: CheckKind::AtMost,
            passed: measured <= expected + tolerance,
        }
    }

    /// Distance to failure; negative when failed.
    pub fn margin(&self) -> f64 {
        match self.kind {
            CheckKind::Within => self.tolerance - (self.measured - self.expected).abs(),
            CheckKind::AtLeast => self.measured - (self.expected - self.tolerance),
            CheckKind::AtMost => self.expected + self.tolerance - self.measured,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub options: VerifyOptions,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
}

impl VerificationSummary {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Residual tolerance for `D Q + Q - Q^2` on the default box. The periodic `D`
/// annihilates the mean while `Q - Q^2` keeps a box-truncation mean near
/// `-8/P^2`, so the residual cannot fall below about `8 P^{-3/2}`.
pub const SOLITON_RESIDUAL_TOL: f64 = 2.5e-3;

/// Runs every identity check. Failures are results, not errors.
pub fn run_verification_suite(opts: &VerifyOptions) -> Result<VerificationSummary> {
    let grid = Grid::new(opts.domain_length, opts.n)?;
    let agrid = Grid::new(opts.analysis_domain_length, opts.analysis_n)?;
    let unit = SolitonParams::new(1.0, 0.0)?;
    let q = soliton_profile(&grid, &unit);
    let mut checks = vec![
        Check::within("mass_Q", mass(&q), PI, 2e-2),
        Check::within("energy_Q", energy(&q), -PI / 2.0, 2e-2),
        Check::within("cubic_Q", cubic_integral(&q), 3.0 * PI, 5e-2),
        Check::within("Q_DQ", q.dot(&abs_derivative(&q))?, PI, 2e-2),
        Check::at_most("soliton_residual", soliton_residual(&grid, &unit), 0.0, SOLITON_RESIDUAL_TOL),
    ];
    for c in [0.8, 0.9, 1.1, 1.2] {
        let qc = soliton_profile(&grid, &SolitonParams::new(c, 0.0)?);
        let diff = f_functional(&q, 1.0) - f_functional(&qc, 1.0);
        checks.push(Check::within(
            &format!("F_difference_c{c}"),
            diff,
            0.5 * PI * (c - 1.0) * (c - 1.0),
            1e-3,
        ));
    }

    let smooth = RealField::from_fn(&grid, |x| (-(x / 3.0).powi(2)).exp() * (1.0 + 0.3 * (0.7 * x).sin()))?;
    let lhs = hilbert(&derivative(&smooth));
    let rhs = abs_derivative(&smooth);
    let defect = lhs.add(&rhs)?.l2_norm() / rhs.l2_norm();
    checks.push(Check::at_most("hilbert_dx_plus_D", defect, 0.0, 1e-12));

    let train = SolitonTrain::single(unit);
    let jac = modulation_jacobian(&q, &train);
    let expected = [[0.0, -PI], [PI, 0.0]];
    let jac_err = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (jac[(i, j)] - expected[i][j]).abs())
        .fold(0.0, f64::max);
    checks.push(Check::at_most("jacobian_K1", jac_err, 0.0, 2e-2));
    let det = jac.determinant();
    checks.push(Check::within("jacobian_K1_det", det, PI * PI, 2e-2 * PI * PI));

    let l = 40.0;
    let centers = [-0.25 * opts.domain_length, -0.25 * opts.domain_length + l + 1.0, -0.25 * opts.domain_length + 2.0 * (l + 1.0)];
    let wcfg = WeightConfig::new(0.8, l, &[1.0, 1.5, 2.0], &centers)?;
    let mut partition_err = 0.0_f64;
    for t in [0.0, 3.0, 10.0] {
        let mut sum = RealField::zeros(&grid);
        for k in 0..3 {
            sum = sum.add(&weight_phi(k, t, &grid, &wcfg)?)?;
        }
        partition_err = partition_err.max(sum.samples().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max));
    }
    checks.push(Check::at_most("phi_partition", partition_err, 0.0, 1e-14));

    let kk = projection_kk();
    checks.push(Check::within("kk_closed_form", kk, 0.5 - 1.0 / 5f64.sqrt(), 1e-4));
    checks.push(Check::within("gamma_from_kk", gamma_from_kk(kk), 0.5, 1e-3));

    let h = assemble_h(&agrid, 1.0, 0.0)?;
    let spec = eigen_spectrum(&h, 3)?;
    let targets = [lambda_minus(), 0.0, lambda_plus()];
    let names = ["lambda_minus", "lambda_zero", "lambda_plus"];
    for ((name, target), value) in names.iter().zip(targets).zip(&spec.eigenvalues) {
        checks.push(Check::within(name, *value, target, 1e-3));
    }
    let forms = [ClosedForm::Minus, ClosedForm::Zero, ClosedForm::Plus];
    let overlap_names = ["overlap_phi_minus", "overlap_phi_zero", "overlap_phi_plus"];
    if let Some(ov) = &spec.overlaps {
        for (i, (form, name)) in forms.iter().zip(overlap_names).enumerate() {
            let idx = ClosedForm::ALL.iter().position(|f| f == form).unwrap();
            checks.push(Check::at_least(name, ov[i][idx], 0.999, 0.0));
        }
    }
    if let Some(kk) = spec.measured_kk {
        checks.push(Check::within("kk_measured", kk, 0.5 - 1.0 / 5f64.sqrt(), 1e-3));
    }

    let qa = soliton_profile(&agrid, &unit);
    let qax = derivative(&qa);
    let gap0 = constrained_gap(&h, &[qa.clone(), qax.clone()], 0.0)?;
    checks.push(Check::at_least("gap_L2", gap0, 0.5, 1e-2));
    let gap_half = constrained_gap(&h, &[qa.clone(), qax.clone()], 0.5)?;
    checks.push(Check::at_least("gap_H_half", gap_half, 1.0 / 9.0, 1e-2));
    let gap_no_q = constrained_gap(&h, &[qax], 0.0)?;
    checks.push(Check::within("gap_without_Q", gap_no_q, lambda_minus(), 1e-3));

    let failed = checks.iter().filter(|c| !c.passed).count();
    Ok(VerificationSummary {
        options: opts.clone(),
        passed: checks.len() - failed,
        failed,
        checks,
    })
}
