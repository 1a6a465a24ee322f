//! Closed-form localization of pair generation and the erf fit of solver
//! profiles against it.
//!
//! Without loss, dispersion and nonlinear phases, the generation rate is the
//! time overlap of the two pump intensities, a Gaussian in z centred on the
//! match point. The cumulative probability is therefore an erf.

use std::f64::consts::{LN_2, PI, SQRT_2};

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{Dyn, Matrix, OMatrix, OVector, Owned, Vector3, U3};
use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::jta::XiProfile;
use crate::model::{derive_run_params, SourceConfig};

/// Number of fitted standard deviations that must fit inside the waveguide
/// after the match point for the profile to count as saturated.
pub const PLATEAU_MARGIN: f64 = 2.5;

/// Pump collision geometry in the laboratory frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Collision {
    /// Group velocities of pump 1 and pump 2 (m/s).
    pub v1: f64,
    pub v2: f64,
    /// Spatial intensity widths v_q T0 / (2 sqrt(ln 2)) (m).
    pub sigma1: f64,
    pub sigma2: f64,
    pub l_match: f64,
    /// Standard deviation of the generation rate along z (m).
    pub sigma_z: f64,
}

impl Collision {
    pub fn new(cfg: &SourceConfig) -> Self {
        let t0 = cfg.pump.t0_fwhm;
        let lwp = cfg.dispersion.walkoff_length.p2;
        let v1 = cfg.dispersion.group_velocity.p1;
        let v2 = 1.0 / (1.0 / v1 + t0 / lwp);
        let width = |v: f64| v * t0 / (2.0 * LN_2.sqrt());
        Self {
            v1,
            v2,
            sigma1: width(v1),
            sigma2: width(v2),
            l_match: derive_run_params(cfg).l_match,
            sigma_z: lwp / (2.0 * LN_2.sqrt()),
        }
    }

    /// FWHM of the generation rate, sqrt(2) L_w,p.
    pub fn delta_z(&self) -> f64 {
        2.0 * (2.0 * LN_2).sqrt() * self.sigma_z
    }
}

/// Position and pump-frame time (both dimensionless, T0 units for time) at
/// which a pair detected at (T_s, T_i) was born, for a source without
/// dispersion or nonlinear phases.
pub fn collision_point(cfg: &SourceConfig, t_s: f64, t_i: f64) -> (f64, f64) {
    let w = &cfg.dispersion.walkoff_length;
    let (rs, ri) = (1.0 / w.s, 1.0 / w.i);
    let z_c = cfg.geometry.length - (t_s - t_i) / (rs - ri);
    let t_c = (rs * t_i - ri * t_s) / (rs - ri);
    (z_c, t_c)
}

fn erf_shape(z: f64, l_match: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + erf((z - l_match) / (SQRT_2 * sigma)))
}

/// Analytic cumulative generation probability normalized to a unit plateau.
pub fn erf_xi_profile(cfg: &SourceConfig, z_nodes: &[f64]) -> Vec<f64> {
    let c = Collision::new(cfg);
    z_nodes
        .iter()
        .map(|&z| erf_shape(z, c.l_match, c.sigma_z))
        .collect()
}

/// Divide out the Signal/Idler loss accumulated after the match point.
pub fn loss_correct(xi: &[f64], z_nodes: &[f64], alpha: f64, l_match: f64) -> Vec<f64> {
    xi.iter()
        .zip(z_nodes)
        .map(|(x, z)| x * (alpha * (z - l_match).max(0.0)).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErfFit {
    pub plateau: f64,
    pub l_match_fit: f64,
    pub sigma_z_fit: f64,
    pub delta_z_fwhm: f64,
    /// RMS of the residuals divided by the plateau.
    pub rms_residual: f64,
    /// False when the profile does not saturate inside the waveguide or the
    /// minimizer did not converge.
    pub reliable: bool,
}

/// Residuals in units of the profile maximum, lengths in units of the last
/// node, so that all three parameters are of order one.
struct ErfProblem<'a> {
    z: &'a [f64],
    y: &'a [f64],
    p: Vector3<f64>,
}

impl ErfProblem<'_> {
    fn parts(&self) -> (f64, f64, f64) {
        (self.p[0], self.p[1], self.p[2].abs().max(1e-12))
    }
}

impl LeastSquaresProblem<f64, Dyn, U3> for ErfProblem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U3>;
    type ParameterStorage = Owned<f64, U3>;

    fn set_params(&mut self, x: &Vector3<f64>) {
        self.p = *x;
    }

    fn params(&self) -> Vector3<f64> {
        self.p
    }

    fn residuals(&self) -> Option<OVector<f64, Dyn>> {
        let (a, m, s) = self.parts();
        Some(OVector::<f64, Dyn>::from_iterator(
            self.z.len(),
            self.z
                .iter()
                .zip(self.y)
                .map(|(&z, &y)| a * erf_shape(z, m, s) - y),
        ))
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U3>> {
        let (a, m, s) = self.parts();
        let sign = if self.p[2] < 0.0 { -1.0 } else { 1.0 };
        let mut jac = Matrix::<f64, Dyn, U3, _>::zeros(self.z.len());
        for (r, &z) in self.z.iter().enumerate() {
            let u = (z - m) / (SQRT_2 * s);
            let g = (-u * u).exp() / PI.sqrt();
            jac[(r, 0)] = erf_shape(z, m, s);
            jac[(r, 1)] = -a * g / (SQRT_2 * s);
            jac[(r, 2)] = -a * g * u / s * sign;
        }
        Some(jac)
    }
}

/// Least-squares fit of plateau * (1 + erf((z - L_match) / (sqrt 2 sigma))) / 2.
pub fn fit_erf(z_nodes: &[f64], xi: &[f64]) -> Result<ErfFit> {
    if z_nodes.len() != xi.len() {
        return Err(Error::Fit(format!(
            "{} positions for {} samples",
            z_nodes.len(),
            xi.len()
        )));
    }
    if xi.len() < 4 {
        return Err(Error::Fit("at least four samples are needed".into()));
    }
    if xi.iter().any(|x| !x.is_finite()) || z_nodes.iter().any(|z| !z.is_finite()) {
        return Err(Error::Fit("non-finite samples".into()));
    }
    let y_max = xi.iter().cloned().fold(0.0, f64::max);
    let z_len = z_nodes.iter().cloned().fold(0.0, f64::max);
    if y_max <= 0.0 || z_len <= 0.0 {
        return Err(Error::Fit("profile is identically zero".into()));
    }
    let z: Vec<f64> = z_nodes.iter().map(|v| v / z_len).collect();
    let y: Vec<f64> = xi.iter().map(|v| v / y_max).collect();

    // Start from the quantiles of the normalized profile.
    let crossing = |level: f64| {
        z.iter()
            .zip(&y)
            .find(|(_, v)| **v >= level)
            .map_or(1.0, |(z, _)| *z)
    };
    let (lo, mid, hi) = (crossing(0.16), crossing(0.5), crossing(0.84));
    let sigma0 = (0.5 * (hi - lo)).max(2.0 / z.len() as f64);
    let problem = ErfProblem {
        z: &z,
        y: &y,
        p: Vector3::new(1.0, mid, sigma0),
    };
    let (solved, report) = LevenbergMarquardt::new()
        .with_patience(200)
        .minimize(problem);
    let (a, m, s) = solved.parts();
    if !(a.is_finite() && m.is_finite() && s.is_finite()) {
        return Err(Error::Fit(format!(
            "minimizer diverged ({:?})",
            report.termination
        )));
    }
    let rms = (y
        .iter()
        .zip(&z)
        .map(|(v, &zz)| (a * erf_shape(zz, m, s) - v).powi(2))
        .sum::<f64>()
        / y.len() as f64)
        .sqrt();

    let (l_match, sigma) = (m * z_len, s * z_len);
    let saturates = l_match + PLATEAU_MARGIN * sigma <= z_len * (1.0 + 1e-9);
    Ok(ErfFit {
        plateau: a * y_max,
        l_match_fit: l_match,
        sigma_z_fit: sigma,
        delta_z_fwhm: 2.0 * (2.0 * LN_2).sqrt() * sigma,
        rms_residual: rms / a.abs().max(f64::MIN_POSITIVE),
        reliable: report.termination.was_successful() && saturates,
    })
}

/// Loss-correct a solver profile about the analytic match point and fit it.
pub fn fit_generation_profile(cfg: &SourceConfig, profile: &XiProfile) -> Result<ErfFit> {
    let p = derive_run_params(cfg);
    let corrected = loss_correct(
        &profile.xi,
        &profile.z_nodes,
        p.alpha_s + p.alpha_i,
        p.l_match,
    );
    fit_erf(&profile.z_nodes, &corrected)
}

/// Rows of (z / L, solver profile, fitted erf) for plotting.
pub fn overlay(profile: &XiProfile, fit: &ErfFit, length: f64) -> Vec<[f64; 3]> {
    profile
        .z_nodes
        .iter()
        .zip(&profile.xi)
        .map(|(&z, &x)| {
            [
                z / length,
                x,
                fit.plateau * erf_shape(z, fit.l_match_fit, fit.sigma_z_fit),
            ]
        })
        .collect()
}
