//! Scalar and profile metrics of a generated joint amplitude.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jta::{Domain, JointAmplitude, SpectralMap};
use crate::model::{DispersionSet, SourceConfig, CONSTANTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub xi: f64,
    pub purity: f64,
    pub schmidt_number: f64,
    /// Mean wavelength shifts of Signal and Idler (m).
    pub dlam_s: f64,
    pub dlam_i: f64,
    /// Arrival-time moments relative to pump 1 (s).
    pub arrival_mean_s: f64,
    pub arrival_mean_i: f64,
    pub arrival_std_s: f64,
    pub arrival_std_i: f64,
    /// lambda_i - lambda_i,EC (m).
    pub ec_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArrivalTimes {
    pub mean_s: f64,
    pub mean_i: f64,
    pub std_s: f64,
    pub std_i: f64,
}

pub fn jta_to_jsa(phi: &JointAmplitude) -> Result<JointAmplitude> {
    phi.expect_domain(Domain::Time)?;
    Ok(phi.transformed())
}

pub fn jsa_to_jta(phi: &JointAmplitude) -> Result<JointAmplitude> {
    phi.expect_domain(Domain::Frequency)?;
    Ok(phi.transformed())
}

/// Marginal densities over the row (Signal) and column (Idler) coordinate.
pub fn marginals(phi: &JointAmplitude) -> (Vec<f64>, Vec<f64>) {
    let n = phi.n();
    let step = phi.cell().sqrt();
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; n];
    for (r, row) in phi.values.chunks_exact(n).enumerate() {
        for (c, v) in row.iter().enumerate() {
            let p = v.norm_sqr() * step;
            rows[r] += p;
            cols[c] += p;
        }
    }
    (rows, cols)
}

fn moments(axis: &[f64], density: &[f64]) -> (f64, f64) {
    let total: f64 = density.iter().sum();
    let mean = axis.iter().zip(density).map(|(x, p)| x * p).sum::<f64>() / total;
    let var = axis
        .iter()
        .zip(density)
        .map(|(x, p)| (x - mean).powi(2) * p)
        .sum::<f64>()
        / total;
    (mean, var.max(0.0).sqrt())
}

fn nonzero(phi: &JointAmplitude, what: &'static str) -> Result<()> {
    if phi.values.iter().all(|v| v.norm_sqr() == 0.0) {
        Err(Error::ZeroField(what))
    } else {
        Ok(())
    }
}

/// Sum of the fourth powers of the normalised singular values.
pub fn heralded_purity(phi: &JointAmplitude) -> Result<f64> {
    nonzero(phi, "purity")?;
    let n = phi.n();
    let m = DMatrix::<Complex64>::from_row_slice(n, n, &phi.values);
    let sv = m.singular_values();
    let total: f64 = sv.iter().map(|s| s * s).sum();
    Ok(sv.iter().map(|s| (s * s / total).powi(2)).sum())
}

/// Mean dimensionless detunings (<w_s>, <w_i>) of a joint spectrum.
pub fn mean_detunings(phi: &JointAmplitude) -> Result<(f64, f64)> {
    phi.expect_domain(Domain::Frequency)?;
    nonzero(phi, "mean detuning")?;
    let (ms, mi) = marginals(phi);
    Ok((
        moments(&phi.grid.w_axis, &ms).0,
        moments(&phi.grid.w_axis, &mi).0,
    ))
}

fn detuning_to_wavelength(lambda: f64, w: f64, t0: f64) -> f64 {
    -lambda * lambda / (2.0 * PI * CONSTANTS.c) * w / t0
}

/// Mean wavelength shifts (dlam_s, dlam_i) about the reference wavelengths.
pub fn mean_shift(phi: &JointAmplitude, disp: &DispersionSet) -> Result<(f64, f64)> {
    let (ws, wi) = mean_detunings(phi)?;
    Ok((
        detuning_to_wavelength(disp.signal_wavelength, ws, phi.t0),
        detuning_to_wavelength(disp.idler_wavelength, wi, phi.t0),
    ))
}

/// Mean and spread of the Signal and Idler arrival times (s), relative to
/// the pump 1 peak.
pub fn arrival_times(phi: &JointAmplitude) -> Result<ArrivalTimes> {
    phi.expect_domain(Domain::Time)?;
    nonzero(phi, "arrival time")?;
    let (ms, mi) = marginals(phi);
    let (a, sa) = moments(&phi.grid.t_axis, &ms);
    let (b, sb) = moments(&phi.grid.t_axis, &mi);
    Ok(ArrivalTimes {
        mean_s: (a - phi.pump1_center) * phi.t0,
        mean_i: (b - phi.pump1_center) * phi.t0,
        std_s: sa * phi.t0,
        std_i: sb * phi.t0,
    })
}

/// Arrival times of a pair born where the pumps meet:
/// T_s,i = (+-L_w,p tau -+ T0 L) / |L_w,s,i|, in seconds.
pub fn analytic_arrival_times(cfg: &SourceConfig) -> (f64, f64) {
    let lwp = cfg.dispersion.walkoff_length.p2;
    let num = lwp * cfg.pump.tau - cfg.pump.t0_fwhm * cfg.geometry.length;
    (
        num / cfg.dispersion.walkoff_length.s.abs(),
        -num / cfg.dispersion.walkoff_length.i.abs(),
    )
}

/// lambda_i - lambda_i,EC, where lambda_i,EC follows from the measured mean
/// Signal wavelength and the fixed pump wavelength, to first order about
/// the reference pair.
pub fn ec_deviation(phi: &JointAmplitude, disp: &DispersionSet) -> Result<f64> {
    let (dls, dli) = mean_shift(phi, disp)?;
    let ratio = disp.idler_wavelength / disp.signal_wavelength;
    Ok(dli + ratio * ratio * dls)
}

/// Idler spectral density at each snapshot, integrated over the Signal
/// frequency. With `normalize`, the map is divided by its maximum.
pub fn spectral_cumulative(snapshots: &[JointAmplitude], normalize: bool) -> Result<SpectralMap> {
    if snapshots.len() < 2 {
        return Err(Error::Config(format!(
            "a spectral map needs at least two snapshots, got {}",
            snapshots.len()
        )));
    }
    let grid = &snapshots[0].grid;
    let mut intensity = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        if s.grid != *grid {
            return Err(Error::GridMismatch("snapshots on different grids".into()));
        }
        intensity.push(marginals(&s.to_domain(Domain::Frequency)).1);
    }
    let max = intensity.iter().flatten().fold(0.0f64, |a, b| a.max(*b));
    if normalize && max > 0.0 {
        intensity.iter_mut().flatten().for_each(|v| *v /= max);
    }
    Ok(SpectralMap {
        z: snapshots.iter().map(|s| s.z).collect(),
        w_axis: grid.w_axis.clone(),
        intensity,
        normalized: normalize && max > 0.0,
    })
}

/// All scalar metrics of a time-domain joint amplitude.
pub fn compute_metrics(phi: &JointAmplitude, cfg: &SourceConfig) -> Result<MetricsReport> {
    let jsa = jta_to_jsa(phi)?;
    let purity = heralded_purity(phi)?;
    let (dlam_s, dlam_i) = mean_shift(&jsa, &cfg.dispersion)?;
    let t = arrival_times(phi)?;
    Ok(MetricsReport {
        xi: phi.norm_sq,
        purity,
        schmidt_number: 1.0 / purity,
        dlam_s,
        dlam_i,
        arrival_mean_s: t.mean_s,
        arrival_mean_i: t.mean_i,
        arrival_std_s: t.std_s,
        arrival_std_i: t.std_i,
        ec_deviation: ec_deviation(&jsa, &cfg.dispersion)?,
    })
}
