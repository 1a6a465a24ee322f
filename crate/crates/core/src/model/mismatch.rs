use std::f64::consts::PI;

use super::{DispersionSet, MismatchModel, SourceConfig, CONSTANTS};
use crate::error::{Error, Result};

/// kappa(z) = offset + slope * z for one source, with its per-field split.
///
/// The mismatch is linear in z, so every accumulated phase is integrated in
/// closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaProfile {
    pub offset: f64,
    pub slope: f64,
    /// dbeta_q = weights[q] * kappa for q in [p1, p2, s, i].
    pub weights: [f64; 4],
}

impl KappaProfile {
    pub fn kappa(&self, z: f64) -> f64 {
        self.offset + self.slope * z
    }

    pub fn delta_beta(&self, z: f64) -> [f64; 4] {
        let k = self.kappa(z);
        self.weights.map(|w| w * k)
    }

    /// Theta(z) = integral of kappa from 0 to z.
    pub fn theta(&self, z: f64) -> f64 {
        self.offset * z + 0.5 * self.slope * z * z
    }

    /// Per-field accumulated phase, integral of dbeta_q from 0 to z.
    pub fn accumulated(&self, z: f64) -> [f64; 4] {
        let t = self.theta(z);
        self.weights.map(|w| w * t)
    }

    /// Theta_si(z), the phase factored out of the joint amplitude.
    pub fn theta_si(&self, z: f64) -> f64 {
        (self.weights[2] + self.weights[3]) * self.theta(z)
    }
}

/// kappa(z) = c_w (w(z) - <w>) + c_h dh, where w(z) - <w> includes the
/// mean-width fabrication error and the linear taper.
pub fn kappa_profile(cfg: &SourceConfig) -> KappaProfile {
    let g = &cfg.geometry;
    let m = &cfg.mismatch;
    KappaProfile {
        offset: m.c_kappa_w * (g.width_offset + g.taper_amplitude) + m.c_kappa_h * g.height_offset,
        slope: -2.0 * m.c_kappa_w * g.taper_amplitude / g.length,
        weights: m.distribution,
    }
}

/// Convert phase-matching wavelength sensitivities of the Signal into
/// mismatch coefficients.
///
/// A pair generated under a local mismatch kappa is shifted to
/// d omega_s = kappa / (1/v_s - 1/v_i) (and d omega_i = -d omega_s), so a
/// wavelength slope d lambda_s / dx requires
/// c_x = -(1/v_s - 1/v_i) (2 pi c / lambda_s^2) d lambda_s / dx.
///
/// `dlam_dw` is in nm per um, `dlam_dh` in nm per nm.
pub fn calibrate_mismatch(
    dlam_dw: f64,
    dlam_dh: f64,
    disp: &DispersionSet,
) -> Result<MismatchModel> {
    let v = &disp.group_velocity;
    let inv_dv = 1.0 / v.s - 1.0 / v.i;
    if !inv_dv.is_finite() || inv_dv == 0.0 {
        return Err(Error::Calibration(
            "Signal and Idler group velocities are equal, the mismatch does not move the phase-matched wavelength"
                .into(),
        ));
    }
    let lam = disp.signal_wavelength;
    let dw_dlam = 2.0 * PI * CONSTANTS.c / (lam * lam);
    Ok(MismatchModel {
        c_kappa_w: -inv_dv * dw_dlam * dlam_dw * 1e-3,
        c_kappa_h: -inv_dv * dw_dlam * dlam_dh,
        distribution: super::pumps_only(),
    })
}
