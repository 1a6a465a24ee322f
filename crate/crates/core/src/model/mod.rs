//! Source description: pump, waveguide geometry, modal dispersion and
//! nonlinear coefficients, phase-mismatch model and numerical settings.
//!
//! All quantities are SI (m, s, W, rad) except the per-field losses, which
//! are kept in dB/cm because that is how they are tabulated.

mod area;
mod mismatch;
mod params;
mod table1;
mod validate;

use serde::{Deserialize, Serialize};

pub use area::{effective_area_and_gamma, ModeProfileGrid, NonlinearOverlap};
pub use mismatch::{calibrate_mismatch, kappa_profile, KappaProfile};
pub use params::{db_per_cm_to_per_m, derive_run_params, per_m_to_db_per_cm, RunParams};
pub use table1::{
    reference_config, REFERENCE_HEIGHT, SIGNAL_SENSITIVITY_HEIGHT, SIGNAL_SENSITIVITY_WIDTH,
};
pub use validate::{validate_config, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Speed of light in vacuum (m/s).
    pub c: f64,
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    pub ln10: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    c: 299_792_458.0,
    hbar: 1.054_571_817e-34,
    ln10: std::f64::consts::LN_10,
};

impl Default for PhysicalConstants {
    fn default() -> Self {
        CONSTANTS
    }
}

/// One value per optical field: the two pumps, Signal and Idler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerField {
    pub p1: f64,
    pub p2: f64,
    pub s: f64,
    pub i: f64,
}

impl PerField {
    pub fn as_array(&self) -> [f64; 4] {
        [self.p1, self.p2, self.s, self.i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    /// Total average power launched in both modes (W).
    pub avg_power: f64,
    pub rep_rate: f64,
    /// Intensity FWHM of each Gaussian pump pulse (s). Also the time unit of
    /// the dimensionless grids.
    pub t0_fwhm: f64,
    pub center_wavelength: f64,
    /// Fraction of the power carried by pump 1 (TM0).
    #[serde(default = "half")]
    pub split_fraction: f64,
    /// Delay of pump 1 with respect to pump 2 (s).
    pub tau: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub length: f64,
    /// Nominal mean width; mismatch is measured from here.
    pub mean_width: f64,
    /// Half of the total width excursion: w(0) = <w> + dw, w(L) = <w> - dw.
    pub taper_amplitude: f64,
    /// Fabrication error on the mean width (m).
    #[serde(default)]
    pub width_offset: f64,
    /// Fabrication error on the device-layer thickness (m).
    #[serde(default)]
    pub height_offset: f64,
}

impl GeometrySpec {
    /// Local waveguide width w(z).
    pub fn width_at(&self, z: f64) -> f64 {
        self.mean_width + self.width_offset + self.taper_amplitude * (1.0 - 2.0 * z / self.length)
    }
}

/// Signed walk-off lengths with respect to pump 1. Positive means the field
/// is slower than pump 1 and drifts towards positive dimensionless time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkOff {
    pub p2: f64,
    pub s: f64,
    pub i: f64,
}

/// Nonlinear parameters in 1/(m W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearParams {
    pub g1111: f64,
    pub g1122: f64,
    pub g2211: f64,
    pub g2222: f64,
    pub g11ss: f64,
    pub g22ss: f64,
    pub g11ii: f64,
    pub g22ii: f64,
    pub g_p1p2si: f64,
}

impl NonlinearParams {
    pub fn as_array(&self) -> [f64; 9] {
        [
            self.g1111,
            self.g1122,
            self.g2211,
            self.g2222,
            self.g11ss,
            self.g22ss,
            self.g11ii,
            self.g22ii,
            self.g_p1p2si,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSet {
    pub loss_db_per_cm: PerField,
    pub group_velocity: PerField,
    pub walkoff_length: WalkOff,
    /// Signed dispersion lengths entering the -i/(2 L_D) d^2/dT^2 operator.
    pub dispersion_length: PerField,
    pub gamma: NonlinearParams,
    pub signal_wavelength: f64,
    pub idler_wavelength: f64,
}

/// Linear phase-mismatch model. The net mismatch
/// kappa = dbeta_p1 + dbeta_p2 - dbeta_s - dbeta_i is linear in the width
/// and height deviations; `distribution` spreads it over the four fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchModel {
    /// d kappa / d w in rad/m per m of width.
    pub c_kappa_w: f64,
    /// d kappa / d h in rad/m per m of height.
    pub c_kappa_h: f64,
    /// Weights [p1, p2, s, i] with dbeta_q = weight_q * kappa; they must
    /// satisfy p1 + p2 - s - i = 1.
    #[serde(default = "pumps_only")]
    pub distribution: [f64; 4],
}

pub fn pumps_only() -> [f64; 4] {
    [0.5, 0.5, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSpec {
    pub n_t: usize,
    /// Dimensionless window [T_min, T_max) in units of the pump FWHM.
    pub t_window: [f64; 2],
    pub n_z: usize,
    pub snapshot_count: usize,
    pub xpm_spm_enabled: bool,
    pub dispersion_enabled: bool,
    /// Remove Signal/Idler frequencies beyond the vertex of the pair phase
    /// mismatch. With second-order dispersion the mismatch is a parabola in
    /// the detuning, so it has a mirror root far from the design point; the
    /// filter keeps the generated pairs on the design side.
    #[serde(default = "default_true")]
    pub replica_filter: bool,
}

fn default_true() -> bool {
    true
}

impl Default for NumericsSpec {
    fn default() -> Self {
        Self {
            n_t: 512,
            t_window: [-4.0, 12.0],
            n_z: 2000,
            snapshot_count: 16,
            xpm_spm_enabled: true,
            dispersion_enabled: true,
            replica_filter: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub pump: PumpSpec,
    pub geometry: GeometrySpec,
    pub dispersion: DispersionSet,
    pub mismatch: MismatchModel,
    #[serde(default)]
    pub numerics: NumericsSpec,
}

impl SourceConfig {
    /// Delay that makes the pumps meet at the output facet, T0 L / L_w,p.
    pub fn tau_max(&self) -> f64 {
        self.pump.t0_fwhm * self.geometry.length / self.dispersion.walkoff_length.p2
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        let mut c = self.clone();
        c.pump.tau = tau;
        c
    }

    pub fn with_tau_fraction(&self, fraction: f64) -> Self {
        self.with_tau(fraction * self.tau_max())
    }
}
