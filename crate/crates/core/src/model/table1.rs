//! Reference device: 1.5 cm long, 2.25 um x 220 nm SOI multimode waveguide
//! pumped at 1550 nm with 0.8 ps pulses at 50 MHz, using the tabulated
//! modal parameters.

use super::{
    calibrate_mismatch, DispersionSet, GeometrySpec, NonlinearParams, NumericsSpec, PerField,
    PumpSpec, SourceConfig, WalkOff,
};

/// Nominal device-layer thickness (m). Informational; mismatch is relative to it.
pub const REFERENCE_HEIGHT: f64 = 220e-9;

/// d lambda_s / d w of the reference cross-section, in nm per um.
pub const SIGNAL_SENSITIVITY_WIDTH: f64 = -15.0;

/// d lambda_s / d h of the reference cross-section, in nm per nm.
pub const SIGNAL_SENSITIVITY_HEIGHT: f64 = 1.0;

const UM_PER_PS: f64 = 1e6;

fn dispersion() -> DispersionSet {
    DispersionSet {
        // Signal rides in TM1 and Idler in TM0: they inherit the pump losses
        // of the same spatial mode.
        loss_db_per_cm: PerField {
            p1: 0.4,
            p2: 0.2,
            s: 0.2,
            i: 0.4,
        },
        group_velocity: PerField {
            p1: 75.20 * UM_PER_PS,
            p2: 73.41 * UM_PER_PS,
            s: 75.29 * UM_PER_PS,
            i: 73.5 * UM_PER_PS,
        },
        walkoff_length: WalkOff {
            p2: 0.25e-2,
            s: -3.27e-2,
            i: 0.26e-2,
        },
        dispersion_length: PerField {
            p1: 4.60e-2,
            p2: 4.43e-2,
            s: 4.09e-2,
            i: 5.18e-2,
        },
        gamma: NonlinearParams {
            g1111: 2.73,
            g1122: 1.77,
            g2211: 1.77,
            g2222: 2.60,
            g11ss: 1.52,
            g22ss: 2.25,
            g11ii: 3.12,
            g22ii: 2.01,
            g_p1p2si: 1.34,
        },
        signal_wavelength: 1581.4e-9,
        idler_wavelength: 1519.9e-9,
    }
}

/// The tabulated reference source: straight waveguide (no taper), 1 mW of
/// average power split evenly, delay at half of the full walk-through.
pub fn reference_config() -> SourceConfig {
    let dispersion = dispersion();
    let mismatch = calibrate_mismatch(
        SIGNAL_SENSITIVITY_WIDTH,
        SIGNAL_SENSITIVITY_HEIGHT,
        &dispersion,
    )
    .expect("tabulated velocities are non-degenerate");
    let geometry = GeometrySpec {
        length: 1.5e-2,
        mean_width: 2.25e-6,
        taper_amplitude: 0.0,
        width_offset: 0.0,
        height_offset: 0.0,
    };
    let mut cfg = SourceConfig {
        pump: PumpSpec {
            avg_power: 1e-3,
            rep_rate: 50e6,
            t0_fwhm: 0.8e-12,
            center_wavelength: 1550e-9,
            split_fraction: 0.5,
            tau: 0.0,
        },
        geometry,
        dispersion,
        mismatch,
        numerics: NumericsSpec::default(),
    };
    cfg.pump.tau = 0.5 * cfg.tau_max();
    cfg
}
