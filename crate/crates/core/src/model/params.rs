use std::f64::consts::{LN_10, LN_2, PI};

use serde::Serialize;

use super::SourceConfig;

/// Quantities derived once per run from a validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunParams {
    /// Energy-equivalent duration of a Gaussian pulse of FWHM T0 (s).
    pub t_eff: f64,
    /// Peak powers of pump 1 and pump 2 (W).
    pub peak_power_p1: f64,
    pub peak_power_p2: f64,
    pub tau_max: f64,
    /// Position where the pump pulses overlap (m).
    pub l_match: f64,
    /// Power loss coefficients in 1/m; fields decay as exp(-alpha z / 2).
    pub alpha_p1: f64,
    pub alpha_p2: f64,
    pub alpha_s: f64,
    pub alpha_i: f64,
    /// Longitudinal step (m).
    pub dz: f64,
    /// Delay in units of T0: initial centre of pump 1 on the dimensionless axis.
    pub tau_norm: f64,
}

pub fn db_per_cm_to_per_m(db_per_cm: f64) -> f64 {
    db_per_cm * (LN_10 / 10.0) * 100.0
}

pub fn per_m_to_db_per_cm(per_m: f64) -> f64 {
    per_m / ((LN_10 / 10.0) * 100.0)
}

pub fn derive_run_params(cfg: &SourceConfig) -> RunParams {
    let pump = &cfg.pump;
    let t_eff = pump.t0_fwhm * (PI / (4.0 * LN_2)).sqrt();
    let pulse_energy = pump.avg_power / pump.rep_rate;
    let tau_max = cfg.tau_max();
    let loss = &cfg.dispersion.loss_db_per_cm;
    RunParams {
        t_eff,
        peak_power_p1: pulse_energy * pump.split_fraction / t_eff,
        peak_power_p2: pulse_energy * (1.0 - pump.split_fraction) / t_eff,
        tau_max,
        l_match: pump.tau / tau_max * cfg.geometry.length,
        alpha_p1: db_per_cm_to_per_m(loss.p1),
        alpha_p2: db_per_cm_to_per_m(loss.p2),
        alpha_s: db_per_cm_to_per_m(loss.s),
        alpha_i: db_per_cm_to_per_m(loss.i),
        dz: cfg.geometry.length / cfg.numerics.n_z as f64,
        tau_norm: pump.tau / pump.t0_fwhm,
    }
}
