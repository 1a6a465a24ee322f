// Negated comparisons below also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::Serialize;

use super::SourceConfig;

/// Relative mismatch tolerated between a tabulated walk-off length and the
/// one implied by the group velocities before a warning is raised.
const WALKOFF_TOLERANCE: f64 = 0.05;

/// Number of z samples on which the local width is checked.
const WIDTH_SAMPLES: usize = 1001;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> crate::Result<Vec<String>> {
        if self.errors.is_empty() {
            Ok(self.warnings)
        } else {
            Err(crate::Error::Validation(self.errors))
        }
    }
}

pub fn validate_config(cfg: &SourceConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let mut err = |m: String| r.errors.push(m);

    let p = &cfg.pump;
    if !(p.avg_power >= 0.0 && p.avg_power.is_finite()) {
        err(format!(
            "pump.avg_power must be finite and >= 0, got {}",
            p.avg_power
        ));
    }
    if !(p.rep_rate > 0.0 && p.rep_rate.is_finite()) {
        err(format!("pump.rep_rate must be > 0, got {}", p.rep_rate));
    }
    if !(p.t0_fwhm > 0.0 && p.t0_fwhm.is_finite()) {
        err(format!("pump.t0_fwhm must be > 0, got {}", p.t0_fwhm));
    }
    if !(p.center_wavelength > 0.0) {
        err(format!(
            "pump.center_wavelength must be > 0, got {}",
            p.center_wavelength
        ));
    }
    if !(0.0..=1.0).contains(&p.split_fraction) {
        err(format!(
            "pump.split_fraction must lie in [0, 1], got {}",
            p.split_fraction
        ));
    }

    let g = &cfg.geometry;
    if !(g.length > 0.0 && g.length.is_finite()) {
        err(format!("geometry.length must be > 0, got {}", g.length));
    }
    if !(g.taper_amplitude >= 0.0) {
        err(format!(
            "geometry.taper_amplitude must be >= 0, got {}",
            g.taper_amplitude
        ));
    }
    if g.length > 0.0 {
        let min_width = (0..WIDTH_SAMPLES)
            .map(|k| g.width_at(g.length * k as f64 / (WIDTH_SAMPLES - 1) as f64))
            .fold(f64::INFINITY, f64::min);
        if !(min_width > 0.0) {
            err(format!(
                "local width is non-positive along the taper: w(0) = {:.4e} m, w(L) = {:.4e} m",
                g.width_at(0.0),
                g.width_at(g.length)
            ));
        }
    }

    let d = &cfg.dispersion;
    let v = d.group_velocity.as_array();
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        err(format!("group velocities must be positive, got {v:?}"));
    }
    if d.gamma
        .as_array()
        .iter()
        .any(|x| !(*x > 0.0 && x.is_finite()))
    {
        err("all nonlinear parameters must be positive".into());
    }
    if d.loss_db_per_cm
        .as_array()
        .iter()
        .any(|x| !(*x >= 0.0 && x.is_finite()))
    {
        err("losses must be finite and >= 0".into());
    }
    if d.dispersion_length
        .as_array()
        .iter()
        .any(|x| *x == 0.0 || x.is_nan())
    {
        err("dispersion lengths must be non-zero".into());
    }
    let w = &d.walkoff_length;
    if !(w.p2 > 0.0 && w.p2.is_finite()) {
        err(format!(
            "walkoff_length.p2 must be > 0 (pump 2 is the slower pulse), got {}",
            w.p2
        ));
    }
    if w.s == 0.0 || w.i == 0.0 || w.s.is_nan() || w.i.is_nan() {
        err("Signal and Idler walk-off lengths must be non-zero".into());
    }
    if !(d.idler_wavelength < p.center_wavelength && p.center_wavelength < d.signal_wavelength) {
        err(format!(
            "wavelengths must satisfy idler < pump < signal, got {} / {} / {}",
            d.idler_wavelength, p.center_wavelength, d.signal_wavelength
        ));
    }

    let m = &cfg.mismatch;
    let [w1, w2, ws, wi] = m.distribution;
    if ((w1 + w2 - ws - wi) - 1.0).abs() > 1e-12 {
        err(format!(
            "mismatch.distribution must satisfy p1 + p2 - s - i = 1, got {:?}",
            m.distribution
        ));
    }
    if !(m.c_kappa_w.is_finite() && m.c_kappa_h.is_finite()) {
        err("mismatch coefficients must be finite".into());
    }

    let n = &cfg.numerics;
    if n.n_t < 64 || !n.n_t.is_power_of_two() {
        err(format!(
            "numerics.n_t must be a power of two >= 64, got {}",
            n.n_t
        ));
    }
    if n.n_z < 100 {
        err(format!("numerics.n_z must be >= 100, got {}", n.n_z));
    }
    let span = n.t_window[1] - n.t_window[0];
    if !(span > 0.0) {
        err(format!(
            "numerics.t_window must be increasing, got {:?}",
            n.t_window
        ));
    } else if w.i != 0.0 && g.length > 0.0 {
        let needed = g.length / w.i.abs() + 6.0;
        if span < needed {
            err(format!(
                "numerics.t_window spans {span} pulse widths, needs at least {needed:.3} (Idler walk-through plus 6)"
            ));
        }
    }

    if w.p2 > 0.0 && g.length > 0.0 && p.t0_fwhm > 0.0 {
        let tau_max = cfg.tau_max();
        if !(p.tau >= 0.0) {
            err(format!("pump.tau must be >= 0, got {}", p.tau));
        } else if p.tau > tau_max * (1.0 + 1e-12) {
            err(format!(
                "pump.tau = {:.4e} s exceeds the full walk-through delay tau_max = {:.4e} s",
                p.tau, tau_max
            ));
        }
    }

    // Consistency of tabulated walk-off lengths with the velocities.
    if r.errors.is_empty() {
        let t0 = p.t0_fwhm;
        let v = &d.group_velocity;
        for (name, tabulated, vq) in [("p2", w.p2, v.p2), ("s", w.s, v.s), ("i", w.i, v.i)] {
            let diff = 1.0 / vq - 1.0 / v.p1;
            let implied = t0 / diff;
            if diff == 0.0 {
                continue;
            }
            if implied.signum() != tabulated.signum() {
                r.warnings.push(format!(
                    "walk-off length of {name} has sign {} but the velocities imply {}",
                    tabulated.signum(),
                    implied.signum()
                ));
            } else if ((tabulated.abs() - implied.abs()) / implied.abs()).abs() > WALKOFF_TOLERANCE
            {
                r.warnings.push(format!(
                    "|L_w,{name}| = {:.4} cm differs from T0/|1/v_{name} - 1/v_p1| = {:.4} cm; using the tabulated value",
                    tabulated.abs() * 100.0,
                    implied.abs() * 100.0
                ));
            }
        }
    }
    r
}
